use gpcov::control::{step, OptimizerConfig, OptimizerState, Phase};
use gpcov::{Domain, Point};
use proptest::prelude::*;

fn domain() -> Domain {
    Domain::new(96, 54).unwrap()
}

fn point_in(d: Domain) -> impl Strategy<Value = Point> {
    (0.0..=d.world_width(), 0.0..=d.world_height()).prop_map(|(x, y)| Point::new(x, y))
}

fn gradient() -> impl Strategy<Value = Point> {
    (-1e4f64..1e4, -1e4f64..1e4).prop_map(|(x, y)| Point::new(x, y))
}

fn config() -> impl Strategy<Value = OptimizerConfig> {
    (0.1f64..20.0, 0.1f64..20.0, 0.5f64..15.0).prop_map(|(eta, eta_adam, v_max)| OptimizerConfig {
        eta,
        eta_adam,
        v_max,
        ..Default::default()
    })
}

#[test]
fn adam_from_rest_walks_against_a_constant_gradient() {
    let cfg = OptimizerConfig { eta_adam: 1.0, v_max: 10.0, ..Default::default() };
    let mut state = OptimizerState::new(cfg);
    state.phase = Phase::Adam;
    let mut pos = Point::new(50.0, 20.0);
    let (mut m, mut v) = (0.0f64, 0.0f64);
    let mut x = 50.0;
    for t in 1..=5 {
        let (p, s) = step(&pos, &Point::new(1.0, 0.0), &state, &domain()).unwrap();
        m = 0.9 * m + 0.1;
        v = 0.999 * v + 0.001;
        let m_hat = m / (1.0 - 0.9f64.powi(t));
        let v_hat = v / (1.0 - 0.999f64.powi(t));
        x -= m_hat / (v_hat.sqrt() + 1e-8);
        assert!((p.x - x).abs() < 1e-12 && p.y == 20.0);
        pos = p;
        state = s;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn displacement_is_capped_and_the_result_stays_inside(
        pos in point_in(domain()), g in gradient(), cfg in config(), adam in any::<bool>(), warm in 0usize..5
    ) {
        let mut state = OptimizerState::new(cfg);
        state.phase = if adam { Phase::Adam } else { Phase::NormalizedGD };
        let mut p = pos;
        for k in 0..=warm {
            let g = g * (1.0 + k as f64);
            let (next, s) = step(&p, &g, &state, &domain()).unwrap();
            prop_assert!((next - p).norm() <= cfg.v_max + 1e-12);
            prop_assert!(domain().contains(&next));
            p = next;
            state = s;
        }
    }

    #[test]
    fn normalized_step_has_fixed_length(g in gradient(), cfg in config()) {
        prop_assume!(g.norm() >= 1e-12);
        // Far enough from the border that the clamp is inactive.
        let big = Domain::new(200, 200).unwrap();
        let pos = Point::new(100.0, 100.0);
        let (next, _) = step(&pos, &g, &OptimizerState::new(cfg), &big).unwrap();
        prop_assert!(((next - pos).norm() - cfg.eta.min(cfg.v_max)).abs() < 1e-9);
        prop_assert!((next - pos).dot(&g) < 0.0);
    }

    #[test]
    fn phase_never_reverts(sigmas in prop::collection::vec(0.0f64..10.0, 1..60), k in 1usize..6) {
        let mut state = OptimizerState::new(OptimizerConfig { k, epsilon: 0.05, ..Default::default() });
        let mut seen_adam = false;
        let mut pos = Point::new(40.0, 20.0);
        for s in sigmas {
            state.observe_sigma(s);
            if seen_adam {
                prop_assert_eq!(state.phase, Phase::Adam);
            }
            seen_adam |= state.phase == Phase::Adam;
            let (p, next) = step(&pos, &Point::new(1.0, -2.0), &state, &domain()).unwrap();
            prop_assert_eq!(next.phase, state.phase);
            pos = p;
            state = next;
        }
    }
}
