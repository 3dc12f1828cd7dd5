use gpcov::config::InitialPositions;
use gpcov::scenario::build_scenario;
use gpcov::{Domain, Scenario, SimConfig};

#[test]
fn builds_are_deterministic_and_csv_is_stable() {
    let domain = Domain::new(64, 36).unwrap();
    for name in ["four-gaussians", "single-peak", "uniform", "hotspots"] {
        let s: Scenario = name.parse().unwrap();
        let a = build_scenario(&s, &domain).unwrap();
        let b = build_scenario(&s, &domain).unwrap();
        assert_eq!(a, b);
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_csv(&mut x).unwrap();
        b.write_csv(&mut y).unwrap();
        assert_eq!(x, y);
        let text = String::from_utf8(x).unwrap();
        assert_eq!(text.lines().count(), 36);
        assert!(text.lines().all(|l| l.split(',').count() == 64));
    }
}

#[test]
fn four_gaussian_peaks_sit_in_the_quadrants() {
    let domain = Domain::new(240, 135).unwrap();
    let f = build_scenario(&Scenario::FourGaussians, &domain).unwrap();
    let q = |c0: usize, r0: usize| {
        let mut best = (0.0, 0, 0);
        for r in r0..r0 + 67 {
            for c in c0..c0 + 120 {
                if f.at_pixel(c, r) > best.0 {
                    best = (f.at_pixel(c, r), c, r);
                }
            }
        }
        best.0
    };
    for (c, r) in [(0, 0), (120, 0), (0, 67), (120, 67)] {
        assert!(q(c, r) > 0.9);
    }
    assert!(f.values.iter().all(|&v| v >= 0.0));
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = SimConfig {
        n_agents: 7,
        seed: 99,
        beta: 0.5,
        scenario: Scenario::Hotspots,
        initial_positions: InitialPositions::Explicit { points: vec![[1.0, 2.0]; 7] },
        noise_sigma: Some(0.3),
        ..SimConfig::default()
    };
    let text = cfg.to_toml_string().unwrap();
    assert_eq!(SimConfig::from_toml_str(&text).unwrap(), cfg);
    assert!(SimConfig::from_toml_str("n_agents = 0").is_err());
    assert!(SimConfig::from_toml_str("bogus = 1").is_err());
}
