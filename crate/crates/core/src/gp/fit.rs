//! Log marginal likelihood of the inducing data and a small gradient-ascent
//! refit over log hyperparameters.

use nalgebra::{DMatrix, DVector};

use super::{regularized_gram, Hyperparams, SparseGP};
use crate::geometry::Point;

/// Likelihood value and its gradient with respect to
/// `(log lengthscale, log signal variance, log noise variance)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodEval {
    pub value: f64,
    pub gradient: [f64; 3],
}

impl LikelihoodEval {
    pub fn gradient_norm(&self) -> f64 {
        self.gradient.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Returns `None` when the gram cannot be factorized or the value is not finite.
pub fn log_marginal_likelihood(points: &[Point], values: &[f64], hyper: &Hyperparams) -> Option<LikelihoodEval> {
    let n = points.len();
    let gram = regularized_gram(points, hyper);
    let chol = gram.cholesky()?;
    let resid = DVector::from_iterator(n, values.iter().map(|v| v - hyper.prior_mean));
    let alpha = chol.solve(&resid);
    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().take(n).map(|d| d.ln()).sum::<f64>();
    let value = -0.5 * resid.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    if !value.is_finite() {
        return None;
    }

    // dL/dθ = ½ tr((ααᵀ − K⁻¹) ∂K/∂θ)
    let inv = chol.inverse();
    let core: DMatrix<f64> = &alpha * alpha.transpose() - inv;
    let ls2 = hyper.lengthscale * hyper.lengthscale;
    let mut g_ls = 0.0;
    let mut g_sv = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d2 = (points[i] - points[j]).norm_squared();
            let k = hyper.signal_variance * (-0.5 * d2 / ls2).exp();
            g_ls += core[(i, j)] * k * d2 / ls2;
            g_sv += core[(i, j)] * k;
        }
    }
    let g_noise = hyper.noise_variance * core.trace();
    let gradient = [0.5 * g_ls, 0.5 * g_sv, 0.5 * g_noise];
    if gradient.iter().all(|g| g.is_finite()) {
        Some(LikelihoodEval { value, gradient })
    } else {
        None
    }
}

fn to_log(h: &Hyperparams) -> [f64; 3] {
    [h.lengthscale.ln(), h.signal_variance.ln(), h.noise_variance.ln()]
}

fn from_log(theta: [f64; 3], base: &Hyperparams) -> Hyperparams {
    Hyperparams {
        lengthscale: theta[0].exp(),
        signal_variance: theta[1].exp(),
        noise_variance: if base.noise_variance > 0.0 { theta[2].exp() } else { 0.0 },
        prior_mean: base.prior_mean,
    }
}

/// Gradient ascent on the log marginal likelihood of the inducing data.
///
/// Steps follow the normalized gradient in log space with a backtracking
/// step length, so the likelihood never decreases. A zero noise variance
/// stays zero. `steps == 0`, fewer than two inducing points, or a
/// non-finite likelihood at the start leave the input unchanged.
pub fn refit_hyperparams(gp: &SparseGP, steps: usize) -> Hyperparams {
    let start = *gp.hyper();
    if steps == 0 || gp.len() < 2 {
        return start;
    }
    let points = gp.inducing_points();
    let values: Vec<f64> = gp.inducing().iter().map(|s| s.value).collect();
    let Some(mut current) = log_marginal_likelihood(points, &values, &start) else {
        return start;
    };
    let mut hyper = start;
    let mut step_len = 0.5;

    for _ in 0..steps {
        let mut grad = current.gradient;
        if hyper.noise_variance == 0.0 {
            grad[2] = 0.0;
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm < 1e-12 {
            break;
        }
        let theta = to_log(&hyper);
        let mut accepted = false;
        for _ in 0..30 {
            let mut trial = theta;
            for c in 0..3 {
                trial[c] += step_len * grad[c] / norm;
            }
            let candidate = from_log(trial, &hyper);
            if candidate.validate().is_ok() {
                if let Some(eval) = log_marginal_likelihood(points, &values, &candidate) {
                    if eval.value > current.value {
                        hyper = candidate;
                        current = eval;
                        step_len *= 1.5;
                        accepted = true;
                        break;
                    }
                }
            }
            step_len *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    hyper
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::Sample;

    #[test]
    fn disabled_refit_is_identity() {
        let h = Hyperparams::default();
        let gp = SparseGP::new(h, vec![Sample::new(0.0, 0.0, 1.0), Sample::new(5.0, 0.0, 2.0)]).unwrap();
        assert_eq!(refit_hyperparams(&gp, 0), h);
        let single = SparseGP::new(h, vec![Sample::new(0.0, 0.0, 1.0)]).unwrap();
        assert_eq!(refit_hyperparams(&single, 10), h);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let pts: Vec<Point> = (0..7).map(|i| Point::new(i as f64 * 1.3, (i % 3) as f64 * 2.1)).collect();
        let vals: Vec<f64> = (0..7).map(|i| (i as f64 * 0.7).sin()).collect();
        let h = Hyperparams { lengthscale: 2.2, signal_variance: 0.8, noise_variance: 0.05, prior_mean: 0.1 };
        let eval = log_marginal_likelihood(&pts, &vals, &h).unwrap();
        let theta = to_log(&h);
        let step = 1e-5;
        for c in 0..3 {
            let mut up = theta;
            let mut down = theta;
            up[c] += step;
            down[c] -= step;
            let fu = log_marginal_likelihood(&pts, &vals, &from_log(up, &h)).unwrap().value;
            let fd = log_marginal_likelihood(&pts, &vals, &from_log(down, &h)).unwrap().value;
            let fd_grad = (fu - fd) / (2.0 * step);
            let rel = (fd_grad - eval.gradient[c]).abs() / fd_grad.abs().max(1e-8);
            assert!(rel < 1e-5, "channel {c}: analytic {} vs fd {fd_grad}", eval.gradient[c]);
        }
    }

    #[test]
    fn zero_noise_stays_zero() {
        let h = Hyperparams { lengthscale: 1.0, signal_variance: 1.0, noise_variance: 0.0, prior_mean: 0.0 };
        let samples: Vec<Sample> = (0..5).map(|i| Sample::new(i as f64 * 3.0, 0.0, (i as f64).cos())).collect();
        let gp = SparseGP::new(h, samples).unwrap();
        assert_eq!(refit_hyperparams(&gp, 20).noise_variance, 0.0);
    }
}
