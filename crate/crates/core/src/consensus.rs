//! Laplacian averaging of GP hyperparameters over the Delaunay graph.
//!
//! Each scalar channel follows `θ_i ← θ_i − α Σ_j L_ij θ_j`. Positive
//! channels (lengthscale, signal variance, noise variance) are averaged in
//! log space by default; the prior mean is always averaged linearly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Laplacian;
use crate::gp::Hyperparams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConsensusError {
    #[error("consensus gain {alpha} must satisfy 0 < alpha < 1/d_max = 1/{max_degree}")]
    GainTooLarge { alpha: f64, max_degree: usize },
    #[error("consensus gain must be positive and finite, got {0}")]
    InvalidGain(f64),
    #[error("{params} parameter sets for a {laplacian}-node Laplacian")]
    DimensionMismatch { params: usize, laplacian: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConsensusConfig {
    pub alpha: f64,
    pub log_space: bool,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        Self { alpha: 0.2, log_space: true }
    }
}

impl ConsensusConfig {
    pub fn validate(&self) -> Result<(), ConsensusError> {
        if self.alpha.is_finite() && self.alpha > 0.0 {
            Ok(())
        } else {
            Err(ConsensusError::InvalidGain(self.alpha))
        }
    }

    /// Stability bound `α < 1/d_max`; any gain is fine on an edgeless graph.
    pub fn check_gain(&self, max_degree: usize) -> Result<(), ConsensusError> {
        self.validate()?;
        if max_degree > 0 && self.alpha * max_degree as f64 >= 1.0 {
            return Err(ConsensusError::GainTooLarge { alpha: self.alpha, max_degree });
        }
        Ok(())
    }
}

const CHANNELS: usize = 4;

/// Which space each channel is averaged in for this set of participants.
#[derive(Debug, Clone, Copy)]
struct Spaces {
    log: [bool; CHANNELS],
}

impl Spaces {
    fn for_params<'a>(cfg: &ConsensusConfig, params: impl IntoIterator<Item = &'a Hyperparams>) -> Self {
        let noise_positive = params.into_iter().all(|h| h.noise_variance > 0.0);
        Self { log: [cfg.log_space, cfg.log_space, cfg.log_space && noise_positive, false] }
    }

    fn encode(&self, h: &Hyperparams) -> [f64; CHANNELS] {
        let raw = [h.lengthscale, h.signal_variance, h.noise_variance, h.prior_mean];
        let mut out = raw;
        for c in 0..CHANNELS {
            if self.log[c] {
                out[c] = raw[c].ln();
            }
        }
        out
    }

    /// Applies per-channel increments given in averaging space. Log channels
    /// scale multiplicatively, so a zero increment leaves the value untouched.
    fn shift(&self, h: &Hyperparams, delta: [f64; CHANNELS]) -> Hyperparams {
        let mut raw = [h.lengthscale, h.signal_variance, h.noise_variance, h.prior_mean];
        for c in 0..CHANNELS {
            if self.log[c] {
                raw[c] *= delta[c].exp();
            } else {
                raw[c] += delta[c];
            }
        }
        Hyperparams { lengthscale: raw[0], signal_variance: raw[1], noise_variance: raw[2], prior_mean: raw[3] }
    }
}

/// Channel values of a hyperparameter set in the space consensus averages them in.
pub fn averaging_coordinates(cfg: &ConsensusConfig, params: &[Hyperparams]) -> Vec<[f64; 4]> {
    let spaces = Spaces::for_params(cfg, params);
    params.iter().map(|h| spaces.encode(h)).collect()
}

/// One synchronous consensus round over all agents: every new value is
/// computed from the old values before any is written.
pub fn consensus_step(
    params: &[Hyperparams],
    laplacian: &Laplacian,
    cfg: &ConsensusConfig,
) -> Result<Vec<Hyperparams>, ConsensusError> {
    let n = params.len();
    if laplacian.size() != n {
        return Err(ConsensusError::DimensionMismatch { params: n, laplacian: laplacian.size() });
    }
    cfg.check_gain(laplacian.max_degree())?;
    let spaces = Spaces::for_params(cfg, params);
    let old: Vec<[f64; CHANNELS]> = params.iter().map(|h| spaces.encode(h)).collect();
    let lap = laplacian.matrix();
    let new = (0..n)
        .map(|i| {
            let mut delta = [0.0; CHANNELS];
            for (c, d) in delta.iter_mut().enumerate() {
                // Σ_j L_ij θ_j written with differences, exact at agreement.
                let flow: f64 =
                    (0..n).filter(|&j| j != i).map(|j| -(lap[(i, j)] as f64) * (old[i][c] - old[j][c])).sum();
                *d = -cfg.alpha * flow;
            }
            spaces.shift(&params[i], delta)
        })
        .collect();
    Ok(new)
}

/// One agent's update from its own value and its neighbors' messages:
/// `θ_i + α Σ_{j ∈ N_i} (θ_j − θ_i)`.
///
/// The caller is responsible for the gain bound, which needs the global
/// maximum degree.
pub fn local_update(own: &Hyperparams, neighbors: &[Hyperparams], cfg: &ConsensusConfig) -> Hyperparams {
    let spaces = Spaces::for_params(cfg, std::iter::once(own).chain(neighbors));
    let mine = spaces.encode(own);
    let mut delta = [0.0; CHANNELS];
    for h in neighbors {
        let theirs = spaces.encode(h);
        for c in 0..CHANNELS {
            delta[c] += cfg.alpha * (theirs[c] - mine[c]);
        }
    }
    spaces.shift(own, delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::laplacian_of;
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeSet;

    fn h(l: f64, sv: f64, noise: f64, mean: f64) -> Hyperparams {
        Hyperparams { lengthscale: l, signal_variance: sv, noise_variance: noise, prior_mean: mean }
    }

    fn path(n: usize) -> Laplacian {
        let sets: Vec<BTreeSet<usize>> = (0..n)
            .map(|i| {
                let mut s = BTreeSet::new();
                if i > 0 {
                    s.insert(i - 1);
                }
                if i + 1 < n {
                    s.insert(i + 1);
                }
                s
            })
            .collect();
        laplacian_of(&sets).unwrap()
    }

    #[test]
    fn agreement_is_a_fixed_point() {
        let p = vec![h(3.0, 1.5, 0.1, 0.2); 4];
        let out = consensus_step(&p, &path(4), &ConsensusConfig::default()).unwrap();
        assert_eq!(out, p);
    }

    #[test]
    fn two_agents_average_in_one_step() {
        let cfg = ConsensusConfig { alpha: 0.5, log_space: false };
        let out = consensus_step(&[h(2.0, 2.0, 2.0, 2.0), h(4.0, 4.0, 4.0, 4.0)], &path(2), &cfg).unwrap();
        assert_eq!(out, vec![h(3.0, 3.0, 3.0, 3.0); 2]);
    }

    #[test]
    fn path_graph_converges_to_the_mean() {
        let cfg = ConsensusConfig { alpha: 0.2, log_space: true };
        let mut p = vec![h(1.0, 0.5, 0.01, -1.0), h(4.0, 2.0, 0.2, 0.0), h(9.0, 1.0, 0.05, 3.0), h(2.0, 8.0, 0.1, 1.0)];
        let start = averaging_coordinates(&cfg, &p);
        let lap = path(4);
        for _ in 0..200 {
            p = consensus_step(&p, &lap, &cfg).unwrap();
        }
        let end = averaging_coordinates(&cfg, &p);
        for c in 0..4 {
            let mean = start.iter().map(|v| v[c]).sum::<f64>() / 4.0;
            for v in &end {
                assert_abs_diff_eq!(v[c], mean, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn gain_bound_is_enforced() {
        let p = vec![h(1.0, 1.0, 0.1, 0.0); 3];
        let cfg = ConsensusConfig { alpha: 0.5, log_space: true };
        assert_eq!(consensus_step(&p, &path(3), &cfg), Err(ConsensusError::GainTooLarge { alpha: 0.5, max_degree: 2 }));
        let cfg = ConsensusConfig { alpha: -0.1, log_space: true };
        assert!(consensus_step(&p, &path(3), &cfg).is_err());
        // No edges: nothing to bound.
        let lonely = laplacian_of(&[BTreeSet::new()]).unwrap();
        let cfg = ConsensusConfig { alpha: 5.0, log_space: true };
        assert_eq!(consensus_step(&p[..1], &lonely, &cfg).unwrap(), p[..1].to_vec());
        assert!(matches!(
            consensus_step(&p, &lonely, &ConsensusConfig::default()),
            Err(ConsensusError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_noise_falls_back_to_linear() {
        let cfg = ConsensusConfig { alpha: 0.25, log_space: true };
        let out = consensus_step(&[h(1.0, 1.0, 0.0, 0.0), h(1.0, 1.0, 0.4, 0.0)], &path(2), &cfg).unwrap();
        assert_abs_diff_eq!(out[0].noise_variance, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1].noise_variance, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn local_update_matches_laplacian_form() {
        let cfg = ConsensusConfig::default();
        let p = vec![h(1.0, 0.5, 0.01, -1.0), h(4.0, 2.0, 0.2, 0.0), h(9.0, 1.0, 0.05, 3.0)];
        let global = consensus_step(&p, &path(3), &cfg).unwrap();
        let local = local_update(&p[1], &[p[0], p[2]], &cfg);
        assert_abs_diff_eq!(local.lengthscale, global[1].lengthscale, epsilon = 1e-12);
        assert_abs_diff_eq!(local.signal_variance, global[1].signal_variance, epsilon = 1e-12);
        assert_abs_diff_eq!(local.noise_variance, global[1].noise_variance, epsilon = 1e-12);
        assert_abs_diff_eq!(local.prior_mean, global[1].prior_mean, epsilon = 1e-12);
    }
}
