//! Experiment configuration.
//!
//! A [`SimConfig`] is read from TOML. Every field has a default, so a file
//! only lists what it changes:
//!
//! ```toml
//! n_agents = 4
//! seed = 7
//! rounds = 500
//! T = 5
//! M = 60
//! beta = 2.0
//!
//! [domain]
//! width = 240
//! height = 135
//!
//! [scenario]
//! kind = "four_gaussians"
//!
//! [initial_positions]
//! kind = "cluster"
//! corner = "lower_left"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::ConsensusConfig;
use crate::control::OptimizerConfig;
use crate::cost::QuadratureSpec;
use crate::geometry::{Domain, Point};
use crate::gp::Hyperparams;
use crate::scenario::{DensityField, Scenario};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot parse configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize configuration: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corner {
    LowerLeft,
    LowerRight,
    UpperLeft,
    UpperRight,
}

/// Where agents start. "Lower" is the small-`y` side of the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialPositions {
    UniformRandom,
    /// Uniform in a square at `corner` whose side is `extent` times the
    /// shorter domain side.
    Cluster {
        corner: Corner,
        #[serde(default = "default_cluster_extent")]
        extent: f64,
    },
    Explicit {
        points: Vec<[f64; 2]>,
    },
}

fn default_cluster_extent() -> f64 {
    0.15
}

/// Initial GP prior. Unset entries are derived from the scenario:
/// lengthscale `world width / 12`, signal variance `0.1 · (max φ)²`,
/// noise variance `noise_sigma²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lengthscale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signal_variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_variance: Option<f64>,
    pub prior_mean: f64,
    /// Log-normal spread applied per agent to lengthscale, signal and noise
    /// variance. Zero gives every agent the same prior.
    pub spread: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self { lengthscale: None, signal_variance: None, noise_variance: None, prior_mean: 0.0, spread: 0.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSettings {
    /// Lattice stride of the single integrals; 0 picks one from the domain size.
    pub single_stride: usize,
    pub pair_budget: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self { single_stride: 0, pair_budget: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub domain: Domain,
    pub n_agents: usize,
    pub scenario: Scenario,
    pub seed: u64,
    pub rounds: usize,
    /// Inducing refresh period `T`.
    #[serde(rename = "T")]
    pub refresh_period: usize,
    /// Inducing capacity `M`.
    #[serde(rename = "M")]
    pub capacity: usize,
    pub beta: f64,
    /// Measurement noise standard deviation; defaults to `0.05 · max φ`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
    pub initial_positions: InitialPositions,
    /// Also run the ground-truth Lloyd baseline in batches.
    pub baseline: bool,
    pub lloyd_gamma: f64,
    /// Noise-free samples on this pixel lattice seed every agent's inducing set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preseed_stride: Option<usize>,
    /// Likelihood ascent steps on each refresh; 0 keeps hyperparameters to consensus only.
    pub refit_steps: usize,
    /// Pixel stride of the RMSE grid; 0 picks one from the domain size.
    pub metric_stride: usize,
    pub prior: PriorConfig,
    pub optimizer: OptimizerConfig,
    pub consensus: ConsensusConfig,
    pub quadrature: QuadratureSettings,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            domain: Domain { width: 960, height: 540, cell_size: 1.0 },
            n_agents: 4,
            scenario: Scenario::FourGaussians,
            seed: 0,
            rounds: 500,
            refresh_period: 5,
            capacity: 60,
            beta: 2.0,
            noise_sigma: None,
            initial_positions: InitialPositions::UniformRandom,
            baseline: false,
            lloyd_gamma: 0.5,
            preseed_stride: None,
            refit_steps: 0,
            metric_stride: 0,
            prior: PriorConfig::default(),
            optimizer: OptimizerConfig::default(),
            consensus: ConsensusConfig::default(),
            quadrature: QuadratureSettings::default(),
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.domain.validate().map_err(|e| invalid(e.to_string()))?;
        if self.n_agents == 0 {
            return Err(invalid("n_agents must be at least 1"));
        }
        if self.capacity == 0 {
            return Err(invalid("M must be at least 1"));
        }
        if self.refresh_period == 0 {
            return Err(invalid("T must be at least 1"));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(invalid(format!("beta must be >= 0, got {}", self.beta)));
        }
        if let Some(s) = self.noise_sigma {
            if !(s.is_finite() && s >= 0.0) {
                return Err(invalid(format!("noise_sigma must be >= 0, got {s}")));
            }
        }
        if !(self.lloyd_gamma > 0.0 && self.lloyd_gamma <= 1.0) {
            return Err(invalid(format!("lloyd_gamma must lie in (0, 1], got {}", self.lloyd_gamma)));
        }
        if self.preseed_stride == Some(0) {
            return Err(invalid("preseed_stride must be at least 1"));
        }
        let p = &self.prior;
        for (name, v) in [("lengthscale", p.lengthscale), ("signal_variance", p.signal_variance)] {
            if v.is_some_and(|v| !(v.is_finite() && v > 0.0)) {
                return Err(invalid(format!("prior {name} must be positive")));
            }
        }
        if p.noise_variance.is_some_and(|v| !(v.is_finite() && v >= 0.0)) {
            return Err(invalid("prior noise_variance must be >= 0"));
        }
        if !(p.prior_mean.is_finite() && p.spread.is_finite() && p.spread >= 0.0) {
            return Err(invalid("prior mean must be finite and spread >= 0"));
        }
        self.optimizer.validate().map_err(|e| invalid(e.to_string()))?;
        self.consensus.validate().map_err(|e| invalid(e.to_string()))?;
        self.quadrature_spec().validate().map_err(|e| invalid(e.to_string()))?;
        if let Scenario::Custom(m) = &self.scenario {
            m.validate().map_err(|e| invalid(e.to_string()))?;
        }
        match &self.initial_positions {
            InitialPositions::UniformRandom => {}
            InitialPositions::Cluster { extent, .. } => {
                if !(*extent > 0.0 && *extent <= 1.0) {
                    return Err(invalid(format!("cluster extent must lie in (0, 1], got {extent}")));
                }
            }
            InitialPositions::Explicit { points } => {
                if points.len() != self.n_agents {
                    return Err(invalid(format!("{} explicit positions for {} agents", points.len(), self.n_agents)));
                }
                if let Some(p) = points.iter().find(|p| !self.domain.contains(&Point::new(p[0], p[1]))) {
                    return Err(invalid(format!("initial position ({}, {}) outside the domain", p[0], p[1])));
                }
            }
        }
        Ok(())
    }

    pub fn resolved_noise_sigma(&self, field: &DensityField) -> f64 {
        self.noise_sigma.unwrap_or(0.05 * field.max())
    }

    /// The shared prior before per-agent spread.
    pub fn base_hyper(&self, field: &DensityField) -> Hyperparams {
        let noise = self.resolved_noise_sigma(field);
        let peak = field.max();
        Hyperparams {
            lengthscale: self.prior.lengthscale.unwrap_or(self.domain.world_width() / 12.0),
            signal_variance: self.prior.signal_variance.unwrap_or((0.1 * peak * peak).max(1e-6)),
            noise_variance: self.prior.noise_variance.unwrap_or(noise * noise),
            prior_mean: self.prior.prior_mean,
        }
    }

    pub fn single_stride(&self) -> usize {
        match self.quadrature.single_stride {
            0 => auto_stride(self.domain.num_pixels(), 8192),
            s => s,
        }
    }

    pub fn metric_stride(&self) -> usize {
        match self.metric_stride {
            0 => auto_stride(self.domain.num_pixels(), 1024),
            s => s,
        }
    }

    pub fn quadrature_spec(&self) -> QuadratureSpec {
        QuadratureSpec {
            single_stride: self.single_stride(),
            pair_budget: self.quadrature.pair_budget,
            beta: self.beta,
        }
    }
}

/// Smallest stride whose lattice keeps roughly `target` nodes or fewer.
fn auto_stride(pixels: usize, target: usize) -> usize {
    ((pixels as f64 / target as f64).sqrt().ceil() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = SimConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(SimConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = SimConfig::from_toml_str(
            r#"
            n_agents = 3
            T = 2
            M = 20
            [domain]
            width = 96
            height = 54
            [scenario]
            kind = "hotspots"
            [initial_positions]
            kind = "cluster"
            corner = "upper_right"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.n_agents, 3);
        assert_eq!(cfg.refresh_period, 2);
        assert_eq!(cfg.capacity, 20);
        assert_eq!(cfg.domain.cell_size, 1.0);
        assert_eq!(cfg.scenario, Scenario::Hotspots);
        assert_eq!(cfg.initial_positions, InitialPositions::Cluster { corner: Corner::UpperRight, extent: 0.15 });
        assert_eq!(cfg.beta, 2.0);
    }

    #[test]
    fn custom_scenario_parses() {
        let cfg = SimConfig::from_toml_str(
            r#"
            [scenario]
            kind = "custom"
            background = 0.5
            [[scenario.bumps]]
            center = [10.0, 20.0]
            sigma = 4.0
            amplitude = 2.0
            "#,
        )
        .unwrap();
        let Scenario::Custom(m) = cfg.scenario else { panic!("not custom") };
        assert_eq!(m.background, 0.5);
        assert_eq!(m.bumps[0].center, [10.0, 20.0]);
    }

    #[test]
    fn inconsistencies_are_rejected() {
        for text in [
            "n_agents = 0",
            "M = 0",
            "T = 0",
            "beta = -1.0",
            "lloyd_gamma = 1.5",
            "n_agents = 2\n[initial_positions]\nkind = \"explicit\"\npoints = [[1.0, 1.0]]",
            "[initial_positions]\nkind = \"explicit\"\npoints = [[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [5000.0, 1.0]]",
            "[scenario]\nkind = \"spiral\"",
            "unknown_key = 3",
        ] {
            assert!(SimConfig::from_toml_str(text).is_err(), "accepted: {text}");
        }
    }

    #[test]
    fn strides_scale_with_the_domain() {
        let mut cfg = SimConfig::default();
        assert_eq!(cfg.single_stride(), 8);
        cfg.domain = Domain::new(240, 135).unwrap();
        assert_eq!(cfg.single_stride(), 2);
        assert_eq!(cfg.metric_stride(), 6);
        cfg.quadrature.single_stride = 1;
        assert_eq!(cfg.single_stride(), 1);
    }
}
