//! Per-agent motion update.
//!
//! Agents start with fixed-length steps along the negative normalized
//! gradient. Once the cell-cost standard deviation plateaus they switch, for
//! good, to Adam. Every displacement is clipped to `v_max` and the result is
//! clamped into the domain rectangle.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Domain, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("gradient is not finite: ({0}, {1})")]
    NonFiniteGradient(f64, f64),
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Step length of normalized gradient descent.
    pub eta: f64,
    /// Adam step size.
    pub eta_adam: f64,
    /// Maximum displacement per round.
    pub v_max: f64,
    /// Plateau window.
    pub k: usize,
    /// Plateau threshold on the mean relative change of σ.
    pub epsilon: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { eta: 5.0, eta_adam: 2.0, v_max: 10.0, k: 10, epsilon: 0.02, beta1: 0.9, beta2: 0.999, adam_eps: 1e-8 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let unit = |v: f64| (0.0..1.0).contains(&v);
        if !(positive(self.eta) && positive(self.eta_adam) && positive(self.v_max) && positive(self.adam_eps)) {
            return Err(ControlError::InvalidConfig("step sizes and v_max must be positive".into()));
        }
        if self.k == 0 || !positive(self.epsilon) {
            return Err(ControlError::InvalidConfig("plateau window and threshold must be positive".into()));
        }
        if !(unit(self.beta1) && unit(self.beta2)) {
            return Err(ControlError::InvalidConfig("Adam decay rates must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    NormalizedGD,
    Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub phase: Phase,
    pub adam_m: Point,
    pub adam_v: Point,
    pub adam_t: u32,
    pub sigma_history: VecDeque<f64>,
    pub config: OptimizerConfig,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig) -> Self {
        Self {
            phase: Phase::NormalizedGD,
            adam_m: Point::zeros(),
            adam_v: Point::zeros(),
            adam_t: 0,
            sigma_history: VecDeque::with_capacity(config.k + 1),
            config,
        }
    }

    /// Mean relative change of σ over the last `k` steps, if `k + 1` values exist.
    pub fn mean_relative_change(&self) -> Option<f64> {
        let k = self.config.k;
        if self.sigma_history.len() < k + 1 {
            return None;
        }
        let total: f64 = self
            .sigma_history
            .iter()
            .zip(self.sigma_history.iter().skip(1))
            .map(|(&prev, &next)| if prev.abs() < 1e-12 { 0.0 } else { (next - prev).abs() / prev.abs() })
            .sum();
        Some(total / k as f64)
    }

    pub fn plateau_detected(&self) -> bool {
        self.mean_relative_change().is_some_and(|c| c <= self.config.epsilon)
    }

    /// Records this round's σ and flips to Adam on a plateau.
    pub fn observe_sigma(&mut self, sigma: f64) {
        self.sigma_history.push_back(sigma);
        while self.sigma_history.len() > self.config.k + 1 {
            self.sigma_history.pop_front();
        }
        if self.phase == Phase::NormalizedGD && self.plateau_detected() {
            self.phase = Phase::Adam;
        }
    }
}

pub fn plateau_detected(state: &OptimizerState) -> bool {
    state.plateau_detected()
}

/// One motion update. Returns the new position and optimizer state; the
/// input state is untouched on error.
pub fn step(
    pos: &Point,
    gradient: &Point,
    state: &OptimizerState,
    domain: &Domain,
) -> Result<(Point, OptimizerState), ControlError> {
    if !(gradient.x.is_finite() && gradient.y.is_finite()) {
        return Err(ControlError::NonFiniteGradient(gradient.x, gradient.y));
    }
    let cfg = &state.config;
    let mut next = state.clone();
    let mut disp = match state.phase {
        Phase::NormalizedGD => {
            let norm = gradient.norm();
            if norm < 1e-12 {
                Point::zeros()
            } else {
                -gradient * (cfg.eta / norm)
            }
        }
        Phase::Adam => {
            next.adam_t += 1;
            next.adam_m = state.adam_m * cfg.beta1 + gradient * (1.0 - cfg.beta1);
            next.adam_v = state.adam_v * cfg.beta2 + gradient.component_mul(gradient) * (1.0 - cfg.beta2);
            let t = next.adam_t as i32;
            let m_hat = next.adam_m / (1.0 - cfg.beta1.powi(t));
            let v_hat = next.adam_v / (1.0 - cfg.beta2.powi(t));
            -Point::new(
                cfg.eta_adam * m_hat.x / (v_hat.x.sqrt() + cfg.adam_eps),
                cfg.eta_adam * m_hat.y / (v_hat.y.sqrt() + cfg.adam_eps),
            )
        }
    };
    let len = disp.norm();
    if len > cfg.v_max {
        disp *= cfg.v_max / len;
    }
    Ok((domain.clamp(&(pos + disp)), next))
}
