//! One agent's private state and the steps it runs on it.

use rand_chacha::ChaCha8Rng;

use crate::consensus::{local_update, ConsensusConfig};
use crate::control::{self, OptimizerState};
use crate::cost::{cell_cost_report, CellCostReport, QuadratureSpec};
use crate::geometry::{Cell, Domain, Point};
use crate::gp::{greedy_select, merge_inducing, refit_hyperparams, Hyperparams, Sample, SampleBuffer, SparseGP};
use crate::scenario::{sample_density, DensityField};

use super::SimError;

#[derive(Debug, Clone)]
pub struct AgentState {
    pub id: usize,
    pub pos: Point,
    pub gp: SparseGP,
    pub buffer: SampleBuffer,
    pub opt: OptimizerState,
    pub hyper: Hyperparams,
    pub rng: ChaCha8Rng,
    pub last_report: Option<CellCostReport>,
}

impl AgentState {
    /// Averages hyperparameters with the neighbors' and rebuilds the posterior
    /// cache under the result.
    pub fn apply_consensus(&mut self, neighbors: &[Hyperparams], cfg: &ConsensusConfig) -> Result<(), SimError> {
        if neighbors.is_empty() {
            return Ok(());
        }
        let next = local_update(&self.hyper, neighbors, cfg);
        self.set_hyper(next)
    }

    pub fn set_hyper(&mut self, hyper: Hyperparams) -> Result<(), SimError> {
        if hyper != self.hyper {
            self.gp = self.gp.with_hyper(hyper)?;
            self.hyper = hyper;
        }
        Ok(())
    }

    /// Noisy measurement at the current position, appended to the buffer.
    pub fn measure(&mut self, field: &DensityField, noise_sigma: f64) -> Result<(), SimError> {
        let value = sample_density(field, &self.pos, noise_sigma, &mut self.rng)?;
        self.buffer.push(Sample { point: self.pos, value });
        Ok(())
    }

    /// Merges own, buffered, and received inducing points, keeps the `capacity`
    /// most informative, and rebuilds the posterior.
    pub fn refresh(&mut self, received: &[&[Sample]], capacity: usize, refit_steps: usize) -> Result<(), SimError> {
        let merged = merge_inducing(self.gp.inducing(), self.buffer.entries(), received);
        let selected = greedy_select(&merged, capacity, &self.hyper);
        self.gp = SparseGP::new(self.hyper, selected)?;
        self.buffer.clear();
        if refit_steps > 0 {
            let fitted = refit_hyperparams(&self.gp, refit_steps);
            self.set_hyper(fitted)?;
        }
        Ok(())
    }

    /// Cell cost, plateau bookkeeping, and one motion update.
    pub fn control(
        &mut self,
        cell: &Cell<'_>,
        quad: &QuadratureSpec,
        domain: &Domain,
    ) -> Result<CellCostReport, SimError> {
        let report = cell_cost_report(cell, &self.pos, &self.gp, quad);
        self.opt.observe_sigma(report.std);
        let (pos, opt) = control::step(&self.pos, &report.gradient, &self.opt, domain)?;
        self.pos = pos;
        self.opt = opt;
        self.last_report = Some(report);
        Ok(report)
    }
}
