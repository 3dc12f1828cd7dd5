//! Synchronous round engine.
//!
//! Each round: partition and Laplacian, hyperparameter consensus, one noisy
//! measurement per agent, an inducing refresh every `T` rounds, then one
//! motion update per agent. Phases are barriers; agents exchange data only
//! through [`audit::Bus`].

pub mod agent;
pub mod audit;
mod trace;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::config::{ConfigError, Corner, InitialPositions, SimConfig};
use crate::control::{ControlError, OptimizerState};
use crate::cost::{mass_centroid, true_locational_cost, QuadratureSpec};
use crate::geometry::{compute_partition, Domain, GeometryError, Point, VoronoiPartition};
use crate::gp::{greedy_select, GpError, Hyperparams, Sample, SampleBuffer, SparseGP};
use crate::scenario::{build_scenario, DensityField, ScenarioError};

pub use agent::AgentState;
pub use audit::{Accessor, AgentTable, AuditLog, Bus, Field, MessageKind, MessageRecord, Payload, Violation};
pub use trace::{SimTrace, TraceRecord};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Control(#[from] ControlError),
}

/// Stream 0 of the master seed drives setup; agent `i` samples from stream `i + 1`.
fn setup_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

fn agent_rng(seed: u64, id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64 + 1);
    rng
}

pub fn initial_positions(config: &SimConfig, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let d = &config.domain;
    let (w, h) = (d.world_width(), d.world_height());
    match &config.initial_positions {
        InitialPositions::UniformRandom => {
            (0..config.n_agents).map(|_| Point::new(rng.random::<f64>() * w, rng.random::<f64>() * h)).collect()
        }
        InitialPositions::Cluster { corner, extent } => {
            let side = extent * w.min(h);
            let (x0, y0) = match corner {
                Corner::LowerLeft => (0.0, 0.0),
                Corner::LowerRight => (w - side, 0.0),
                Corner::UpperLeft => (0.0, h - side),
                Corner::UpperRight => (w - side, h - side),
            };
            (0..config.n_agents)
                .map(|_| Point::new(x0 + rng.random::<f64>() * side, y0 + rng.random::<f64>() * side))
                .collect()
        }
        InitialPositions::Explicit { points } => points.iter().map(|p| Point::new(p[0], p[1])).collect(),
    }
}

fn agent_hypers(config: &SimConfig, base: &Hyperparams, rng: &mut ChaCha8Rng) -> Vec<Hyperparams> {
    let spread = config.prior.spread;
    (0..config.n_agents)
        .map(|_| {
            let mut jitter = || (spread * rng.sample::<f64, _>(StandardNormal)).exp();
            Hyperparams {
                lengthscale: base.lengthscale * jitter(),
                signal_variance: base.signal_variance * jitter(),
                noise_variance: base.noise_variance * jitter(),
                prior_mean: base.prior_mean,
            }
        })
        .collect()
}

fn preseed(field: &DensityField, stride: usize) -> Vec<Sample> {
    let d = &field.domain;
    (0..d.num_pixels())
        .filter(|&i| {
            let (c, r) = d.col_row(i);
            c % stride == 0 && r % stride == 0
        })
        .map(|i| Sample { point: d.center(i), value: field.values[i] })
        .collect()
}

/// Pixel centers of the RMSE grid and the true field there.
fn metric_grid(field: &DensityField, stride: usize) -> (Vec<Point>, Vec<f64>) {
    let d = &field.domain;
    (0..d.num_pixels())
        .filter(|&i| {
            let (c, r) = d.col_row(i);
            c % stride == 0 && r % stride == 0
        })
        .map(|i| (d.center(i), field.values[i]))
        .unzip()
}

/// A running simulation of the proposed method.
pub struct Simulation {
    config: SimConfig,
    field: DensityField,
    noise_sigma: f64,
    quad: QuadratureSpec,
    table: AgentTable,
    metric_points: Vec<Point>,
    metric_truth: Vec<f64>,
    round: usize,
    consensus_skipped: usize,
}

impl Simulation {
    pub fn new(config: &SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let field = build_scenario(&config.scenario, &config.domain)?;
        let noise_sigma = config.resolved_noise_sigma(&field);
        let mut rng = setup_rng(config.seed);
        let positions = initial_positions(config, &mut rng);
        let base = config.base_hyper(&field);
        base.validate()?;
        let hypers = agent_hypers(config, &base, &mut rng);
        let seeds = config.preseed_stride.map(|s| preseed(&field, s));

        let mut agents = Vec::with_capacity(config.n_agents);
        for (id, (pos, hyper)) in positions.into_iter().zip(hypers).enumerate() {
            let gp = match &seeds {
                Some(samples) => SparseGP::new(hyper, greedy_select(samples, config.capacity, &hyper))?,
                None => SparseGP::prior(hyper)?,
            };
            agents.push(AgentState {
                id,
                pos,
                gp,
                buffer: SampleBuffer::default(),
                opt: OptimizerState::new(config.optimizer),
                hyper,
                rng: agent_rng(config.seed, id),
                last_report: None,
            });
        }
        let (metric_points, metric_truth) = metric_grid(&field, config.metric_stride());
        Ok(Self {
            quad: config.quadrature_spec(),
            config: config.clone(),
            field,
            noise_sigma,
            table: AgentTable::new(agents),
            metric_points,
            metric_truth,
            round: 0,
            consensus_skipped: 0,
        })
    }

    pub fn field(&self) -> &DensityField {
        &self.field
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// Mutable access to the agent table, for harness tests.
    pub fn table_mut(&mut self) -> &mut AgentTable {
        &mut self.table
    }

    fn positions(&mut self, who: Accessor) -> Vec<Point> {
        (0..self.table.len()).map(|i| self.table.read(who, i, Field::Position).pos).collect()
    }

    fn rmse(&mut self) -> f64 {
        let n = self.table.len();
        let mut total = 0.0;
        for i in 0..n {
            let gp = &self.table.read(Accessor::Observer, i, Field::Gp).gp;
            let sq: f64 = self
                .metric_points
                .iter()
                .zip(&self.metric_truth)
                .map(|(q, truth)| (gp.mean_at(q) - truth).powi(2))
                .sum();
            total += (sq / self.metric_points.len() as f64).sqrt();
        }
        total / n as f64
    }

    /// Runs one round and returns its trace row.
    pub fn step(&mut self) -> Result<TraceRecord, SimError> {
        let t = self.round;
        let n = self.table.len();
        let domain = self.config.domain;
        self.table.set_round(t);

        // Partition and Laplacian.
        let positions = self.positions(Accessor::Geometry);
        let partition = compute_partition(&positions, &domain)?;
        let true_cost = true_locational_cost(&positions, &partition, &self.field);
        let refresh = t.is_multiple_of(self.config.refresh_period);
        let mut bus = Bus::new(t, refresh, &partition.neighbors);

        // Hyperparameter consensus.
        let gain_ok = self.config.consensus.check_gain(partition.laplacian.max_degree()).is_ok();
        for i in 0..n {
            let h = self.table.read(Accessor::Agent(i), i, Field::Hyper).hyper;
            for &j in &partition.neighbors[i] {
                bus.send(self.table.log_mut(), i, j, Payload::Hyper(h));
            }
        }
        if !gain_ok {
            self.consensus_skipped += 1;
        }
        for i in 0..n {
            let received: Vec<Hyperparams> = bus
                .take_inbox(i)
                .into_iter()
                .filter_map(|(_, p)| match p {
                    Payload::Hyper(h) => Some(h),
                    Payload::Inducing(_) => None,
                })
                .collect();
            if gain_ok {
                let cfg = self.config.consensus;
                self.table.write(Accessor::Agent(i), i, Field::Hyper).apply_consensus(&received, &cfg)?;
            }
        }

        // Measurement.
        let mut buffer_after_sampling = Vec::with_capacity(n);
        for i in 0..n {
            let agent = self.table.write(Accessor::Agent(i), i, Field::Buffer);
            agent.measure(&self.field, self.noise_sigma)?;
            buffer_after_sampling.push(agent.buffer.len());
        }

        // Inducing exchange and refresh.
        let mut refresh_seconds = 0.0;
        if refresh {
            for i in 0..n {
                let z = self.table.read(Accessor::Agent(i), i, Field::Gp).gp.inducing().to_vec();
                for &j in &partition.neighbors[i] {
                    bus.send(self.table.log_mut(), i, j, Payload::Inducing(z.clone()));
                }
            }
            for i in 0..n {
                let sets: Vec<Vec<Sample>> = bus
                    .take_inbox(i)
                    .into_iter()
                    .filter_map(|(_, p)| match p {
                        Payload::Inducing(z) => Some(z),
                        Payload::Hyper(_) => None,
                    })
                    .collect();
                let views: Vec<&[Sample]> = sets.iter().map(Vec::as_slice).collect();
                let started = Instant::now();
                self.table.write(Accessor::Agent(i), i, Field::All).refresh(
                    &views,
                    self.config.capacity,
                    self.config.refit_steps,
                )?;
                refresh_seconds += started.elapsed().as_secs_f64();
            }
        }

        // Motion.
        for i in 0..n {
            let cell = partition.cell(i);
            self.table.write(Accessor::Agent(i), i, Field::All).control(&cell, &self.quad, &domain)?;
        }

        let rmse = self.rmse();
        let mut record = TraceRecord {
            step: t,
            true_cost,
            rmse,
            messages: bus.sent(),
            positions,
            inducing_counts: Vec::with_capacity(n),
            buffer_after_sampling,
            buffer_after_round: Vec::with_capacity(n),
            sigma: Vec::with_capacity(n),
            phases: Vec::with_capacity(n),
            refresh_seconds,
        };
        for i in 0..n {
            let a = self.table.read(Accessor::Observer, i, Field::All);
            record.inducing_counts.push(a.gp.len());
            record.buffer_after_round.push(a.buffer.len());
            record.sigma.push(a.last_report.map_or(0.0, |r| r.std));
            record.phases.push(a.opt.phase);
        }
        self.round += 1;
        Ok(record)
    }

    /// Consumes the simulation into a trace with the given rows.
    pub fn finish(mut self, records: Vec<TraceRecord>) -> Result<SimTrace, SimError> {
        let final_positions = self.positions(Accessor::Observer);
        let partition = compute_partition(&final_positions, &self.config.domain)?;
        let final_cost = true_locational_cost(&final_positions, &partition, &self.field);
        let final_hypers =
            (0..self.table.len()).map(|i| self.table.read(Accessor::Observer, i, Field::Hyper).hyper).collect();
        let n_agents = self.table.len();
        let (_, audit) = self.table.into_parts();
        Ok(SimTrace {
            n_agents,
            records,
            final_positions,
            final_cost,
            final_hypers,
            audit,
            consensus_skipped: self.consensus_skipped,
        })
    }
}

/// Runs the proposed method for `config.rounds` rounds.
pub fn run(config: &SimConfig) -> Result<SimTrace, SimError> {
    let mut sim = Simulation::new(config)?;
    let mut records = Vec::with_capacity(config.rounds);
    for _ in 0..config.rounds {
        records.push(sim.step()?);
    }
    sim.finish(records)
}

fn lloyd_move(
    partition: &VoronoiPartition,
    field: &DensityField,
    i: usize,
    p: &Point,
    gamma: f64,
    v_max: f64,
) -> Point {
    let cell = partition.cell(i);
    if cell.is_empty() {
        return *p;
    }
    let values: Vec<f64> = cell.pixels.iter().map(|&idx| field.values[idx]).collect();
    let (_, centroid) = mass_centroid(&cell, &values);
    let mut disp = (centroid - p) * gamma;
    let len = disp.norm();
    if len > v_max {
        disp *= v_max / len;
    }
    partition.domain.clamp(&(p + disp))
}

/// Ground-truth Lloyd iteration from the same initial positions as [`run`]:
/// `p ← Π[p + γ (C − p)]` with the displacement capped at `v_max`.
pub fn run_lloyd_baseline(config: &SimConfig) -> Result<SimTrace, SimError> {
    config.validate()?;
    let field = build_scenario(&config.scenario, &config.domain)?;
    let mut rng = setup_rng(config.seed);
    let mut positions = initial_positions(config, &mut rng);
    let domain: Domain = config.domain;
    let mut records = Vec::with_capacity(config.rounds);
    for t in 0..config.rounds {
        let partition = compute_partition(&positions, &domain)?;
        let true_cost = true_locational_cost(&positions, &partition, &field);
        let next: Vec<Point> = positions
            .iter()
            .enumerate()
            .map(|(i, p)| lloyd_move(&partition, &field, i, p, config.lloyd_gamma, config.optimizer.v_max))
            .collect();
        records.push(TraceRecord {
            step: t,
            true_cost,
            rmse: 0.0,
            messages: 0,
            positions: std::mem::replace(&mut positions, next),
            inducing_counts: vec![0; config.n_agents],
            buffer_after_sampling: vec![0; config.n_agents],
            buffer_after_round: vec![0; config.n_agents],
            sigma: vec![0.0; config.n_agents],
            phases: Vec::new(),
            refresh_seconds: 0.0,
        });
    }
    let partition = compute_partition(&positions, &domain)?;
    let final_cost = true_locational_cost(&positions, &partition, &field);
    Ok(SimTrace {
        n_agents: config.n_agents,
        records,
        final_positions: positions,
        final_cost,
        final_hypers: Vec::new(),
        audit: AuditLog::default(),
        consensus_skipped: 0,
    })
}
