//! Batches of runs: one trace CSV per run plus a summary CSV.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, SimConfig};
use crate::sim::{run, run_lloyd_baseline, SimError, SimTrace};

pub const CHECKPOINTS: [usize; 4] = [50, 100, 250, 500];
pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {source}")]
    Config { path: String, source: ConfigError },
    #[error("run {index} ({scenario}, {n_agents} agents, seed {seed}): {source}")]
    Run { index: usize, scenario: String, n_agents: usize, seed: u64, source: Box<SimError> },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BatchError + '_ {
    move |source| BatchError::Io { path: path.display().to_string(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> BatchError + '_ {
    move |source| BatchError::Csv { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub n_agents: usize,
    pub seed: u64,
    pub method: String,
    pub beta: f64,
    pub rounds: usize,
    pub final_cost: f64,
    pub cost_50: Option<f64>,
    pub cost_100: Option<f64>,
    pub cost_250: Option<f64>,
    pub cost_500: Option<f64>,
    pub messages: usize,
    pub wall_seconds: f64,
    pub trace_file: String,
}

impl SummaryRow {
    fn new(config: &SimConfig, method: &str, trace: &SimTrace, wall_seconds: f64, trace_file: String) -> Self {
        let [c50, c100, c250, c500] = CHECKPOINTS.map(|c| trace.cost_after(c));
        Self {
            scenario: config.scenario.name().to_string(),
            n_agents: config.n_agents,
            seed: config.seed,
            method: method.to_string(),
            beta: config.beta,
            rounds: config.rounds,
            final_cost: trace.final_cost,
            cost_50: c50,
            cost_100: c100,
            cost_250: c250,
            cost_500: c500,
            messages: trace.total_messages(),
            wall_seconds,
            trace_file,
        }
    }
}

/// Every config once per seed, seeds in the order given.
pub fn expand_seeds(configs: &[SimConfig], seeds: &[u64]) -> Vec<SimConfig> {
    configs.iter().flat_map(|c| seeds.iter().map(move |&seed| SimConfig { seed, ..c.clone() })).collect()
}

/// All `*.toml` files of a directory, by file name.
pub fn load_config_dir(dir: &Path) -> Result<Vec<SimConfig>, BatchError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| SimConfig::from_file(p).map_err(|source| BatchError::Config { path: p.display().to_string(), source }))
        .collect()
}

fn write_trace(trace: &SimTrace, path: &Path) -> Result<(), BatchError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    trace.write_csv(std::io::BufWriter::new(file)).map_err(csv_err(path))
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let started = Instant::now();
    let out = f();
    (out, started.elapsed().as_secs_f64())
}

/// Runs every config (and its Lloyd baseline when requested), writes the
/// traces and `summary.csv` into `out_dir`, and returns the summary rows.
///
/// Rows are ordered by scenario, agent count, then seed; ties keep input order.
pub fn run_batch(configs: &[SimConfig], out_dir: &Path) -> Result<Vec<SummaryRow>, BatchError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut order: Vec<usize> = (0..configs.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&configs[a], &configs[b]);
        (x.scenario.name(), x.n_agents, x.seed).cmp(&(y.scenario.name(), y.n_agents, y.seed))
    });

    let mut rows = Vec::new();
    for (index, &i) in order.iter().enumerate() {
        let config = &configs[i];
        let stem = format!("run{index:03}_{}_n{}_seed{}", config.scenario.name(), config.n_agents, config.seed);
        let fail = |source| BatchError::Run {
            index,
            scenario: config.scenario.name().to_string(),
            n_agents: config.n_agents,
            seed: config.seed,
            source: Box::new(source),
        };

        let (trace, wall) = timed(|| run(config));
        let trace = trace.map_err(fail)?;
        let name = format!("{stem}.csv");
        write_trace(&trace, &out_dir.join(&name))?;
        rows.push(SummaryRow::new(config, "proposed", &trace, wall, name));

        if config.baseline {
            let (trace, wall) = timed(|| run_lloyd_baseline(config));
            let trace = trace.map_err(fail)?;
            let name = format!("{stem}_lloyd.csv");
            write_trace(&trace, &out_dir.join(&name))?;
            rows.push(SummaryRow::new(config, "lloyd", &trace, wall, name));
        }
    }

    let path = out_dir.join(SUMMARY_FILE);
    let mut w =
        csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(&path).map_err(csv_err(&path))?;
    if rows.is_empty() {
        w.write_record([
            "scenario",
            "n_agents",
            "seed",
            "method",
            "beta",
            "rounds",
            "final_cost",
            "cost_50",
            "cost_100",
            "cost_250",
            "cost_500",
            "messages",
            "wall_seconds",
            "trace_file",
        ])
        .map_err(csv_err(&path))?;
    }
    for row in &rows {
        w.serialize(row).map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(rows)
}
