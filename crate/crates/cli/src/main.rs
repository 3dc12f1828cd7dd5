use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gpcov::batch::{expand_seeds, load_config_dir, run_batch};
use gpcov::scenario::build_scenario;
use gpcov::{run, run_lloyd_baseline, Domain, Scenario, SimConfig, SimTrace};

#[derive(Parser)]
#[command(name = "gpcov", version, about = "Decentralized coverage control with sparse GP-UCB exploration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write its trace CSV.
    Run {
        #[command(flatten)]
        overrides: Overrides,
        /// Trace CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every `*.toml` config in a directory.
    Batch {
        dir: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated seeds; each config runs once per seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Output directory for traces and summary.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a scenario's density grid as CSV, one line per pixel row.
    ScenarioDump {
        #[arg(long, default_value = "four-gaussians")]
        scenario: String,
        #[arg(long, default_value_t = 960)]
        width: usize,
        #[arg(long, default_value_t = 540)]
        height: usize,
        /// Take scenario and domain from a config file instead.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Overrides {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    scenario: Option<String>,
    /// Also run the ground-truth Lloyd baseline.
    #[arg(long)]
    baseline: bool,
}

impl Overrides {
    fn apply(&self, mut cfg: SimConfig) -> Result<SimConfig> {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(rounds) = self.rounds {
            cfg.rounds = rounds;
        }
        if let Some(agents) = self.agents {
            cfg.n_agents = agents;
        }
        if let Some(beta) = self.beta {
            cfg.beta = beta;
        }
        if let Some(name) = &self.scenario {
            cfg.scenario = name.parse()?;
        }
        cfg.baseline |= self.baseline;
        cfg.validate()?;
        Ok(cfg)
    }

    fn load(&self) -> Result<SimConfig> {
        let base = match &self.config {
            Some(path) => SimConfig::from_file(path)?,
            None => SimConfig::default(),
        };
        self.apply(base)
    }
}

fn write_trace(trace: &SimTrace, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            trace.write_csv(io::BufWriter::new(file)).with_context(|| format!("writing {}", path.display()))?;
        }
        None => trace.write_csv(io::stdout().lock()).context("writing trace to stdout")?,
    }
    Ok(())
}

fn lloyd_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    out.with_file_name(format!("{stem}_lloyd.csv"))
}

fn cmd_run(overrides: &Overrides, out: Option<&Path>) -> Result<()> {
    let cfg = overrides.load()?;
    let trace = run(&cfg)?;
    write_trace(&trace, out)?;
    eprintln!("proposed: final cost {}", trace.final_cost);
    if cfg.baseline {
        let Some(out) = out else { bail!("--baseline needs --out to place the second trace") };
        let lloyd = run_lloyd_baseline(&cfg)?;
        write_trace(&lloyd, Some(&lloyd_path(out)))?;
        eprintln!("lloyd: final cost {}", lloyd.final_cost);
    }
    Ok(())
}

fn cmd_batch(dir: &Path, overrides: &Overrides, seeds: &[u64], out: &Path) -> Result<()> {
    if overrides.config.is_some() {
        bail!("batch reads its configs from the directory; --config is not accepted");
    }
    let configs = load_config_dir(dir)?.into_iter().map(|c| overrides.apply(c)).collect::<Result<Vec<_>>>()?;
    let configs = if seeds.is_empty() { configs } else { expand_seeds(&configs, seeds) };
    let rows = run_batch(&configs, out)?;
    eprintln!("{} runs written to {}", rows.len(), out.display());
    Ok(())
}

fn cmd_dump(scenario: &str, width: usize, height: usize, config: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let (scenario, domain) = match config {
        Some(path) => {
            let cfg = SimConfig::from_file(path)?;
            (cfg.scenario, cfg.domain)
        }
        None => (scenario.parse::<Scenario>()?, Domain::new(width, height)?),
    };
    let field = build_scenario(&scenario, &domain)?;
    match out {
        Some(path) => {
            let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = io::BufWriter::new(file);
            field.write_csv(&mut w)?;
            w.flush()?;
        }
        None => field.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { overrides, out } => cmd_run(overrides, out.as_deref()),
        Command::Batch { dir, overrides, seeds, out } => cmd_batch(dir, overrides, seeds, out),
        Command::ScenarioDump { scenario, width, height, config, out } => {
            cmd_dump(scenario, *width, *height, config.as_deref(), out.as_deref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
