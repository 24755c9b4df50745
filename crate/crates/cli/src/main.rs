use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vgala::experiment::{load_config, run_experiment, ExperimentConfig, ExperimentError, ExperimentKind};

const DEFAULTS: &str = "\
Defaults:
  kappa (weight exponent scale)          4
  theta (energy-latency coefficient)     0.8
  epsilon (load margin)                  1e-3
  sigma (Armijo constant)                0.3
  xi (backtracking factor)               0.5
  alpha* (uplink path-loss threshold)    140 dB

--config accepts either an experiment config (with a `scenario = ...` key)
or a scenario file, which is then run with default settings.";

#[derive(Parser)]
#[command(name = "vgala", version, about = "Green-energy and latency aware user association for two-tier cellular networks", after_help = DEFAULTS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    args: Args,
}

#[derive(clap::Args)]
struct Args {
    /// Experiment config or scenario file (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for random user draws
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    kappa: Option<f64>,
    /// Apply the same theta to every station
    #[arg(long, global = true)]
    theta: Option<f64>,
    /// Monte Carlo draws
    #[arg(long, global = true)]
    draws: Option<usize>,
    /// Locations per side of the area
    #[arg(long, global = true)]
    grid: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run vGALA once and write trace, coverage, energy and rate-map CSVs
    Run,
    /// Sweep the weight exponent scale kappa
    SweepKappa,
    /// Sweep a uniform energy-latency coefficient theta
    SweepTheta,
    /// Sweep the solar panel efficiency against LA
    SweepSolar,
    /// Compare vGALA, LA, GA and the three CRE variants
    CompareCre,
    /// Check vGALA against exhaustive enumeration on a small instance
    OracleCheck,
    /// Monte Carlo comparison with random users
    MonteCarlo,
}

impl Command {
    fn kind(self) -> ExperimentKind {
        match self {
            Self::Run => ExperimentKind::Run,
            Self::SweepKappa => ExperimentKind::SweepKappa,
            Self::SweepTheta => ExperimentKind::SweepTheta,
            Self::SweepSolar => ExperimentKind::SweepSolar,
            Self::CompareCre => ExperimentKind::CompareCre,
            Self::OracleCheck => ExperimentKind::OracleCheck,
            Self::MonteCarlo => ExperimentKind::MonteCarlo,
        }
    }
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, ExperimentError> {
    let path = cli.args.config.clone().ok_or_else(|| ExperimentError::Invalid {
        field: "--config".into(),
        constraint: "an experiment config or scenario file is required".into(),
    })?;
    let text = std::fs::read_to_string(&path).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let is_experiment = toml::from_str::<toml::Table>(&text)
        .map(|t| t.contains_key("scenario"))
        .unwrap_or(false);
    let mut c = if is_experiment {
        load_config(&path)?
    } else {
        let mut c = ExperimentConfig::new(&path);
        c.out_dir = PathBuf::from("out");
        c
    };
    c.kind = cli.command.kind();
    let a = &cli.args;
    if let Some(o) = &a.out {
        c.out_dir = o.clone();
    }
    if let Some(s) = a.seed {
        c.seed = s;
    }
    if let Some(k) = a.kappa {
        c.optimizer.kappa = k;
    }
    if a.theta.is_some() {
        c.theta = a.theta;
    }
    if let Some(d) = a.draws {
        c.draws = d;
    }
    if a.grid.is_some() {
        c.grid = a.grid;
    }
    c.validate()?;
    Ok(c)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = build_config(&cli).and_then(|c| run_experiment(&c));
    match result {
        Ok(summary) => {
            for line in &summary.lines {
                println!("{line}");
            }
            for f in &summary.files {
                println!("wrote {}", f.display());
            }
            if summary.passed == Some(false) {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
