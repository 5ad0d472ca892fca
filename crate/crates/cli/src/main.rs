use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use osbsim::model::RateConvention;
use osbsim::runner::{self, ExperimentConfig, ExperimentKind};

/// Trotterized open-system spin-boson simulations on an emulated noisy device.
#[derive(Parser)]
#[command(name = "osbsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Averaged and final infidelity over a Δt grid.
    TrotterSweep(Flags),
    /// Averaged and final infidelity over noise factors.
    NoiseSweep(Flags),
    /// Infidelity at every time step.
    InfidelityVsTime(Flags),
    /// Averaged and final infidelity over dissipation rates.
    GammaSweep(Flags),
    /// Oscillator occupation and spin polarization over time.
    Observables(Flags),
    /// Connected spin-spin correlations of the two-spin model.
    Correlations(Flags),
    /// Native gate counts of one transpiled time step.
    GateCounts(Flags),
}

#[derive(Args)]
struct Flags {
    /// JSON config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    xi: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    dt: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    order: Option<Vec<u8>>,
    #[arg(long, value_delimiter = ',')]
    gamma: Option<Vec<f64>>,
    /// paper-collision or eq2-literal.
    #[arg(long)]
    convention: Option<RateConvention>,
    /// Sample this many shots per snapshot; bare `--shots` means 8192.
    #[arg(long, num_args = 0..=1, default_missing_value = "8192")]
    shots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; the manifest is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Device calibration JSON (defaults to the bundled averages).
    #[arg(long)]
    calibration: Option<PathBuf>,
}

impl Command {
    fn split(self) -> (ExperimentKind, Flags) {
        match self {
            Command::TrotterSweep(f) => (ExperimentKind::TrotterSweep, f),
            Command::NoiseSweep(f) => (ExperimentKind::NoiseSweep, f),
            Command::InfidelityVsTime(f) => (ExperimentKind::InfidelityVsTime, f),
            Command::GammaSweep(f) => (ExperimentKind::GammaSweep, f),
            Command::Observables(f) => (ExperimentKind::Observables, f),
            Command::Correlations(f) => (ExperimentKind::Correlations, f),
            Command::GateCounts(f) => (ExperimentKind::GateCounts, f),
        }
    }
}

fn config(kind: ExperimentKind, f: Flags) -> Result<ExperimentConfig> {
    let mut cfg = match &f.config {
        Some(p) => ExperimentConfig::load(p, Some(kind)).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::new(kind),
    };
    if let Some(v) = f.xi {
        cfg.xi = v;
    }
    if let Some(v) = f.dt {
        cfg.dt = v;
    }
    if let Some(v) = f.order {
        cfg.orders = v;
    }
    if let Some(v) = f.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = f.convention {
        cfg.convention = v;
    }
    if f.shots.is_some() {
        cfg.shots = f.shots;
    }
    if let Some(v) = f.seed {
        cfg.seed = v;
    }
    if let Some(v) = f.out {
        cfg.output = v;
    }
    if f.calibration.is_some() {
        cfg.calibration = f.calibration;
    }
    Ok(cfg)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (kind, flags) = Cli::parse().command.split();
    let cfg = config(kind, flags)?;
    let out = runner::run(&cfg)?;
    println!("{} rows -> {}", out.table.rows.len(), out.csv.display());
    println!("manifest -> {}", out.manifest.display());
    Ok(())
}
