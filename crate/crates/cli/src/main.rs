//! `sqkd`: command-line front end of the spatial QKD simulator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::commands::Command;
use crate::config::{parse_sweep, Mode, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("output error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<spatial_qkd::Error> for CliError {
    fn from(e: spatial_qkd::Error) -> Self {
        match e {
            spatial_qkd::Error::InvalidParameter { .. } => CliError::Config(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "sqkd",
    version,
    about = "Spatial-entanglement QKD simulator and security analyzer"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// TOML configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Monte Carlo seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo pump pulses.
    #[arg(long, global = true)]
    pulses: Option<u64>,
    /// Pixels per party per basis.
    #[arg(long, global = true)]
    pixels: Option<usize>,
    /// Grid resolution: phase-matching table samples in 1d mode, samples
    /// per Gaussian width in 2d mode.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// `VAR=lo:hi:steps` or `VAR=v1,v2,...`; repeatable, replaces the
    /// configured sweeps.
    #[arg(long, global = true)]
    sweep: Vec<String>,
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    /// Record the elapsed time in the outputs.
    #[arg(long, global = true)]
    wall_time: bool,
    /// Event log path for `simulate` (`.gz` compresses).
    #[arg(long, global = true)]
    events: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Mutual information of the source per basis (sweep waist_mm, length_mm).
    SourceInfo,
    /// EPR witness scan over throughput and its threshold.
    Witness,
    /// Intercept-resend security curve over loss.
    Keyrate,
    /// Event-level Monte Carlo against the analytic model.
    Simulate,
    /// Schmidt spectrum, entropy, purity and concurrence.
    Schmidt,
    /// Log-negativity of the attacked state against λ.
    Negativity,
}

fn resolve(cli: &Cli) -> Result<(Command, RunConfig, Vec<config::Sweep>), CliError> {
    let command = match cli.command {
        Sub::SourceInfo => Command::SourceInfo,
        Sub::Witness => Command::Witness,
        Sub::Keyrate => Command::Keyrate,
        Sub::Simulate => Command::Simulate,
        Sub::Schmidt => Command::Schmidt,
        Sub::Negativity => Command::Negativity,
    };
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        config.output.dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.simulation.seed = seed;
    }
    if let Some(pulses) = cli.pulses {
        config.simulation.pulses = pulses;
    }
    if let Some(pixels) = cli.pixels {
        config.detector.pixels = pixels;
    }
    if let Some(mode) = cli.mode {
        config.mode = mode;
    }
    if let Some(grid) = cli.grid {
        match config.mode {
            Mode::OneD => config.numerics.factor_count = grid,
            Mode::TwoD => config.numerics.transverse_resolution = grid,
        }
    }
    if cli.wall_time {
        config.output.wall_time = true;
    }
    if let Some(events) = &cli.events {
        config.simulation.event_log = Some(events.clone());
    }
    if !cli.sweep.is_empty() {
        config.sweep = cli.sweep.clone();
    }
    if command == Command::Simulate && config.simulation.pulses == 0 {
        return Err(CliError::Config("pulses must be >= 1".into()));
    }
    let sweeps = config
        .sweep
        .iter()
        .map(|s| parse_sweep(s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((command, config, sweeps))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let start = Instant::now();
    let (command, config, sweeps) = resolve(cli)?;
    report::ensure_dir(&config.output.dir)?;
    let report = commands::run(command, &config, &sweeps)?;
    let wall = config.output.wall_time.then(|| start.elapsed().as_secs_f64());
    for path in report.write(&config, wall)? {
        println!("wrote {}", path.display());
    }
    println!("{}", serde_json::to_string_pretty(&report.summary).unwrap_or_default());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sqkd: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
