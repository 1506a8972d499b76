//! `ehm`: seeded, config-driven experiment runner. Subcommands calibrate
//! the outage/density relation, sweep the maximum throughput over the
//! energy-arrival rate, sweep the transmission probability over power, and
//! compare the simulated battery tail to its analytic bound — each writing
//! one CSV with full metadata.
//!
//! Exit codes: 0 on success, 1 on an invalid invocation or config, 2 when a
//! prerequisite artifact (the calibration table) is missing or unusable.

// Validation deliberately writes `!(x > 0)` so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod csvout;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::ConfigFile;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Missing(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Missing(_) => 2,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "ehm",
    version,
    about = "Energy-harvesting network experiments: battery dynamics, outage calibration, throughput optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate the nominal node density against outage targets.
    CalibrateMu(RunArgs),
    /// Maximum throughput versus the energy-arrival rate.
    SweepEnergy(RunArgs),
    /// Transmission probability versus power under finite batteries.
    Txprob(RunArgs),
    /// Simulated battery-level tail against its analytic bound.
    TailBound(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; falls back to EHM_THREADS, then all cores.
    #[arg(long)]
    threads: Option<usize>,
}

fn resolve_threads(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var("EHM_THREADS") {
        Ok(value) => value
            .parse::<usize>()
            .map_err(|_| CliError::Invalid(format!("EHM_THREADS={value} is not a thread count"))),
        Err(_) => Ok(0), // rayon default
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let args = match &cli.command {
        Command::CalibrateMu(a)
        | Command::SweepEnergy(a)
        | Command::Txprob(a)
        | Command::TailBound(a) => a,
    };
    let threads = resolve_threads(args.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?;

    let file = ConfigFile::load(&args.config)?;
    let seed = file.resolve_seed(args.seed)?;
    let experiment = file.experiment.as_deref();
    let out = args.out.clone();

    pool.install(|| match &cli.command {
        Command::CalibrateMu(_) => {
            let section = file.calibrate_mu.clone().unwrap_or_default();
            commands::calibrate_mu(&section, experiment, seed, out)
        }
        Command::SweepEnergy(_) => {
            let section = file.sweep_energy.clone().unwrap_or_default();
            commands::sweep_energy(&section, experiment, seed, out)
        }
        Command::Txprob(_) => {
            let section = file.txprob.clone().unwrap_or_default();
            commands::txprob(&section, experiment, seed, out)
        }
        Command::TailBound(_) => {
            let section = file.tail_bound.clone().unwrap_or_default();
            commands::tail_bound_cmd(&section, experiment, seed, out)
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
