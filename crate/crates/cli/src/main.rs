//! `bivirus` — batch experiments on the competing-virus SIS model.
//!
//! Every subcommand reads one JSON experiment configuration and writes
//! deterministic report files (given the same config and seed) into the
//! output directory. Log verbosity is controlled by the `BIVIRUS_LOG`
//! environment variable (error, info, debug).

mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "bivirus",
    version,
    about = "Competing-virus SIS dynamics: regime classification, simulation, equilibria, \
             sensitivity, feedback experiments, and property verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the epidemic regime from the spectral thresholds.
    Classify(CommonArgs),
    /// Integrate the bi-virus dynamics from each initial state.
    Simulate(CommonArgs),
    /// Enumerate equilibria with stability verdicts (and the
    /// coexistence line where it exists).
    Equilibrium(CommonArgs),
    /// First-order sensitivity of the epidemic state to rate changes.
    Sensitivity(CommonArgs),
    /// Proportional-feedback repeller experiment and closed-loop runs.
    Control(CommonArgs),
    /// Run the full property suite and report pass/fail per property.
    Verify(CommonArgs),
}

type Runner = fn(&config::Experiment, &std::path::Path) -> Result<(), CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (args, runner): (&CommonArgs, Runner) = match &cli.command {
        Command::Classify(a) => (a, commands::cmd_classify),
        Command::Simulate(a) => (a, commands::cmd_simulate),
        Command::Equilibrium(a) => (a, commands::cmd_equilibrium),
        Command::Sensitivity(a) => (a, commands::cmd_sensitivity),
        Command::Control(a) => (a, commands::cmd_control),
        Command::Verify(a) => (a, commands::cmd_verify),
    };
    let experiment = config::load_experiment(&args.config)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| experiment.output_dir.clone());
    runner(&experiment, &out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BIVIRUS_LOG", "info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
