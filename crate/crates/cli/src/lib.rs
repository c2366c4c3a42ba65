//! Library surface of the `preint` command-line tool.
//!
//! The binary in `main.rs` is a thin wrapper; the subcommand implementations
//! live here so integration tests can drive them directly.

pub mod commands;
pub mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

use preint_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "preint",
    version,
    about = "Preintegrated IMU motion features: simulation, extraction, evaluation"
)]
pub struct Cli {
    /// TOML config file; command-line flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthesize a trajectory and its (optionally noisy) IMU stream
    Simulate(commands::SimulateArgs),
    /// Slide a window over an IMU stream and export PI features with labels
    Extract(commands::ExtractArgs),
    /// Score a predicted trajectory against ground truth
    Evaluate(commands::EvaluateArgs),
    /// Sweep preintegration discrepancies against the brute-force oracle
    Compare(commands::CompareArgs),
    /// Cumulative distribution of the gravity-free acceleration magnitude
    Cdf(commands::CdfArgs),
}

/// Runs a parsed invocation. I/O failures map to exit code 3, everything
/// else (validation, parsing of data files) to exit code 2.
pub fn run(cli: &Cli) -> Result<()> {
    let file = config::FileConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Simulate(args) => commands::cmd_simulate(args, &file),
        Command::Extract(args) => commands::cmd_extract(args, &file),
        Command::Evaluate(args) => commands::cmd_evaluate(args, &file),
        Command::Compare(args) => commands::cmd_compare(args, &file),
        Command::Cdf(args) => commands::cmd_cdf(args, &file),
    }
}

/// Exit code for an error per the command contract.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => 3,
        _ => 2,
    }
}
