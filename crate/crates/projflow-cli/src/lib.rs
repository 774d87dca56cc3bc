//! Command-line front end for the `projflow` crate.
//!
//! Three subcommands cover the usual workflow:
//!
//! * `run` integrates a scenario, writes a trajectory table plus a summary,
//!   and verifies the invariants the scheme is supposed to keep.
//! * `analyze` predicts the equilibrium without integrating anything.
//! * `compare` integrates an ordered pair of states and checks that the
//!   cellwise ordering survives.
//!
//! Exit codes: 0 when every check passed, 1 when a named check failed,
//! 2 for usage or configuration errors.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Top-level argument grammar.
#[derive(Parser)]
#[command(name = "projflow", version, about = "Simulate and analyze mass-projected growth dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and check its invariants.
    Run(CommonArgs),
    /// Predict the equilibrium from the initial state alone.
    Analyze(CommonArgs),
    /// Integrate an ordered pair of states and check the ordering holds.
    Compare(CompareArgs),
}

/// Flags shared by every subcommand.
#[derive(Args)]
pub struct CommonArgs {
    /// Built-in scenario name (see `--builtin help` for the list).
    #[arg(long, value_name = "NAME")]
    builtin: Option<String>,

    /// TOML configuration file describing a custom scenario.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override the cell count.
    #[arg(long, value_name = "INT")]
    m: Option<usize>,

    /// Override the final time.
    #[arg(long = "T", value_name = "REAL")]
    t_final: Option<f64>,

    /// Override the step size.
    #[arg(long = "h", value_name = "REAL")]
    step: Option<f64>,

    /// Override the recording stride (record every Nth step).
    #[arg(long, value_name = "INT")]
    stride: Option<usize>,

    /// Override the integration scheme: log_rk4 or direct_rk4.
    #[arg(long, value_name = "NAME")]
    method: Option<String>,

    /// Directory for output artifacts.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Multiply every check tolerance by this factor.
    #[arg(long = "tol-scale", value_name = "REAL", default_value_t = 1.0)]
    tol_scale: f64,
}

#[derive(Args)]
pub struct CompareArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Take the lower state as `scale * y0` instead of the scenario's own z0.
    #[arg(long, value_name = "REAL")]
    scale: Option<f64>,
}

/// How a subcommand ends when it does not succeed.
pub enum Failure {
    /// Bad flags, unreadable or invalid configuration. Exit code 2.
    Usage(String),
    /// A named invariant check failed or the integrator hit a fatal
    /// numeric condition. Exit code 1.
    Check(String),
}

impl Failure {
    fn usage(err: impl core::fmt::Display) -> Self {
        Failure::Usage(err.to_string())
    }
}

/// Parse arguments, dispatch, and map the outcome to an exit code.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => commands::run(&args),
        Command::Analyze(args) => commands::analyze(&args),
        Command::Compare(args) => commands::compare(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
