//! `hardy`: command-line front end for the Hardy quotient tools.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 a mathematical
//! check failed.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(hardy_core::HardyError),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "error: {e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<hardy_core::HardyError> for CliError {
    fn from(e: hardy_core::HardyError) -> Self {
        CliError::Core(e)
    }
}

/// Whether every mathematical check of a run held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Violation,
}

#[derive(Debug, Parser)]
#[command(
    name = "hardy",
    version,
    about = "Hardy constants under Robin and mixed boundary conditions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimise the quotient on one configuration; writes report.json and history.csv.
    Estimate(Common),
    /// Run the inequality fuzz suites; writes verify.json.
    Verify(Common),
    /// Discrete constant across sigma; writes sweep.csv and sweep.json.
    SweepSigma(Common),
    /// Radial exterior problems over a parameter grid; writes exterior.csv and exterior.json.
    Exterior(Common),
    /// Minimising sequence under refinement; writes concentrate.csv and concentrate.json.
    Concentrate(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Single-threaded run with sequential reductions.
    #[arg(long)]
    pub sequential: bool,
    /// Overrides the solver's relative tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Overrides the solver's iteration cap.
    #[arg(long)]
    pub max_iter: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Estimate(c) => run(c, commands::estimate),
        Command::Verify(c) => run(c, commands::verify),
        Command::SweepSigma(c) => run(c, commands::sweep_sigma),
        Command::Exterior(c) => run(c, commands::exterior),
        Command::Concentrate(c) => run(c, commands::concentrate),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Violation) => ExitCode::from(2),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}

fn run(common: &Common, f: fn(&Common) -> Result<Outcome, CliError>) -> Result<Outcome, CliError> {
    if common.sequential {
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    std::fs::create_dir_all(&common.out)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", common.out.display())))?;
    f(common)
}
