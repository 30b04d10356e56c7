// negated comparisons reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{Overrides, RunConfig};

/// Bicomplex variational solver for PT-symmetric double-well condensates.
///
/// Exit codes: 0 success, 1 configuration error, 2 numerical failure,
/// 3 partial results.
#[derive(Parser, Debug)]
#[command(name = "bicusp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for stationary states at one (Na, γ).
    State(Common),
    /// Trace branches over Na, detect folds, optionally bicomplex branches.
    Spectrum(Common),
    /// Fold curves over a γ grid and the cusp estimate.
    PhaseDiagram(Common),
    /// Roots of the cusp normal form over a (ρ, σ) grid.
    NormalForm(Common),
    /// Integrate the equations of motion from a state file.
    Propagate(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    na: Option<f64>,
    /// One value or a comma-separated list.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    gamma: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    bicomplex: bool,
    #[arg(long, allow_negative_numbers = true)]
    tol: Option<f64>,
    /// Worker threads for γ fan-out.
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            na: self.na,
            gamma: self.gamma.clone(),
            out: self.out.clone(),
            bicomplex: self.bicomplex,
            tol: self.tol,
            jobs: self.jobs,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error(transparent)]
    Core(#[from] bicusp::Error),
}

/// How a command finished when it did not fail outright.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Complete,
    Partial,
}

type Runner = fn(&RunConfig) -> Result<Status, CliError>;

fn exit_code(result: &Result<Status, CliError>) -> u8 {
    use bicusp::Error as E;
    match result {
        Ok(Status::Complete) => 0,
        Ok(Status::Partial) => 3,
        Err(CliError::Config(_)) => 1,
        Err(CliError::Core(E::InvalidInput(_) | E::Io(_) | E::Json(_))) => 1,
        Err(CliError::Numerical(_) | CliError::Core(_)) => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BICUSP_LOG", "error")).init();
    // usage errors are configuration errors
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (common, run): (&Common, Runner) = match &cli.command {
        Command::State(c) => (c, commands::state),
        Command::Spectrum(c) => (c, commands::spectrum),
        Command::PhaseDiagram(c) => (c, commands::phase_diagram),
        Command::NormalForm(c) => (c, commands::normal_form),
        Command::Propagate(c) => (c, commands::propagate),
    };
    let result = RunConfig::load(common.config.as_deref(), &common.overrides())
        .and_then(|cfg| bicusp::parallel::with_jobs(cfg.jobs, || run(&cfg)));
    match &result {
        Ok(Status::Partial) => eprintln!("bicusp: finished with partial results"),
        Err(e) => eprintln!("bicusp: {e}"),
        Ok(Status::Complete) => {}
    }
    ExitCode::from(exit_code(&result))
}
