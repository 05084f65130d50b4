//! `quasilin` command line driver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod scenario;

/// Exit status classes: 1 configuration, 2 solver failure, 3 failed checks.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("checks failed: {0}")]
    Checks(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Checks(_) => 3,
        }
    }
}

impl From<quasilin_core::Error> for CliError {
    fn from(e: quasilin_core::Error) -> Self {
        use quasilin_core::Error as E;
        match e {
            E::NonConvergence { .. } | E::LinearNonConvergence { .. } | E::Evolution { .. } | E::Evaluation { .. } | E::UndefinedRatio(_) => {
                CliError::Solver(e.to_string())
            }
            E::Io(e) => CliError::Io(e),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "quasilin", version, about = "Quasilinear elliptic and parabolic solver with Robin and Wentzell boundary conditions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration file (`[section]` headers with `key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created when missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for the parallel parts (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized checks and studies; overrides `[run] seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Solve the stationary problem.
    SolveElliptic,
    /// Run implicit Euler time stepping.
    SolveParabolic,
    /// Sample the structure and monotonicity conditions of the coefficients.
    CheckCoefficients,
    /// Refinement, Crandall-Liggett or semigroup studies.
    Study,
    /// Write the configured mesh as VTK and plain text.
    ExportMesh,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::SolveElliptic => "solve-elliptic",
            Command::SolveParabolic => "solve-parabolic",
            Command::CheckCoefficients => "check-coefficients",
            Command::Study => "study",
            Command::ExportMesh => "export-mesh",
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let cfg = config::Config::load(path)?;
    let seed = match cli.seed {
        Some(s) => s,
        None => cfg.u64("run", "seed")?.unwrap_or(0),
    };
    let ctx = commands::Context { cfg, out: cli.out.clone(), seed, threads: cli.threads, command: cli.command.name() };
    match cli.command {
        Command::SolveElliptic => commands::solve_elliptic(&ctx),
        Command::SolveParabolic => commands::solve_parabolic(&ctx),
        Command::CheckCoefficients => commands::check_coefficients(&ctx),
        Command::Study => commands::study(&ctx),
        Command::ExportMesh => commands::export_mesh(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("quasilin {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
