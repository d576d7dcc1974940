//! `moc-rvq`: fit, reorder and inspect codebooks, and run transmission
//! experiments over a simulated 64-QAM AWGN link.
//!
//! Every command reads its parameters from flags, from the matching table of
//! a TOML file given with `--config`, or both; flags win.
//!
//! Exit codes: 0 on success, 1 on runtime failure (IO, decoding), 2 on an
//! invalid configuration or input.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigFile, FitArgs, InspectArgs, ReorderArgs, RunArgs, SweepArgs};

#[derive(Debug, Parser)]
#[command(
    name = "moc-rvq",
    version,
    about = "Multi-head octonary RVQ over a 64-QAM AWGN link"
)]
struct Cli {
    /// TOML file with one table per command ([fit], [run], ...); flags
    /// override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a multi-level codebook (and a patch basis for image corpora).
    Fit(FitArgs),
    /// Gray-reorder every codebook in a file.
    Reorder(ReorderArgs),
    /// Send one input over the link and report its metrics as CSV.
    Run(RunArgs),
    /// Sweep levels, SNRs and seeds over a set of inputs.
    Sweep(SweepArgs),
    /// Print codebook statistics.
    Inspect(InspectArgs),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] moc_rvq::Error),
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Fit(args) => commands::fit(args.overlay(file.fit.unwrap_or_default())),
        Command::Reorder(args) => commands::reorder(args.overlay(file.reorder.unwrap_or_default())),
        Command::Run(args) => commands::run(args.overlay(file.run.unwrap_or_default())),
        Command::Sweep(args) => commands::sweep(args.overlay(file.sweep.unwrap_or_default())),
        Command::Inspect(args) => commands::inspect(args.overlay(file.inspect.unwrap_or_default())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
