use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

/// Monte Carlo solvers for Wigner transport in linear electromagnetic fields.
#[derive(Debug, Parser)]
#[command(name = "gauge-wigner", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (0 = one per core). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,

    /// Output directory, overriding `output.dir` in the configuration.
    #[arg(long, global = true, env = "WIGNER_OUTPUT_DIR")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Forward signed-particle ensemble.
    RunForward,
    /// Backward estimator, one row per expansion order.
    RunBackward,
    /// Quadrature values of the expansion terms up to second order.
    Oracle,
    /// Time-sliced forward ensemble with grid restarts.
    Slice,
    /// The scattering stencil with its probabilities and rate.
    StencilDump,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(dir) => {
            eprintln!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
