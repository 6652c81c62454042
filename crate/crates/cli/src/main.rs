//! `ostrogradsky` command-line tool.
//!
//! Exit codes: 0 success, 1 verification or numerical failure, 2 usage
//! error, 3 divergence, 4 I/O failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Format, RunMode};

#[derive(Parser, Debug)]
#[command(name = "ostrogradsky", version, about = "Higher-derivative Hamiltonian mechanics toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Momenta, Hamiltonian and constraint chain at one point, as JSON.
    Derive(DeriveArgs),
    /// Integrate the canonical equations and write the trajectory.
    Integrate(IntegrateArgs),
    /// Run the self-check suite for a model.
    Verify(VerifyArgs),
    /// List built-in models and their parameters.
    ListModels {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// Built-in model name (see `list-models`).
    #[arg(long)]
    pub model: Option<String>,
    /// Model parameter, repeatable: `--param lambda=2`.
    #[arg(long, value_name = "KEY=VALUE")]
    pub param: Vec<String>,
    /// Flat `key = value` file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DeriveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Canonical state `Q1.., Q2.., P1.., P2..` (default: zero).
    #[arg(long, allow_hyphen_values = true, conflicts_with = "jet")]
    pub state: Option<String>,
    /// Jet `q̄.., q̄̇.., q̄̈.., q̄⃛..` instead of a canonical state.
    #[arg(long, allow_hyphen_values = true)]
    pub jet: Option<String>,
    /// Seed for the probe states used to detect chain closure.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 6)]
    pub max_level: usize,
}

#[derive(Args, Debug)]
pub struct IntegrateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<RunMode>,
    /// Project every N steps in projected mode.
    #[arg(long)]
    pub projection_every: Option<usize>,
    /// Trajectory file; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Seed for the random initial state used when none is given.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Initial canonical state `Q1.., Q2.., P1.., P2..`.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "modes")]
    pub initial: Option<String>,
    /// Oscillator only: initial state from the eight mode amplitudes c̄₁..c̄₈.
    #[arg(long, allow_hyphen_values = true)]
    pub modes: Option<String>,
    /// File with one initial state per line; runs them concurrently and
    /// writes `<output stem>_<index>.<ext>`.
    #[arg(long, conflicts_with_all = ["initial", "modes"])]
    pub batch: Option<PathBuf>,
    /// Integrate backwards in time.
    #[arg(long)]
    pub reverse: bool,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random points per sampled check.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long)]
    pub json: bool,
    /// Test hook: scale the potential gradient seen by the dynamics.
    #[arg(long, hide = true)]
    pub corrupt_potential_gradient: Option<f64>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(e: impl ToString) -> Self {
        Self { code: 2, message: e.to_string() }
    }

    pub fn io(e: impl ToString) -> Self {
        Self { code: 4, message: e.to_string() }
    }

    pub fn numeric(e: impl ToString) -> Self {
        Self { code: 1, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Derive(a) => commands::derive(&a),
        Command::Integrate(a) => commands::integrate(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::ListModels { json } => commands::list_models(json),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
