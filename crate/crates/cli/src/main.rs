//! `aniso`: solves, extremal computations, inequality checks, parameter
//! sweeps and norm property checks from flat `key = value` configs.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "aniso", version, about = "Weighted anisotropic p-Laplace solvers and best Sobolev constants")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Report destination (standard output when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for every random choice; overrides the `seed` key.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// `key=value` override applied after the config file (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Also write the final field (solve) or the extremal (extremal, verify)
    /// as `vertex_id,x,y,value` CSV.
    #[arg(long, global = true, value_name = "PATH")]
    field: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Run the monotone n-loop of a mixed or exponential problem.
    Solve,
    /// Compute the best constant both ways and the normalized extremal.
    Extremal,
    /// Check the Sobolev inequality for `constant`, or for 0.99 and 1.05 times the computed constant.
    Verify,
    /// Tabulate best constants over the `sweep_*` grid.
    Sweep,
    /// Run the sampled norm and flux property suite.
    CheckNorms,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Extremal => "extremal",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
            Command::CheckNorms => "check-norms",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

pub struct Options {
    pub command: Command,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: usize,
    pub format: Format,
    pub overrides: Vec<String>,
    pub field: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = Options {
        command: cli.command,
        config: cli.config,
        out: cli.out,
        seed: cli.seed,
        jobs: cli.jobs,
        format: cli.format,
        overrides: cli.overrides,
        field: cli.field,
    };
    let code = output::run(&opts);
    ExitCode::from(code as u8)
}
