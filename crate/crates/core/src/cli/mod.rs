//! Command-line front end: experiment, design and rate-table specs read from
//! JSON or TOML, and the `simulate`, `design` and `rates` subcommands.
//!
//! Exit statuses: 0 success, 1 output I/O failure, 2 configuration error,
//! 3 numeric failure, 4 infeasible weight-matrix design.

mod commands;
mod spec;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{
    cmd_design, cmd_rates, cmd_simulate, parse_grid, rates_table, run_experiment, DesignReport, ExperimentOutput,
    NodeSlope, Reference, SlopesReport, UniformBaseline,
};
pub use spec::{
    covariances, load_file, locate_key, CenterMode, CenterSpec, DesignSpec, Experiment, ExperimentSpec, ModelsSpec,
    NetworkSpec, ProcessSpec, RatesSpec, RegionSpec, WeightsSpec, DESIGN_TOL,
};

pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

/// A failed command and its exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self { code: EXIT_NUMERIC, message: message.into() }
    }

    pub fn infeasible(message: impl Into<String>) -> Self {
        Self { code: EXIT_INFEASIBLE, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self { code: EXIT_IO, message: message.into() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(name = "consensus-ldp", version, about = "Decay rates and design of consensus+innovations estimators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo error probabilities and per-node decay rates.
    Simulate {
        spec: PathBuf,
        /// Overrides the spec seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Optimal left Perron vector and a weight matrix realizing it.
    Design {
        problem: PathBuf,
        /// Overrides the seed used for generated topologies.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Tabulates I, I~ and N I on a grid.
    Rates {
        spec: PathBuf,
        /// `lo:hi:steps`, comma-separated per coordinate.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        /// Weights `a`, comma-separated (default: the spec's, else uniform).
        #[arg(long, value_delimiter = ',')]
        a: Option<Vec<f64>>,
        /// Numeric conjugates even where a closed form exists.
        #[arg(long)]
        numeric: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        /// Output CSV path.
        #[arg(long, default_value = "rates.csv")]
        out: PathBuf,
    },
}

/// Runs a parsed command.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { spec, seed, threads, out } => cmd_simulate(&spec, &out, seed, threads).map(|_| ()),
        // Design and rate tabulation are sequential; the flags exist for a
        // uniform interface.
        Command::Design { problem, seed, threads: _, out } => cmd_design(&problem, &out, seed).map(|_| ()),
        Command::Rates { spec, grid, a, numeric, seed: _, threads: _, out } => cmd_rates(&spec, &grid, &out, a, numeric),
    }
}

/// Parses `args` (including the program name), runs, and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
