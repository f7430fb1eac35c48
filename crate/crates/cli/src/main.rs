//! `degkdv`: command-line driver for the degenerate KdV laboratory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use degkdv_core::Error;

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub const USAGE: u8 = 1;
    pub const DEGENERACY: u8 = 2;
    pub const ADMISSIBILITY: u8 = 3;

    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: Self::USAGE, message: message.into() }
    }

    pub fn admissibility(message: impl Into<String>) -> Self {
        Self { code: Self::ADMISSIBILITY, message: message.into() }
    }
}

fn is_degeneracy(e: &Error) -> bool {
    match e {
        Error::Degeneracy { .. } => true,
        Error::StepFailed { source, .. } => is_degeneracy(source),
        _ => false,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Admissibility(_) => Self::ADMISSIBILITY,
            e if is_degeneracy(e) => Self::DEGENERACY,
            _ => Self::USAGE,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::usage(format!("i/o error: {e}"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "degkdv", version, about = "Degenerate dispersive KdV: simulations and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve the flattened equation described by a JSON run config.
    Simulate {
        config: PathBuf,
        /// Run a single viscosity instead of the configured one(s).
        #[arg(long)]
        nu: Option<f64>,
        /// Output directory; overrides DEGKDV_OUT and the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Half-width and conserved quantities of the compacton Φ_{B,c}.
    Compacton {
        #[arg(allow_hyphen_values = true)]
        b: f64,
        c: f64,
        #[arg(allow_hyphen_values = true)]
        mu: i8,
        /// Quadrature points.
        #[arg(long, default_value_t = 4096)]
        n: usize,
    },
    /// Trace a bicharacteristic; prints `t, x, xi, symbol` as CSV.
    Rays {
        #[arg(allow_hyphen_values = true)]
        x0: f64,
        #[arg(allow_hyphen_values = true)]
        xi0: f64,
        t: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        /// Density `x^K` on `x > 0`.
        #[arg(long, conflicts_with = "profile", required_unless_present = "profile")]
        power: Option<f64>,
        /// Profile JSON (`{"shape": {...}, "mu": 1}`).
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Weighted Sobolev norm H^{N,K} of a field stored as `coordinate,value` CSV.
    Norms { field: PathBuf, n: u32, k: u32 },
    /// Linear-theory checks: semigroup, energy or mizohata.
    LinearCheck {
        suite: commands::Suite,
        /// Random coefficient draws per set in the energy suite.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        /// Directory for energy-ledger CSV files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Conservation and virial report for a simulation directory.
    Virial { dir: PathBuf },
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { config, nu, out } => simulate::cmd_simulate(&config, nu, out),
        Command::Compacton { b, c, mu, n } => commands::cmd_compacton(b, c, mu, n),
        Command::Rays { x0, xi0, t, dt, power, profile } => commands::cmd_rays(x0, xi0, t, dt, power, profile),
        Command::Norms { field, n, k } => commands::cmd_norms(&field, n, k),
        Command::LinearCheck { suite, seeds, out } => commands::cmd_linear_check(suite, seeds, out),
        Command::Virial { dir } => commands::cmd_virial(&dir),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(Failure::USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("degkdv: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
