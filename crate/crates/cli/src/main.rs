//! `fractal-riesz`: batch driver for simulation, energies, minimization,
//! dimension estimates, constants and composition checks.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use fractal_riesz::Error;

/// Exit status for malformed input or configuration.
const EXIT_INPUT: u8 = 1;
/// Exit status for constraint and feasibility failures.
const EXIT_CONSTRAINT: u8 = 2;
/// Exit status for an unknown or missing subcommand.
const EXIT_USAGE: u8 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Seed overriding the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel kernels.
    #[arg(long, global = true, env = "FRACTAL_RIESZ_WORKERS")]
    pub workers: Option<usize>,
    /// Format of tabular artifacts.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Parser)]
#[command(name = "fractal-riesz", version, about = "Riesz energies, fractional Brownian witnesses and Hölder-constrained minimization")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Hurst index.
    #[arg(long = "H")]
    pub hurst: Option<f64>,
    /// Parameter dimension.
    #[arg(long)]
    pub k: Option<usize>,
    /// Target dimension.
    #[arg(long)]
    pub n: Option<usize>,
    /// Grid points per axis.
    #[arg(long)]
    pub m: Option<usize>,
    /// Number of paths.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Turn each path into a bridge pinned at both ends.
    #[arg(long)]
    pub bridge: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample fractional Brownian fields or bridges.
    Simulate(SimulateArgs),
    /// Self and mutual Riesz energies of an occupation measure.
    Energy,
    /// Riesz or Bessel potentials at evaluation points.
    Potential,
    /// Hölder-constrained energy minimization.
    Minimize,
    /// Box-counting dimension of a field image or point cloud.
    Dimension,
    /// Oscillation moduli of a curve.
    Moduli,
    /// Table of explicit constants over a parameter grid.
    Constants {
        /// Parameter grid (JSON); alternative to --config.
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Check the BV composition estimate on grid functions and curves.
    ComposeVerify,
    /// Build an explicit witness curve or a feasible Gaussian initializer.
    Witness,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                ErrorKind::InvalidSubcommand
                | ErrorKind::MissingSubcommand
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = e.print();
                    ExitCode::from(EXIT_USAGE)
                }
                _ => {
                    let _ = e.print();
                    ExitCode::from(EXIT_INPUT)
                }
            };
        }
    };
    if let Some(w) = cli.common.workers {
        if w == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(EXIT_INPUT);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    }
    let c = &cli.common;
    let result = match &cli.command {
        Command::Simulate(args) => commands::simulate(c, args),
        Command::Energy => commands::energy(c),
        Command::Potential => commands::potential(c),
        Command::Minimize => commands::minimize(c),
        Command::Dimension => commands::dimension(c),
        Command::Moduli => commands::moduli(c),
        Command::Constants { grid } => commands::constants(c, grid.as_deref()),
        Command::ComposeVerify => commands::compose_verify(c),
        Command::Witness => commands::witness(c),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_constraint_error() {
        EXIT_CONSTRAINT
    } else {
        EXIT_INPUT
    }
}
