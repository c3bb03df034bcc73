//! `bnls`: normalized ground states of the biharmonic NLS with a
//! critical term, and checks of the energy landscape around them.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::commands::{Emitter, FiberArgs, MassArg};
use crate::config::Config;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "bnls", version, about)]
struct Cli {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Inequality constants, exponents, M, c0 and rho0.
    Constants,
    /// Landscape tables with barrier sampling.
    Landscape,
    /// Minimize at one mass and save the field.
    Solve {
        /// Mass c.
        #[arg(long, conflicts_with = "c_frac", required_unless_present = "c_frac")]
        c: Option<f64>,
        /// Mass as a fraction of c0.
        #[arg(long)]
        c_frac: Option<f64>,
        /// Field CSV path (default: <output.dir>/ground_state.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve across a mass grid and check the energy inequalities.
    Sweep,
    /// Fiber map of a saved field.
    Fiber {
        #[arg(long)]
        field: PathBuf,
        #[arg(long, default_value_t = 1e-2)]
        s_min: f64,
        #[arg(long, default_value_t = 1e2)]
        s_max: f64,
        #[arg(long, default_value_t = 401)]
        points: usize,
    },
    /// Run the self-check suite.
    Verify,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = Config::load(cli.config.as_deref())?;
    let mut out = Emitter::new(std::io::stdout().lock());
    match cli.command {
        Command::Constants => commands::constants(&config, &mut out),
        Command::Landscape => commands::landscape(&config, &mut out),
        Command::Solve {
            c,
            c_frac,
            out: path,
        } => {
            let mass = match (c, c_frac) {
                (Some(c), _) => MassArg::Absolute(c),
                (None, Some(f)) => MassArg::FractionOfThreshold(f),
                (None, None) => unreachable!("clap requires one of --c and --c-frac"),
            };
            commands::solve(&config, mass, path, &mut out)
        }
        Command::Sweep => commands::sweep(&config, &mut out),
        Command::Fiber {
            field,
            s_min,
            s_max,
            points,
        } => commands::fiber(
            &config,
            &FiberArgs {
                field,
                s_min,
                s_max,
                points,
            },
            &mut out,
        ),
        Command::Verify => commands::verify(&config, &mut out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            eprintln!(
                "{}",
                json!({ "error": e.kind(), "message": e.to_string(), "exit_code": code })
            );
            ExitCode::from(code)
        }
    }
}
