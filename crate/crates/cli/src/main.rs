//! `photolyase`: simulate binding curves, budget photons, generate synthetic
//! gel assays and retrodict the binding onset.
//!
//! Exit status: 0 success, 2 configuration error, 3 data error, 4 fit failure.

mod commands;
mod config;
mod error;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "photolyase", version, about = "Photolyase binding kinetics and onset retrodiction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key=value configuration file
    #[arg(long)]
    config: PathBuf,
    /// RNG seed; overrides `seed` in the config
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (stdout when absent); written atomically
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a binding trajectory on a time grid (CSV t_s,ps_molar)
    Simulate(Common),
    /// Photon budget for converting the DNA dimer sites
    Budget(Common),
    /// Simulate aliquot gel counts (CSV gel_time_s,bound_counts,unbound_counts,ps_estimate_molar)
    Assay(Common),
    /// Fit t0 to measurements and report key=value estimates with bootstrap intervals
    Retrodict {
        #[command(flatten)]
        common: Common,
        /// Measurement CSV produced by `assay`
        #[arg(long)]
        input: PathBuf,
    },
}

fn read(path: &Path, kind: fn(String) -> CliError) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| kind(format!("cannot read {}: {e}", path.display())))
}

/// Writes to a temporary file beside `path` and renames it into place.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io_err = |e: std::io::Error| CliError::Data(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents.as_bytes()).map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, output) = match &cli.command {
        Command::Simulate(c) => (c, commands::simulate(&load(c)?)?),
        Command::Budget(c) => (c, commands::budget(&load(c)?)?),
        Command::Assay(c) => (c, commands::assay(&load(c)?, c.seed)?),
        Command::Retrodict { common, input } => {
            let cfg = load(common)?;
            let csv = read(input, CliError::Data)?;
            (common, commands::retrodict(&cfg, &csv, common.seed)?)
        }
    };
    match &common.out {
        Some(path) => write_atomic(path, &output),
        None => {
            print!("{output}");
            Ok(())
        }
    }
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    RunConfig::parse(&read(&common.config, CliError::Config)?)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("photolyase: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
