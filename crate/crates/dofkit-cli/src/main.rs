//! Job runner for the concentration-operator toolkit: JSON configs in,
//! CSV/JSON artifacts out, deterministic byte-for-byte across runs.

mod config;
mod error;
mod output;
mod runner;

use clap::{Args, Parser, Subcommand};
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use crate::config::Command;
use crate::error::CliError;
use crate::runner::Job;

#[derive(Parser)]
#[command(name = "dofkit", version, about = "Concentration-operator spectra and degrees-of-freedom counts")]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Eigenvalue spectrum of one operator.
    Spectrum(JobArgs),
    /// Transition sweep over a scaling schedule.
    Sweep(JobArgs),
    /// Degrees-of-freedom report, closed-form and empirical.
    Dof(JobArgs),
    /// Invariant suite over the configured (or canonical) geometry.
    Verify(JobArgs),
}

#[derive(Args)]
struct JobArgs {
    /// Path to the JSON job config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker thread count; 1 gives a fully serial run.
    #[arg(long)]
    workers: Option<usize>,
}

impl CliCommand {
    fn expected(&self) -> Command {
        match self {
            CliCommand::Spectrum(_) => Command::Spectrum,
            CliCommand::Sweep(_) => Command::Sweep,
            CliCommand::Dof(_) => Command::Dof,
            CliCommand::Verify(_) => Command::Verify,
        }
    }

    fn args(&self) -> &JobArgs {
        match self {
            CliCommand::Spectrum(a)
            | CliCommand::Sweep(a)
            | CliCommand::Dof(a)
            | CliCommand::Verify(a) => a,
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let args = cli.command.args();
    if let Some(workers) = args.workers {
        if workers == 0 {
            return Err(CliError::config("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::config(format!("worker pool: {e}")))?;
    }
    let raw = fs::read(&args.config).map_err(|e| {
        CliError::config(format!("cannot read {}: {e}", args.config.display()))
    })?;
    let text = String::from_utf8(raw.clone())
        .map_err(|_| CliError::config("config is not valid UTF-8"))?;
    let job_config = config::parse(&text)?;
    let expected = cli.command.expected();
    if job_config.command != expected {
        return Err(CliError::config(format!(
            "config declares command `{}` but the CLI invoked `{expected}`",
            job_config.command
        )));
    }
    fs::create_dir_all(&args.out)?;
    runner::run(&Job {
        config: &job_config,
        raw_config: &raw,
        out_dir: &args.out,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dofkit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
