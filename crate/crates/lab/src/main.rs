use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nck_lab::{run, Command, ExperimentConfig, Format, LabError};

/// Runs one experiment and writes its report.
///
/// Exit codes: 0 success, 1 fatal violation, 2 invalid configuration,
/// 3 numerical failure, 4 I/O or serialization failure.
#[derive(Debug, Parser)]
#[command(name = "nck-lab", version)]
struct Args {
    /// Experiment to run.
    #[arg(value_enum)]
    command: Command,

    /// TOML configuration; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    /// Report destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, value_enum)]
    format: Option<Format>,

    /// Worker threads; all cores when unset.
    #[arg(long, env = "NCK_THREADS")]
    threads: Option<usize>,

    /// Absolute slack for inequality checks.
    #[arg(long)]
    tolerance: Option<f64>,
}

fn execute(args: Args) -> Result<bool, LabError> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(command) = config.command {
        if command != args.command {
            return Err(LabError::config(
                "command",
                format!("file names {} but {} was requested", command.name(), args.command.name()),
            ));
        }
    }
    config.command = Some(args.command);
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.out.is_some() {
        config.out = args.out;
    }
    if let Some(format) = args.format {
        config.format = format;
    }
    if args.threads.is_some() {
        config.threads = args.threads;
    }
    if let Some(tolerance) = args.tolerance {
        config.tolerance = tolerance.into();
    }
    let report = run(args.command, &config)?;
    report.emit(config.format, config.out.as_deref())?;
    for v in &report.violations {
        let kind = if v.fatal { "violation" } else { "warning" };
        eprintln!("{kind}: {}: {}", v.cell, v.message);
    }
    Ok(!report.fatal)
}

fn main() -> ExitCode {
    match execute(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("nck-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
