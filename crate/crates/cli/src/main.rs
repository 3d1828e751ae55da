//! `spinekit` command-line front end.
//!
//! Exit codes: 0 on success, 1 when a run fails (unreadable or malformed
//! input, predictor failure, mismatched grids), 2 on usage errors.

mod commands;
mod output;
mod predictors;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "spinekit", version, about = "Whole-spine segmentation toolkit")]
struct Cli {
    /// Log level: error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,

    /// Worker thread limit; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic spine with exact ground truth.
    Phantom(commands::phantom::Args),
    /// Merge annotation sources into one semantic mask.
    Fuse(commands::fuse::Args),
    /// Run both segmentation phases on an image.
    Segment(commands::segment::Args),
    /// Score a prediction against a reference.
    Evaluate(commands::evaluate::Args),
    /// Aggregate evaluations into mean ± sd tables with paired tests.
    Report(commands::report::Args),
}

/// Invalid arguments or configuration; exits with code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(spinekit::Error::InvalidSpec(_)) = cause.downcast_ref::<spinekit::Error>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .parse_default_env()
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("cannot limit threads: {e}");
        }
    }
    let result = match &cli.command {
        Command::Phantom(a) => commands::phantom::run(a, cli.threads),
        Command::Fuse(a) => commands::fuse::run(a, cli.threads),
        Command::Segment(a) => commands::segment::run(a, cli.threads),
        Command::Evaluate(a) => commands::evaluate::run(a, cli.threads),
        Command::Report(a) => commands::report::run(a, cli.threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
