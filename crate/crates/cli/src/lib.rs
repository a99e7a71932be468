//! `mobilis` command-line front end: ingest, analyze, fit, report, generate.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub mod args;
mod commands;
pub mod manifest;
pub mod tables;

pub use commands::{analyze::AnalyzeArgs, fit::FitArgs, generate::GenerateArgs, ingest::IngestArgs, report::ReportArgs};

/// Environment variable that overrides `--seed`.
pub const SEED_ENV: &str = "MOBILIS_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid flags or configuration; exit code 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// Bad or missing input data; exit code 1.
    #[error("{0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mobilis", version, about = "Mobility analytics over call detail records")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, validate and deduplicate a CDR file.
    Ingest(IngestArgs),
    /// Interval samples, histograms, curves, cohorts, density and gyration.
    Analyze(AnalyzeArgs),
    /// Maximum-likelihood fits of the waiting-time and displacement laws.
    Fit(FitArgs),
    /// Figure data and gnuplot scripts from an analysis directory.
    Report(ReportArgs),
    /// Synthetic CDR population from a continuous-time random walk.
    Generate(GenerateArgs),
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let threads = cli.threads.unwrap_or_else(rayon::current_num_threads);
    if threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Ingest(a) => commands::ingest::run(a, threads),
        Command::Analyze(a) => commands::analyze::run(a, threads),
        Command::Fit(a) => commands::fit::run(a, threads),
        Command::Report(a) => commands::report::run(a, threads),
        Command::Generate(a) => commands::generate::run(a, threads),
    })
}
