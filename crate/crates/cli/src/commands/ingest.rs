use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use crate::args::WindowArgs;
use crate::manifest::Run;
use crate::CliError;

use super::{ensure_dir, load_store, write_json};

#[derive(Debug, Clone, Args, Serialize)]
pub struct IngestArgs {
    /// CDR CSV file (header `subscriber_id,timestamp,tower_id,x,y`).
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub window: WindowArgs,
}

pub fn run(args: IngestArgs, threads: usize) -> Result<(), CliError> {
    let mut run = Run::start("ingest", threads);
    ensure_dir(&args.out)?;
    let (store, summary, digest) = load_store(&args.input, &args.window)?;
    run.input(digest);

    let records = args.out.join("records.csv");
    let file = File::create(&records).map_err(CliError::io(&records))?;
    store.write_csv(BufWriter::with_capacity(1 << 20, file)).map_err(CliError::io(&records))?;
    run.output(records);

    let summary_path = args.out.join("ingest_summary.json");
    write_json(&summary_path, &summary)?;
    run.output(summary_path);
    eprintln!(
        "ingest: {} lines, {} accepted, {} skipped, {} out of window, {} errors, {} subscribers",
        summary.total_lines, summary.accepted, summary.skipped, summary.out_of_window, summary.errors, summary.subscribers
    );
    run.finish(&args.out, &args)
}
