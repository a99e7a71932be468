pub mod analyze;
pub mod fit;
pub mod generate;
pub mod ingest;
pub mod report;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use mobilis_core::ingest::{ingest_stream, IngestConfig, IngestError, IngestSummary, TrajectoryStore};

use crate::args::WindowArgs;
use crate::manifest::{FileDigest, HashingReader};
use crate::CliError;

/// File names, in lookup order, of a CDR file inside a directory.
const CDR_FILES: [&str; 2] = ["records.csv", "cdr.csv"];

pub(crate) fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))
}

/// A file path, or the canonical CDR file inside a directory.
pub(crate) fn resolve_cdr_input(input: &Path) -> Result<PathBuf, CliError> {
    if input.is_dir() {
        CDR_FILES
            .iter()
            .map(|f| input.join(f))
            .find(|p| p.is_file())
            .ok_or_else(|| CliError::Data(format!("{}: no {} found", input.display(), CDR_FILES.join(" or "))))
    } else if input.is_file() {
        Ok(input.to_path_buf())
    } else {
        Err(CliError::Data(format!("{}: no such file or directory", input.display())))
    }
}

/// Streams a CDR file into a store, hashing it on the way.
pub(crate) fn load_store(
    input: &Path,
    window: &WindowArgs,
) -> Result<(TrajectoryStore, IngestSummary, FileDigest), CliError> {
    let path = resolve_cdr_input(input)?;
    let mut config = IngestConfig::new(window.observation_window()?);
    config.coords = window.coords.into();
    config.on_error = window.error_policy();
    let file = File::open(&path).map_err(CliError::io(&path))?;
    let mut reader = HashingReader::new(BufReader::with_capacity(1 << 20, file));
    let (store, summary) = ingest_stream(&mut reader, &config).map_err(|e| match e {
        IngestError::Io(source) => CliError::Io { path: path.clone(), source },
        other => CliError::Data(format!("{}: {other}", path.display())),
    })?;
    let digest = reader.finish(path.display().to_string()).map_err(CliError::io(&path))?;
    Ok((store, summary, digest))
}

pub(crate) fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(CliError::io(path))
}
