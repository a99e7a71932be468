//! `manifest.json`: what a run read, how it was configured, what it wrote.

use std::fs::File;
use std::io::{self, BufReader, Read};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub config: Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub threads: usize,
    pub started_at: u64,
    pub wall_clock_s: f64,
}

/// Forwards reads while hashing everything that passes through.
pub struct HashingReader<R> {
    inner: R,
    hasher: Sha256,
    bytes: u64,
}

impl<R: Read> HashingReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, hasher: Sha256::new(), bytes: 0 }
    }

    /// Drains whatever the consumer left unread, then returns the digest.
    pub fn finish(mut self, path: impl Into<String>) -> io::Result<FileDigest> {
        io::copy(&mut self, &mut io::sink())?;
        Ok(FileDigest { path: path.into(), sha256: hex::encode(self.hasher.finalize()), bytes: self.bytes })
    }
}

impl<R: Read> Read for HashingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.hasher.update(&buf[..n]);
        self.bytes += n as u64;
        Ok(n)
    }
}

pub fn digest_file(path: &Path, label: impl Into<String>) -> Result<FileDigest, CliError> {
    let file = File::open(path).map_err(CliError::io(path))?;
    HashingReader::new(BufReader::with_capacity(1 << 20, file)).finish(label).map_err(CliError::io(path))
}

/// Timing and bookkeeping for one subcommand invocation.
pub struct Run {
    subcommand: &'static str,
    started: Instant,
    started_at: u64,
    threads: usize,
    inputs: Vec<FileDigest>,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn start(subcommand: &'static str, threads: usize) -> Self {
        let started_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        Self { subcommand, started: Instant::now(), started_at, threads, inputs: Vec::new(), outputs: Vec::new() }
    }

    pub fn input(&mut self, digest: FileDigest) {
        self.inputs.push(digest);
    }

    pub fn output(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    /// Digests the outputs and merges this run into `out_dir/manifest.json`,
    /// keyed by subcommand.
    pub fn finish(self, out_dir: &Path, config: &impl Serialize) -> Result<(), CliError> {
        let outputs = self
            .outputs
            .iter()
            .map(|p| {
                let label = p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
                digest_file(p, label)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let manifest = RunManifest {
            subcommand: self.subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(config).map_err(|e| CliError::Data(e.to_string()))?,
            inputs: self.inputs,
            outputs,
            threads: self.threads,
            started_at: self.started_at,
            wall_clock_s: self.started.elapsed().as_secs_f64(),
        };
        let path = out_dir.join(MANIFEST_FILE);
        let mut all = match std::fs::read_to_string(&path) {
            Ok(text) => match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(map)) => map,
                _ => serde_json::Map::new(),
            },
            Err(_) => serde_json::Map::new(),
        };
        all.insert(self.subcommand.to_string(), serde_json::to_value(&manifest).expect("manifest serializes"));
        let text = serde_json::to_string_pretty(&Value::Object(all)).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(CliError::io(&path))
    }
}
