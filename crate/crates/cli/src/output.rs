//! CSV tables, the run manifest and content hashes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use seisfrag::accelerogram::format_sig9;

use crate::error::{CliError, CliResult};

/// A number with nine significant digits.
pub fn num(v: f64) -> String {
    format_sig9(v)
}

/// Empty field for undefined values.
pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Writes a header row followed by `rows`.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(CliError::csv(path))?;
    w.write_record(header).map_err(CliError::csv(path))?;
    for r in rows {
        debug_assert_eq!(r.len(), header.len());
        w.write_record(r).map_err(CliError::csv(path))?;
    }
    w.flush().map_err(CliError::io(path))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

/// Provenance of one command invocation, written as `manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub timings: Vec<StageTiming>,
    pub counts: BTreeMap<String, usize>,
    pub warnings: Vec<String>,
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config_hash: String) -> Self {
        Self {
            tool: "seisfrag".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config_hash,
            timings: Vec::new(),
            counts: BTreeMap::new(),
            warnings: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn time<T>(
        &mut self,
        stage: &str,
        f: impl FnOnce(&mut Self) -> CliResult<T>,
    ) -> CliResult<T> {
        let t0 = std::time::Instant::now();
        let out = f(self);
        self.timings.push(StageTiming {
            stage: stage.into(),
            seconds: t0.elapsed().as_secs_f64(),
        });
        out
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    pub fn count(&mut self, key: &str, n: usize) {
        *self.counts.entry(key.into()).or_default() += n;
    }

    /// Records `path` (relative to `root`) with the hash of its contents.
    pub fn record_output(&mut self, root: &Path, path: &Path) -> CliResult<()> {
        let bytes = std::fs::read(path).map_err(CliError::io(path))?;
        let rel: PathBuf = path.strip_prefix(root).unwrap_or(path).to_path_buf();
        self.outputs.push(OutputFile {
            path: rel.to_string_lossy().replace('\\', "/"),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> CliResult<PathBuf> {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Data(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(CliError::io(&path))?;
        Ok(path)
    }
}
