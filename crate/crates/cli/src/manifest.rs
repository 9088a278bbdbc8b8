//! Output files and the run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: serde_json::Value,
    pub seeds: Vec<u64>,
    pub workers: usize,
    pub version: String,
    pub outputs: Vec<OutputFile>,
    pub wall_time_seconds: f64,
}

/// Collects written files and emits `manifest.json` at the end.
pub struct Run {
    dir: PathBuf,
    command: String,
    outputs: Vec<OutputFile>,
    start: Instant,
}

impl Run {
    pub fn new(dir: &Path, command: &str) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Run { dir: dir.to_path_buf(), command: command.to_string(), outputs: Vec::new(), start: Instant::now() })
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(OutputFile {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(contents)),
            bytes: contents.len() as u64,
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, v: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_vec_pretty(v)?;
        text.push(b'\n');
        self.write(name, &text)
    }

    pub fn finish(self, parameters: serde_json::Value, seeds: Vec<u64>, workers: usize) -> anyhow::Result<RunManifest> {
        let m = RunManifest {
            command: self.command.clone(),
            parameters,
            seeds,
            workers,
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: self.outputs.clone(),
            wall_time_seconds: self.start.elapsed().as_secs_f64(),
        };
        let mut text = serde_json::to_vec_pretty(&m)?;
        text.push(b'\n');
        std::fs::write(self.dir.join("manifest.json"), text)?;
        Ok(m)
    }
}

/// CSV text from a header and rows of numbers.
pub fn csv_text(header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    Ok(w.into_inner()?)
}
