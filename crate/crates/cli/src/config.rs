//! Flags, the optional config file, and their merge (flags win).

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::UsageError;

/// Shared options. The config file uses the same names as the long flags.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Options {
    /// Branching mechanism: `brownian` or `stable:<index>` with index in (1,2)
    #[arg(long)]
    pub psi: Option<String>,
    /// Time horizon of the simulated path
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Time step
    #[arg(long)]
    pub dt: Option<f64>,
    /// Height step of the spatial paths (default sqrt(dt)/4)
    #[arg(long)]
    pub dh: Option<f64>,
    /// Window of the additive functional and exit local times (default 2 sqrt(dt))
    #[arg(long)]
    pub eps: Option<f64>,
    /// Occupation half-width for the local time at 0 (default: exact bridge scheme)
    #[arg(long)]
    pub eps_loc: Option<f64>,
    /// Comma-separated levels (many-to-one thresholds, exit starting points)
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    /// Comma-separated lambda grid
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    /// Local-time window per replica
    #[arg(long)]
    pub window: Option<f64>,
    /// Number of replicas (stored excursions for the stored-snake checks)
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Master seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = available parallelism)
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// JSON or TOML file with the same keys as the flags
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

macro_rules! merge_fields {
    ($flags:expr, $file:expr, $($f:ident),*) => {
        Options { $($f: $flags.$f.or($file.$f),)* config: None }
    };
}

impl Options {
    /// Loads the config file, if any, and overlays the flags on it.
    pub fn resolve(self) -> anyhow::Result<Options> {
        let file = match &self.config {
            Some(p) => load_file(p)?,
            None => Options::default(),
        };
        Ok(merge_fields!(
            self, file, psi, horizon, dt, dh, eps, eps_loc, levels, lambda_grid, window, replicas, seed, workers,
            out_dir
        ))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or(0)
    }

    pub fn psi(&self) -> anyhow::Result<Psi> {
        parse_psi(self.psi.as_deref().unwrap_or("brownian"))
    }

    /// Usage error naming the first of `names` that is set.
    pub fn reject(&self, command: &str, names: &[&str]) -> anyhow::Result<()> {
        let v = serde_json::to_value(self)?;
        for n in names {
            if !v[*n].is_null() {
                return Err(UsageError(format!("--{n} is not used by {command}")).into());
            }
        }
        Ok(())
    }
}

fn load_file(p: &Path) -> anyhow::Result<Options> {
    let text = std::fs::read_to_string(p).map_err(|e| UsageError(format!("cannot read config {}: {e}", p.display())))?;
    let parsed = match p.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&text).map_err(|e| e.to_string()),
        _ => serde_json::from_str(&text).map_err(|e| e.to_string()),
    };
    parsed.map_err(|e| UsageError(format!("invalid config {}: {e}", p.display())).into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Psi {
    Brownian,
    Stable { index: f64 },
}

pub fn parse_psi(s: &str) -> anyhow::Result<Psi> {
    if s == "brownian" {
        return Ok(Psi::Brownian);
    }
    if let Some(rest) = s.strip_prefix("stable:") {
        if let Ok(a) = rest.parse::<f64>() {
            if a > 1.0 && a < 2.0 {
                return Ok(Psi::Stable { index: a });
            }
            return Err(UsageError(format!("stable index must lie in (1,2), got {a}")).into());
        }
    }
    Err(UsageError(format!("unknown --psi '{s}' (expected brownian or stable:<index>)")).into())
}

pub fn positive(name: &str, v: f64) -> anyhow::Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(UsageError(format!("--{name} must be finite and > 0, got {v}")).into())
    }
}
