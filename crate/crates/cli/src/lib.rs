//! Declarative experiment runner for `aqml-core`.
//!
//! A run reads one TOML config, validates every block it needs, executes the
//! experiment and writes CSV/JSON artifacts plus a `manifest.json` into the
//! output directory.

pub mod config;
pub mod experiments;
pub mod manifest;

use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

pub use config::{ExperimentConfig, ExperimentKind, ValidationReport};
pub use manifest::{RunManifest, RunStatus};

/// Environment variable naming the root under which relative output directories resolve.
pub const OUTPUT_ROOT_ENV: &str = "AQML_OUTPUT_ROOT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("experiment failed: {0}")]
    Runtime(#[from] aqml_core::Error),
}

impl CliError {
    /// 2 for configs that never start, 1 for failures during a run.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Validation(_) => 2,
            CliError::Io(_) | CliError::Runtime(_) => 1,
        }
    }
}

/// Result of a finished run.
#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub output_dir: PathBuf,
    pub summary: String,
}

/// Output directory of `cfg`: `output_dir` (default: the experiment name) under `root`.
pub fn resolve_output_dir(cfg: &ExperimentConfig, root: Option<&Path>) -> PathBuf {
    let rel = PathBuf::from(
        cfg.output_dir
            .clone()
            .unwrap_or_else(|| cfg.experiment.name().to_string()),
    );
    match root {
        Some(r) if rel.is_relative() => r.join(rel),
        _ => rel,
    }
}

/// The output root from the environment, if set and non-empty.
pub fn env_output_root() -> Option<PathBuf> {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

pub fn validate(path: &Path) -> Result<ValidationReport, CliError> {
    let (cfg, _) = ExperimentConfig::load(path)?;
    cfg.validate()
}

/// Validates, runs and records one experiment.
pub fn run(path: &Path, root: Option<&Path>) -> Result<RunOutcome, CliError> {
    let (cfg, bytes) = ExperimentConfig::load(path)?;
    run_config(&cfg, &bytes, root)
}

pub fn run_config(
    cfg: &ExperimentConfig,
    raw: &[u8],
    root: Option<&Path>,
) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let dir = resolve_output_dir(cfg, root);
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))?;
    let mut manifest = RunManifest::started(cfg, raw);
    manifest.write(&dir)?;
    let t0 = Instant::now();
    let result = experiments::execute(cfg, &dir);
    manifest.wall_time_s = t0.elapsed().as_secs_f64();
    match result {
        Ok(out) => {
            manifest.status = RunStatus::Complete;
            manifest.outputs = out.files;
            manifest.write(&dir)?;
            Ok(RunOutcome {
                manifest,
                output_dir: dir,
                summary: out.summary,
            })
        }
        Err(e) => {
            manifest.status = RunStatus::Failed;
            manifest.error = Some(e.to_string());
            manifest.write(&dir)?;
            Err(e)
        }
    }
}

/// `name  description` lines for every experiment.
pub fn list_experiments() -> String {
    let mut s = String::new();
    for k in ExperimentKind::ALL {
        s.push_str(&format!("{:<18} {}\n", k.name(), k.description()));
    }
    s
}
