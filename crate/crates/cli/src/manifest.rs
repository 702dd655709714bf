use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliError, ExperimentConfig};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub aqml_core: String,
    pub aqml_cli: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    /// SHA-256 of the config file bytes.
    pub config_hash: String,
    pub seed: u64,
    pub versions: Versions,
    pub status: RunStatus,
    pub wall_time_s: f64,
    /// Artifact file names relative to the output directory.
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

pub fn config_hash(raw: &[u8]) -> String {
    hex::encode(Sha256::digest(raw))
}

impl RunManifest {
    pub fn started(cfg: &ExperimentConfig, raw: &[u8]) -> Self {
        RunManifest {
            experiment: cfg.experiment.name().into(),
            config_hash: config_hash(raw),
            seed: cfg.seed,
            versions: Versions {
                aqml_core: aqml_core::VERSION.into(),
                aqml_cli: env!("CARGO_PKG_VERSION").into(),
            },
            status: RunStatus::Running,
            wall_time_s: 0.0,
            outputs: vec![],
            error: None,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, json + "\n")
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
    }

    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
    }
}
