use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{RunError, RunResult};

pub const MANIFEST_SCHEMA: &str = "heatlift.manifest.v1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub heatlift: String,
    pub heatlift_core: String,
}

impl Versions {
    pub fn current() -> Self {
        Versions {
            heatlift: env!("CARGO_PKG_VERSION").to_string(),
            heatlift_core: heatlift_core::VERSION.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl OutputFile {
    pub fn of(path: &str, contents: &[u8]) -> Self {
        OutputFile {
            path: path.to_string(),
            sha256: hex::encode(Sha256::digest(contents)),
            bytes: contents.len() as u64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub threads: usize,
    pub versions: Versions,
    pub wall_time_seconds: f64,
    pub outputs: Vec<OutputFile>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn read(path: &Path) -> RunResult<Manifest> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
    }

    pub fn output(&self, path: &str) -> Option<&OutputFile> {
        self.outputs.iter().find(|o| o.path == path)
    }
}
