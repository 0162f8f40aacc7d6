use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CliError;
use crate::hetgraph::GraphError;
use crate::mhn::write_atomic;

pub const MANIFEST_FORMAT: &str = "mhn-manifest";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Run record written next to a command's artifacts. It holds wall-clock
/// timings and the worker count, so unlike the artifacts it lists it is not
/// reproducible byte for byte.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub command: String,
    pub seed: u64,
    pub workers: usize,
    /// Fully resolved configuration, defaults included.
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub artifacts: Vec<FileDigest>,
    pub timings_ms: BTreeMap<String, u64>,
}

pub(crate) fn digest(path: &Path) -> Result<FileDigest, CliError> {
    let bytes = std::fs::read(path).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Collects inputs, artifacts and stage timings while a command runs.
pub(crate) struct Recorder {
    manifest: RunManifest,
    stage_start: Instant,
}

impl Recorder {
    pub fn new(command: &str, seed: u64, workers: usize, config: serde_json::Value) -> Self {
        Self {
            manifest: RunManifest {
                format: MANIFEST_FORMAT.to_string(),
                command: command.to_string(),
                seed,
                workers,
                config,
                inputs: Vec::new(),
                artifacts: Vec::new(),
                timings_ms: BTreeMap::new(),
            },
            stage_start: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.manifest.inputs.push(digest(path)?);
        Ok(())
    }

    pub fn artifact(&mut self, path: &Path) -> Result<(), CliError> {
        self.manifest.artifacts.push(digest(path)?);
        Ok(())
    }

    /// Ends the current stage under `name`.
    pub fn stage(&mut self, name: &str) {
        let ms = self.stage_start.elapsed().as_millis() as u64;
        self.manifest.timings_ms.insert(name.to_string(), ms);
        self.stage_start = Instant::now();
    }

    pub fn write(self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes") + "\n";
        write_atomic(path, &text)?;
        Ok(())
    }
}
