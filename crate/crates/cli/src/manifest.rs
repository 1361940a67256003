use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub config: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub checkpoints: Vec<PathBuf>,
    pub final_checkpoint: Option<PathBuf>,
    pub comparison: Option<PathBuf>,
    pub trajectories: Vec<PathBuf>,
    pub plots: Vec<PathBuf>,
}

/// Record of one command run; paths are relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    /// Checkpoint the run started from, if any.
    pub source_checkpoint: Option<PathBuf>,
    pub artifacts: Artifacts,
    pub started_at: String,
    pub finished_at: Option<String>,
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(command: &str, seed: u64, config: &RunConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            command: command.to_owned(),
            seed,
            config: config.clone(),
            source_checkpoint: None,
            artifacts: Artifacts::default(),
            started_at: now(),
            finished_at: None,
        }
    }

    pub fn finish(&mut self) {
        self.finished_at = Some(now());
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(
            &path,
            serde_json::to_string_pretty(self).expect("manifest serialises"),
        )?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
        serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}
