use std::path::Path;

use serde::Serialize;

use super::config::PipelineConfig;
use super::layout::Layout;
use crate::error::{PcgError, Result};
use crate::util::{ensure_dir, sha256_file, write_atomic};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        })
    }
}

/// Provenance written next to every stage's outputs. Contains no
/// timestamps, so identical inputs give identical records.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub stage: String,
    pub version: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub config: PipelineConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub summary: serde_json::Value,
}

impl RunRecord {
    pub fn new(
        stage: &str,
        cfg: &PipelineConfig,
        inputs: Vec<FileDigest>,
        outputs: Vec<FileDigest>,
        summary: &impl Serialize,
    ) -> Self {
        RunRecord {
            stage: stage.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            config: cfg.clone(),
            inputs,
            outputs,
            summary: serde_json::to_value(summary).unwrap_or(serde_json::Value::Null),
        }
    }

    pub fn write(&self, layout: &Layout) -> Result<()> {
        let dir = layout.runs_dir();
        ensure_dir(&dir)?;
        let text =
            serde_json::to_string_pretty(self).map_err(|e| PcgError::Other(e.to_string()))?;
        write_atomic(&dir.join(format!("{}.json", self.stage)), text.as_bytes())
    }
}
