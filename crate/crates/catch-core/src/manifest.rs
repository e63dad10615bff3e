//! Run manifest: config snapshot, stage seeds, timings, and artifact paths,
//! enough to reproduce a run byte-identically with the mock client.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub millis: u128,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub seed: u64,
    pub stage_seeds: BTreeMap<String, u64>,
    pub config: serde_json::Value,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn new(cfg: &PipelineConfig) -> Self {
        let stage_seeds = [
            ("segment".to_string(), cfg.segment_seed()),
            ("cluster".to_string(), cfg.cluster_seed()),
            ("label".to_string(), cfg.label_seed()),
            ("evaluate".to_string(), cfg.evaluate_seed()),
        ]
        .into_iter()
        .collect();
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            stage_seeds,
            config: serde_json::to_value(cfg).expect("config serializes"),
            stages: Vec::new(),
        }
    }

    /// Load the existing manifest so stage reruns accumulate, or start a
    /// fresh one for this config.
    pub fn load_or_new(path: &Path, cfg: &PipelineConfig) -> Self {
        std::fs::read_to_string(path)
            .ok()
            .and_then(|text| serde_json::from_str(&text).ok())
            .unwrap_or_else(|| RunManifest::new(cfg))
    }

    /// Replace or append the record for one stage.
    pub fn upsert_stage(&mut self, record: StageRecord) {
        match self.stages.iter_mut().find(|s| s.name == record.name) {
            Some(existing) => *existing = record,
            None => self.stages.push(record),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }
}
