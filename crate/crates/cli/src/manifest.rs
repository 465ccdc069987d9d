use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use chrono::NaiveDate;
use pricewise_core::ingest::{CATALOG_FILE, CLICKSTREAM_FILE, PRICE_HISTORY_FILE, SORT_RANK_FILE};
use pricewise_demand::ModelKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex_digest, PipelineConfig};
use crate::error::{Result, Stage, StageContext};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Completed,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: StageStatus,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Provenance of one pipeline run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub data_hash: String,
    /// Hash of the two above; equal runs share it.
    pub run_hash: String,
    pub as_of: Option<NaiveDate>,
    pub model: ModelKind,
    pub seeds: BTreeMap<String, u64>,
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    pub fn new(config: &PipelineConfig) -> Self {
        let config_hash = config.content_hash();
        let data_hash = data_hash(&config.data_dir);
        Manifest {
            run_hash: hex_digest(format!("{config_hash}{data_hash}").as_bytes()),
            config_hash,
            data_hash,
            as_of: config.as_of,
            model: config.demand.model,
            seeds: config
                .seeds()
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            stages: Vec::new(),
        }
    }

    /// Runs one stage, recording its status and wall time.
    pub fn record<T>(&mut self, stage: Stage, body: impl FnOnce() -> Result<T>) -> Result<T> {
        log::info!("stage {stage} started");
        let start = Instant::now();
        let out = body().in_stage(stage);
        let seconds = start.elapsed().as_secs_f64();
        self.stages.push(StageRecord {
            stage,
            status: if out.is_ok() {
                StageStatus::Completed
            } else {
                StageStatus::Failed
            },
            seconds,
            error: out.as_ref().err().map(|e| e.to_string()),
        });
        log::info!("stage {stage} finished in {seconds:.2}s");
        out
    }

    pub fn completed(&self) -> Vec<Stage> {
        self.stages
            .iter()
            .filter(|s| s.status == StageStatus::Completed)
            .map(|s| s.stage)
            .collect()
    }
}

/// SHA-256 over the four input files (name, length, bytes) in a fixed order.
/// A missing file contributes only its name.
pub fn data_hash(data_dir: &Path) -> String {
    let mut h = Sha256::new();
    for name in [CATALOG_FILE, PRICE_HISTORY_FILE, CLICKSTREAM_FILE, SORT_RANK_FILE] {
        h.update(name.as_bytes());
        match fs::read(data_dir.join(name)) {
            Ok(bytes) => {
                h.update((bytes.len() as u64).to_le_bytes());
                h.update(&bytes);
            }
            Err(_) => h.update(b"<missing>"),
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data_hash_tracks_content() {
        let dir = tempfile::tempdir().unwrap();
        let empty = data_hash(dir.path());
        fs::write(dir.path().join(CATALOG_FILE), "a").unwrap();
        let one = data_hash(dir.path());
        assert_ne!(empty, one);
        assert_eq!(one, data_hash(dir.path()));
        fs::write(dir.path().join(CATALOG_FILE), "b").unwrap();
        assert_ne!(one, data_hash(dir.path()));
    }

    #[test]
    fn record_tags_failures() {
        let mut m = Manifest::new(&PipelineConfig::default());
        m.record(Stage::Ingest, || Ok(())).unwrap();
        let err = m
            .record(Stage::Features, || -> Result<()> {
                Err(crate::error::CliError::Config("x".into()))
            })
            .unwrap_err();
        assert_eq!(err.stage(), Some(Stage::Features));
        assert_eq!(m.completed(), vec![Stage::Ingest]);
        assert_eq!(m.stages[1].status, StageStatus::Failed);
    }
}
