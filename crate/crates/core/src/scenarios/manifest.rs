//! Run manifests: the provenance record behind every reported number.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ScenarioError, ScenarioSpec};
use crate::corpus::CorpusStats;
use crate::embeddings::Granularity;
use crate::evaluation::{ConfusionMatrix, MetricResult};
use crate::lang::Language;
use crate::models::{EpochStats, ModelSpec};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendInfo {
    pub backend_id: String,
    pub granularity: Granularity,
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageResult {
    pub language: Language,
    pub n_test: usize,
    pub metrics: MetricResult,
    pub confusion: ConfusionMatrix,
    /// Prediction dump, relative to the run directory.
    pub predictions: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageCheck {
    pub train_records: usize,
    pub test_records: usize,
    pub intersection: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_at: String,
    pub finished_at: Option<String>,
    pub wall_clock_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub status: RunStatus,
    pub scenario: ScenarioSpec,
    /// Shared by all manifests produced by one scenario invocation.
    pub scenario_hash: String,
    /// SHA-256 of each canonical corpus file used.
    pub corpus_hashes: BTreeMap<String, String>,
    pub backend: BackendInfo,
    pub model: Option<ModelSpec>,
    pub test_ratio: f64,
    /// `cleaned` or `raw`: which text the encoder consumed.
    pub embedding_input: String,
    pub cap_per_language: Option<usize>,
    pub corpus_stats: BTreeMap<String, CorpusStats>,
    pub split_sizes: BTreeMap<String, SplitSizes>,
    pub train_size: usize,
    pub leakage_check: Option<LeakageCheck>,
    pub history: Vec<EpochStats>,
    pub results: Vec<LanguageResult>,
    pub code_version: String,
    pub timing: Timing,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<RunFailure>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn write(&self, run_dir: &Path) -> Result<(), ScenarioError> {
        let path = run_dir.join(MANIFEST_FILE);
        crate::corpus::io::write_atomic(&path, self.to_json().as_bytes()).map_err(|e| ScenarioError::io(&path, e))
    }

    pub fn read(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| ScenarioError::Manifest { path: path.into(), message: e.to_string() })
    }

    /// Manifest path relative to the runs directory.
    pub fn relative_path(&self) -> PathBuf {
        Path::new(&self.run_id).join(MANIFEST_FILE)
    }

    pub fn result(&self, lang: &Language) -> Option<&LanguageResult> {
        self.results.iter().find(|r| &r.language == lang)
    }
}

/// Every completed manifest directly under `runs_dir`, sorted by run id.
pub fn list_manifests(runs_dir: &Path) -> Result<Vec<RunManifest>, ScenarioError> {
    let mut out = Vec::new();
    let entries = match std::fs::read_dir(runs_dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(ScenarioError::io(runs_dir, e)),
    };
    for entry in entries {
        let entry = entry.map_err(|e| ScenarioError::io(runs_dir, e))?;
        let path = entry.path().join(MANIFEST_FILE);
        if path.is_file() {
            out.push(RunManifest::read(&path)?);
        }
    }
    out.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    Ok(out)
}
