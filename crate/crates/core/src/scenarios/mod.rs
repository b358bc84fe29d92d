//! Stratified splits and the three experiment protocols.

pub mod manifest;
pub mod runner;
pub mod split;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::embeddings::EmbeddingError;
use crate::evaluation::EvalError;
use crate::lang::Language;
use crate::models::{ModelError, ModelFamily, TrainConfig};

pub use manifest::{list_manifests, RunManifest, RunStatus, MANIFEST_FILE};
pub use runner::{run_scenario, RunContext, ScenarioRequest};
pub use split::{optional_language_cap, stratified_split};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("unknown language family {name:?}; known families: {}", known.join(", "))]
    UnknownFamily { name: String, known: Vec<String> },
    #[error("corpus for {language} not found at {path}; run `ingest` first")]
    MissingCorpus { language: String, path: PathBuf },
    #[error("cannot stratify {language}: class {label} has {count} example(s), at least 2 required")]
    Stratification { language: String, label: u8, count: usize },
    #[error("run {run_id} already exists; pass --force to replace it")]
    RunExists { run_id: String },
    #[error("stage {stage} failed: {message}")]
    Stage { stage: String, message: String },
    #[error("{path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl ScenarioError {
    pub(crate) fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        ScenarioError::Io { path: path.as_ref().to_owned(), source }
    }

    /// Whether the error stems from the request rather than from execution.
    pub fn is_validation(&self) -> bool {
        match self {
            ScenarioError::Invalid(_)
            | ScenarioError::UnknownFamily { .. }
            | ScenarioError::MissingCorpus { .. }
            | ScenarioError::Stratification { .. }
            | ScenarioError::RunExists { .. } => true,
            ScenarioError::Model(e) => matches!(
                e,
                ModelError::UnknownFamily(_) | ModelError::BackendMismatch { .. } | ModelError::Precondition(_)
            ),
            ScenarioError::Embedding(e) => {
                matches!(e, EmbeddingError::BackendUnavailable { .. } | EmbeddingError::InvalidConfig { .. })
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Monolingual,
    Multilingual,
    LanguageFamily,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] =
        [ScenarioKind::Monolingual, ScenarioKind::Multilingual, ScenarioKind::LanguageFamily];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Monolingual => "monolingual",
            ScenarioKind::Multilingual => "multilingual",
            ScenarioKind::LanguageFamily => "language_family",
        }
    }

    /// Column heading in reports.
    pub fn display_name(self) -> &'static str {
        match self {
            ScenarioKind::Monolingual => "Monolingual",
            ScenarioKind::Multilingual => "Multilingual",
            ScenarioKind::LanguageFamily => "Language Family",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Named sets of related languages trained jointly.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyRegistry {
    families: BTreeMap<String, BTreeSet<Language>>,
}

impl Default for FamilyRegistry {
    fn default() -> Self {
        let set = |codes: &[&str]| codes.iter().map(|c| Language::new(c).expect("built-in code")).collect();
        let mut families = BTreeMap::new();
        families.insert("germanic".to_owned(), set(&["en", "de", "da"]));
        families.insert("romance".to_owned(), set(&["fr", "es", "it", "pt"]));
        FamilyRegistry { families }
    }
}

impl FamilyRegistry {
    /// Adds or replaces a family; empty member sets are rejected.
    pub fn register(&mut self, name: &str, members: BTreeSet<Language>) -> Result<(), ScenarioError> {
        if members.is_empty() {
            return Err(ScenarioError::Invalid(format!("language family {name:?} has no members")));
        }
        self.families.insert(name.to_owned(), members);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&BTreeSet<Language>, ScenarioError> {
        self.families.get(name).ok_or_else(|| ScenarioError::UnknownFamily {
            name: name.to_owned(),
            known: self.names(),
        })
    }

    pub fn names(&self) -> Vec<String> {
        self.families.keys().cloned().collect()
    }
}

/// One fully resolved experiment: what is trained on what, and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// Registered family name for `language_family` runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    pub train_languages: BTreeSet<Language>,
    pub test_languages: BTreeSet<Language>,
    pub model_family: ModelFamily,
    pub train_config: TrainConfig,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Checks the per-kind language invariants. `available` is the set of
    /// languages the multilingual scenario trains on.
    pub fn validate(&self, available: &BTreeSet<Language>, families: &FamilyRegistry) -> Result<(), ScenarioError> {
        let invalid = |m: String| Err(ScenarioError::Invalid(m));
        if self.train_languages.is_empty() {
            return invalid("no training languages".into());
        }
        match self.kind {
            ScenarioKind::Monolingual => {
                if self.train_languages.len() != 1 || self.test_languages != self.train_languages {
                    return invalid("a monolingual run trains and tests on exactly one language".into());
                }
            }
            ScenarioKind::Multilingual => {
                if &self.train_languages != available {
                    return invalid("a multilingual run trains on every selected language".into());
                }
                if !self.test_languages.is_subset(&self.train_languages) || self.test_languages.is_empty() {
                    return invalid("multilingual test languages must be a non-empty subset of the training set".into());
                }
            }
            ScenarioKind::LanguageFamily => {
                let Some(name) = &self.family else {
                    return invalid("a language_family run needs a family name".into());
                };
                if families.get(name)? != &self.train_languages {
                    return invalid(format!("training languages differ from the members of family {name:?}"));
                }
                if !self.test_languages.is_subset(&self.train_languages) || self.test_languages.is_empty() {
                    return invalid("family test languages must be a non-empty subset of its members".into());
                }
            }
        }
        self.train_config.validate()?;
        Ok(())
    }
}
