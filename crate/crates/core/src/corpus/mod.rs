//! Canonical corpus construction.
//!
//! Raw rows from heterogeneous sources are turned into [`Record`]s by
//! resolving each source's annotation scheme to a binary label
//! ([`rules`]), romanizing Arabic and Devanagari text ([`translit`]),
//! cleaning ([`clean`]) and merging all sources of one language
//! ([`build`]).

pub mod build;
pub mod clean;
pub mod fetch;
pub mod io;
pub mod rules;
pub mod source;
pub mod stats;
pub mod stopwords;
pub mod translit;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lang::{Language, LanguageError};

pub use build::{build_language_corpus, BuildOptions, BuiltCorpus, SourceBatch};
pub use clean::clean_text;
pub use rules::{unify_labels, LabelMappingRule, RuleKind, TiePolicy, Unified};
pub use stats::{compute_stats, CorpusStats};
pub use translit::{transliterate, Scheme, Transliterated};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("source {source_id}: missing annotation column {column:?}")]
    MissingColumn { source_id: String, column: String },
    #[error("source {source_id}: value {value:?} in column {column:?} is not covered by the label rule")]
    RuleCoverage { source_id: String, column: String, value: String },
    #[error("label rule for {rule} applied to a record from {record}")]
    SourceMismatch { rule: String, record: String },
    #[error("invalid label rule for {source_id}: {reason}")]
    InvalidRule { source_id: String, reason: String },
    #[error("source {source_id}: {reason}")]
    InvalidRecord { source_id: String, reason: String },
    #[error("no records survived for language {0}")]
    EmptyCorpus(String),
    #[error("source {source_id}: language {found} does not match corpus language {expected}")]
    LanguageMismatch { source_id: String, expected: String, found: String },
    #[error(transparent)]
    Language(#[from] LanguageError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
}

impl CorpusError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CorpusError::Io { path: path.into(), source }
    }
}

/// Binary hate-speech label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    NotHate = 0,
    Hate = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        match i {
            0 => Some(Label::NotHate),
            1 => Some(Label::Hate),
            _ => None,
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Label::from_index(v as usize).ok_or_else(|| format!("label must be 0 or 1, got {v}"))
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l as u8
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", *self as u8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    #[default]
    Unassigned,
}

/// One row of a source dataset before label unification.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub source_id: String,
    pub payload: BTreeMap<String, String>,
    pub language: Language,
}

impl RawRecord {
    pub fn new(
        source_id: impl Into<String>,
        payload: BTreeMap<String, String>,
        language: Language,
    ) -> Result<Self, CorpusError> {
        let source_id = source_id.into();
        if payload.is_empty() {
            return Err(CorpusError::InvalidRecord { source_id, reason: "empty payload".into() });
        }
        Ok(RawRecord { source_id, payload, language })
    }

    pub fn column(&self, name: &str) -> Result<&str, CorpusError> {
        self.payload.get(name).map(String::as_str).ok_or_else(|| CorpusError::MissingColumn {
            source_id: self.source_id.clone(),
            column: name.to_owned(),
        })
    }
}

/// One canonical labelled example, serialized as a JSON Lines object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub text: String,
    pub label: Label,
    #[serde(rename = "lang")]
    pub language: Language,
    #[serde(rename = "source")]
    pub source_id: String,
    pub split: Split,
    /// Text as it appeared in the source, before transliteration and cleaning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
}

impl Record {
    /// Content identity used for leakage checks and prediction dumps.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.language.code().as_bytes());
        h.update([0]);
        h.update(self.source_id.as_bytes());
        h.update([0, self.label as u8, 0]);
        h.update(self.text.as_bytes());
        hex::encode(h.finalize())
    }

    /// Checks the canonical record invariants.
    pub fn validate(&self) -> Result<(), String> {
        if self.text.is_empty() {
            return Err("empty text".into());
        }
        if let Some(c) = self.text.chars().find(|c| !(c.is_ascii_graphic() || *c == ' ')) {
            return Err(format!("non-printable or non-ASCII character {c:?}"));
        }
        Ok(())
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }
}
