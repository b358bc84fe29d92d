//! The framework configuration document.
//!
//! A single TOML file holds every path, default and declaration. Relative
//! paths resolve against the directory containing the file. Scalar keys can
//! be overridden from the environment as `HATEBENCH_<KEY>` (for example
//! `HATEBENCH_RUNS_DIR` or `HATEBENCH_SEED`).

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::source::SourceSpec;
use crate::embeddings::{BackendConfig, Granularity};
use crate::lang::{Language, LanguageRegistry};
use crate::scenarios::{FamilyRegistry, ScenarioError};

pub const ENV_PREFIX: &str = "HATEBENCH_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read configuration {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid value for {key}: {message}")]
    Env { key: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameworkConfig {
    #[serde(default = "defaults::corpus_dir")]
    pub corpus_dir: PathBuf,
    #[serde(default = "defaults::runs_dir")]
    pub runs_dir: PathBuf,
    #[serde(default = "defaults::stopword_dir")]
    pub stopword_dir: PathBuf,
    /// Embedding cache location; no caching when absent.
    #[serde(default)]
    pub embedding_cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::test_ratio")]
    pub test_ratio: f64,
    /// Keep the untouched source text next to the cleaned text.
    #[serde(default = "defaults::yes")]
    pub keep_raw_text: bool,
    /// Exact-text deduplication within a language.
    #[serde(default)]
    pub dedup: bool,
    /// Language codes registered in addition to the built-in eleven.
    #[serde(default)]
    pub languages: Vec<String>,
    /// Language families added to (or replacing) the built-ins.
    #[serde(default)]
    pub families: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub backends: Vec<BackendConfig>,
    #[serde(default)]
    pub sources: Vec<SourceSpec>,
    #[serde(skip)]
    base_dir: PathBuf,
}

mod defaults {
    use std::path::PathBuf;

    pub fn corpus_dir() -> PathBuf {
        "corpus".into()
    }
    pub fn runs_dir() -> PathBuf {
        "runs".into()
    }
    pub fn stopword_dir() -> PathBuf {
        "stopwords".into()
    }
    pub fn test_ratio() -> f64 {
        0.2
    }
    pub fn yes() -> bool {
        true
    }
}

#[derive(Clone, Copy)]
enum KeyType {
    Path,
    Int,
    Float,
    Bool,
}

const ENV_KEYS: [(&str, KeyType); 8] = [
    ("corpus_dir", KeyType::Path),
    ("runs_dir", KeyType::Path),
    ("stopword_dir", KeyType::Path),
    ("embedding_cache_dir", KeyType::Path),
    ("seed", KeyType::Int),
    ("test_ratio", KeyType::Float),
    ("keep_raw_text", KeyType::Bool),
    ("dedup", KeyType::Bool),
];

fn env_value(key: &str, ty: KeyType, raw: &str) -> Result<toml::Value, ConfigError> {
    let err = |message: String| ConfigError::Env { key: format!("{ENV_PREFIX}{}", key.to_uppercase()), message };
    Ok(match ty {
        KeyType::Path => toml::Value::String(raw.to_owned()),
        KeyType::Int => toml::Value::Integer(raw.trim().parse::<i64>().map_err(|e| err(e.to_string()))?),
        KeyType::Float => toml::Value::Float(raw.trim().parse::<f64>().map_err(|e| err(e.to_string()))?),
        KeyType::Bool => toml::Value::Boolean(match raw.trim().to_ascii_lowercase().as_str() {
            "1" | "true" | "yes" => true,
            "0" | "false" | "no" => false,
            other => return Err(err(format!("expected a boolean, got {other:?}"))),
        }),
    })
}

impl FrameworkConfig {
    /// Reads `path` and applies overrides from the process environment.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, path, &base, std::env::vars())
    }

    /// Parses `text`; `origin` names the document in errors.
    pub fn parse<I>(text: &str, origin: &Path, base_dir: &Path, env: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let parse_err = |message: String| ConfigError::Parse { path: origin.into(), message };
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| parse_err(e.to_string()))?;
        for (name, value) in env {
            let Some(key) = name.strip_prefix(ENV_PREFIX) else { continue };
            let key = key.to_ascii_lowercase();
            if let Some(&(k, ty)) = ENV_KEYS.iter().find(|(k, _)| *k == key) {
                table.insert(k.to_owned(), env_value(k, ty, &value)?);
            }
        }
        let mut cfg: FrameworkConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| parse_err(e.to_string()))?;
        cfg.base_dir = base_dir.to_owned();
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if !(self.test_ratio > 0.0 && self.test_ratio < 1.0) {
            return invalid(format!("test_ratio must lie in (0, 1), got {}", self.test_ratio));
        }
        let registry = self.language_registry()?;
        let mut ids = BTreeSet::new();
        for s in &self.sources {
            if !ids.insert(s.source_id.as_str()) {
                return invalid(format!("duplicate source_id {}", s.source_id));
            }
            s.language(&registry).map_err(|e| ConfigError::Invalid(format!("source {}: {e}", s.source_id)))?;
            s.label_rule().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        let mut backend_ids = BTreeSet::new();
        for b in &self.backends {
            if !backend_ids.insert(b.backend_id.as_str()) {
                return invalid(format!("duplicate backend_id {}", b.backend_id));
            }
        }
        self.family_registry()?;
        Ok(())
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.resolve(&self.corpus_dir)
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.resolve(&self.runs_dir)
    }

    pub fn stopword_dir(&self) -> PathBuf {
        self.resolve(&self.stopword_dir)
    }

    pub fn embedding_cache_dir(&self) -> Option<PathBuf> {
        self.embedding_cache_dir.as_deref().map(|p| self.resolve(p))
    }

    pub fn language_registry(&self) -> Result<LanguageRegistry, ConfigError> {
        let extra = self
            .languages
            .iter()
            .map(|c| Language::new(c).map_err(|e| ConfigError::Invalid(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LanguageRegistry::with_extra(extra))
    }

    /// Languages with at least one declared source.
    pub fn corpus_languages(&self) -> BTreeSet<Language> {
        let registry = self.language_registry().unwrap_or_default();
        self.sources.iter().filter_map(|s| s.language(&registry).ok()).collect()
    }

    pub fn sources_for(&self, lang: &Language) -> Vec<&SourceSpec> {
        self.sources.iter().filter(|s| s.language == lang.code()).collect()
    }

    pub fn family_registry(&self) -> Result<FamilyRegistry, ConfigError> {
        let langs = self.language_registry()?;
        let mut reg = FamilyRegistry::default();
        for (name, members) in &self.families {
            let set = members
                .iter()
                .map(|c| langs.resolve(c).map_err(|e| ConfigError::Invalid(format!("family {name}: {e}"))))
                .collect::<Result<BTreeSet<_>, _>>()?;
            reg.register(name, set).map_err(|e: ScenarioError| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(reg)
    }

    pub fn backend(&self, id: &str) -> Result<&BackendConfig, ConfigError> {
        self.backends.iter().find(|b| b.backend_id == id).ok_or_else(|| {
            let known: Vec<&str> = self.backends.iter().map(|b| b.backend_id.as_str()).collect();
            ConfigError::Invalid(format!("unknown backend {id:?}; declared backends: {}", known.join(", ")))
        })
    }

    /// First declared backend of the given granularity.
    pub fn default_backend(&self, kind: Granularity) -> Result<&BackendConfig, ConfigError> {
        self.backends
            .iter()
            .find(|b| b.kind == kind)
            .ok_or_else(|| ConfigError::Invalid(format!("no backend of kind {kind} is declared")))
    }
}
