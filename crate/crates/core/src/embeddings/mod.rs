//! Text encoders: the function E in `X = E(S)`.
//!
//! Three granularities exist. Sentence encoders map a text to one fixed
//! vector, token encoders map each whitespace token to a row, and
//! `raw_tokens` backends hand uncleaned text to a model that tokenizes it
//! itself. Every backend is pure: the same `(backend_id, text)` always
//! yields the same output.

mod cache;
mod mock;
mod precomputed;
mod vectors;

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::Matrix;

pub use cache::EmbeddingCache;
pub use mock::{mock_embed, MockSentenceEncoder, MockTokenEncoder};
pub use precomputed::PrecomputedSentences;
pub use vectors::WordVectors;

pub const SENTENCE_DIM: usize = 1024;
pub const TOKEN_DIM: usize = 300;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error(
        "embedding backend {backend_id} is unavailable: {reason}; \
         declare a backend with provider = \"mock\" to run offline"
    )]
    BackendUnavailable { backend_id: String, reason: String },
    #[error("backend {backend_id} has granularity {found}, expected {expected}")]
    WrongGranularity { backend_id: String, expected: Granularity, found: Granularity },
    #[error("cannot embed empty input")]
    EmptyInput,
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid backend declaration {backend_id}: {reason}")]
    InvalidConfig { backend_id: String, reason: String },
}

impl EmbeddingError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EmbeddingError::Io { path: path.into(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Sentence,
    Token,
    RawTokens,
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::Sentence => "sentence",
            Granularity::Token => "token",
            Granularity::RawTokens => "raw_tokens",
        })
    }
}

/// Maps a whole text to one vector of length [`SentenceEncoder::dim`].
pub trait SentenceEncoder: Send + Sync {
    fn dim(&self) -> usize;
    fn encode(&self, text: &str) -> Result<Vec<f64>, EmbeddingError>;
}

/// Per-token lookup table; `None` means out of vocabulary.
pub trait TokenEncoder: Send + Sync {
    fn dim(&self) -> usize;
    fn lookup(&self, token: &str) -> Option<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provider {
    /// Deterministic hash-seeded vectors, no files needed.
    Mock,
    /// Vectors or checkpoints loaded from `model_path`.
    File,
}

/// One `[[backends]]` entry of the framework configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub backend_id: String,
    pub kind: Granularity,
    #[serde(default = "default_provider")]
    pub provider: Provider,
    #[serde(default)]
    pub model_path: Option<PathBuf>,
    #[serde(default)]
    pub dim: Option<usize>,
    /// Seed of the mock generator.
    #[serde(default)]
    pub seed: u64,
    /// Vocabulary file (one token per line) for the mock token backend.
    #[serde(default)]
    pub vocab_path: Option<PathBuf>,
}

fn default_provider() -> Provider {
    Provider::File
}

impl BackendConfig {
    pub fn declared_dim(&self) -> Option<usize> {
        match self.kind {
            Granularity::Sentence => Some(self.dim.unwrap_or(SENTENCE_DIM)),
            Granularity::Token => Some(self.dim.unwrap_or(TOKEN_DIM)),
            Granularity::RawTokens => None,
        }
    }

    fn unavailable(&self, reason: impl Into<String>) -> EmbeddingError {
        EmbeddingError::BackendUnavailable { backend_id: self.backend_id.clone(), reason: reason.into() }
    }

    fn existing_path(&self, base: &Path, p: Option<&PathBuf>, what: &str) -> Result<PathBuf, EmbeddingError> {
        let p = p.ok_or_else(|| self.unavailable(format!("no {what} declared")))?;
        let p = base.join(p);
        if !p.exists() {
            return Err(self.unavailable(format!("{} does not exist", p.display())));
        }
        Ok(p)
    }

    /// Loads the backend; relative paths resolve against `base`.
    pub fn load(&self, base: &Path) -> Result<Backend, EmbeddingError> {
        let dim = self.declared_dim();
        if dim == Some(0) {
            return Err(EmbeddingError::InvalidConfig {
                backend_id: self.backend_id.clone(),
                reason: "dim must be positive".into(),
            });
        }
        let id = self.backend_id.clone();
        let inner = match (self.kind, self.provider) {
            (Granularity::Sentence, Provider::Mock) => {
                BackendInner::Sentence(Arc::new(MockSentenceEncoder::new(dim.unwrap(), self.seed)))
            }
            (Granularity::Sentence, Provider::File) => {
                let path = self.existing_path(base, self.model_path.as_ref(), "model_path")?;
                let store = PrecomputedSentences::load(&path, &id)?;
                if store.dim() != dim.unwrap() {
                    return Err(EmbeddingError::InvalidConfig {
                        backend_id: id,
                        reason: format!("declared dim {} but {} holds {}-d vectors", dim.unwrap(), path.display(), store.dim()),
                    });
                }
                BackendInner::Sentence(Arc::new(store))
            }
            (Granularity::Token, Provider::Mock) => {
                let path = self.existing_path(base, self.vocab_path.as_ref(), "vocab_path")?;
                BackendInner::Token(Arc::new(MockTokenEncoder::from_vocab_file(&path, dim.unwrap(), self.seed)?))
            }
            (Granularity::Token, Provider::File) => {
                let path = self.existing_path(base, self.model_path.as_ref(), "model_path")?;
                let vectors = WordVectors::load(&path)?;
                if vectors.dim() != dim.unwrap() {
                    return Err(EmbeddingError::InvalidConfig {
                        backend_id: id,
                        reason: format!("declared dim {} but {} holds {}-d vectors", dim.unwrap(), path.display(), vectors.dim()),
                    });
                }
                BackendInner::Token(Arc::new(vectors))
            }
            (Granularity::RawTokens, Provider::File) => {
                let path = self.existing_path(base, self.model_path.as_ref(), "model_path")?;
                BackendInner::RawTokens { model_path: path }
            }
            (Granularity::RawTokens, Provider::Mock) => {
                return Err(self.unavailable("raw_tokens backends need a checkpoint directory (provider = \"file\")"))
            }
        };
        Ok(Backend { id, inner })
    }
}

#[derive(Clone)]
enum BackendInner {
    Sentence(Arc<dyn SentenceEncoder>),
    Token(Arc<dyn TokenEncoder>),
    RawTokens { model_path: PathBuf },
}

/// A loaded, read-only encoder. Cheap to clone and safe to share.
#[derive(Clone)]
pub struct Backend {
    id: String,
    inner: BackendInner,
}

impl fmt::Debug for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Backend").field("id", &self.id).field("granularity", &self.granularity()).finish()
    }
}

impl Backend {
    pub fn sentence(id: impl Into<String>, encoder: Arc<dyn SentenceEncoder>) -> Self {
        Backend { id: id.into(), inner: BackendInner::Sentence(encoder) }
    }

    pub fn token(id: impl Into<String>, encoder: Arc<dyn TokenEncoder>) -> Self {
        Backend { id: id.into(), inner: BackendInner::Token(encoder) }
    }

    pub fn raw_tokens(id: impl Into<String>, model_path: PathBuf) -> Self {
        Backend { id: id.into(), inner: BackendInner::RawTokens { model_path } }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn granularity(&self) -> Granularity {
        match self.inner {
            BackendInner::Sentence(_) => Granularity::Sentence,
            BackendInner::Token(_) => Granularity::Token,
            BackendInner::RawTokens { .. } => Granularity::RawTokens,
        }
    }

    /// Vector width; `None` for `raw_tokens`.
    pub fn dim(&self) -> Option<usize> {
        match &self.inner {
            BackendInner::Sentence(e) => Some(e.dim()),
            BackendInner::Token(e) => Some(e.dim()),
            BackendInner::RawTokens { .. } => None,
        }
    }

    /// Checkpoint directory of a `raw_tokens` backend.
    pub fn model_path(&self) -> Option<&Path> {
        match &self.inner {
            BackendInner::RawTokens { model_path } => Some(model_path),
            _ => None,
        }
    }

    fn wrong(&self, expected: Granularity) -> EmbeddingError {
        EmbeddingError::WrongGranularity { backend_id: self.id.clone(), expected, found: self.granularity() }
    }
}

/// Sentence vector of `text`.
pub fn embed_sentence(text: &str, backend: &Backend) -> Result<Vec<f64>, EmbeddingError> {
    let BackendInner::Sentence(enc) = &backend.inner else {
        return Err(backend.wrong(Granularity::Sentence));
    };
    if text.trim().is_empty() {
        return Err(EmbeddingError::EmptyInput);
    }
    let v = enc.encode(text)?;
    debug_assert_eq!(v.len(), enc.dim());
    Ok(v)
}

/// `T × dim` matrix whose row `i` embeds `tokens[i]`; unknown tokens get a
/// zero row. Truncation and padding are left to the caller.
pub fn embed_tokens<S: AsRef<str>>(tokens: &[S], backend: &Backend) -> Result<Matrix, EmbeddingError> {
    let BackendInner::Token(enc) = &backend.inner else {
        return Err(backend.wrong(Granularity::Token));
    };
    if tokens.is_empty() {
        return Err(EmbeddingError::EmptyInput);
    }
    let mut m = Matrix::zeros((tokens.len(), enc.dim()));
    for (i, t) in tokens.iter().enumerate() {
        if let Some(v) = enc.lookup(t.as_ref()) {
            m.row_mut(i).assign(&ndarray::ArrayView1::from(&v[..]));
        }
    }
    Ok(m)
}

/// Cached variant of [`embed_sentence`]; without a cache it just computes.
pub fn cached_sentence(
    text: &str,
    backend: &Backend,
    cache: Option<&EmbeddingCache>,
) -> Result<Vec<f64>, EmbeddingError> {
    match cache {
        None => embed_sentence(text, backend),
        Some(c) => {
            let m = c.get_or_compute(backend.id(), text, || {
                let v = embed_sentence(text, backend)?;
                Ok(Matrix::from_shape_vec((1, v.len()), v).expect("row shape"))
            })?;
            Ok(m.into_raw_vec_and_offset().0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mock_sentence() -> Backend {
        BackendConfig {
            backend_id: "mock-s".into(),
            kind: Granularity::Sentence,
            provider: Provider::Mock,
            model_path: None,
            dim: None,
            seed: 7,
            vocab_path: None,
        }
        .load(Path::new("."))
        .unwrap()
    }

    fn mock_token(words: &[&str]) -> Backend {
        Backend::token("mock-t", Arc::new(MockTokenEncoder::new(words.iter().copied(), TOKEN_DIM, 1)))
    }

    #[test]
    fn sentence_dim_and_purity() {
        let b = mock_sentence();
        let v = embed_sentence("hello world", &b).unwrap();
        assert_eq!(v.len(), 1024);
        assert_eq!(v, embed_sentence("hello world", &b).unwrap());
        assert!(v.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn empty_text_is_rejected() {
        assert!(matches!(embed_sentence("  ", &mock_sentence()), Err(EmbeddingError::EmptyInput)));
        let empty: [&str; 0] = [];
        assert!(matches!(embed_tokens(&empty, &mock_token(&["a"])), Err(EmbeddingError::EmptyInput)));
    }

    #[test]
    fn token_rows_and_oov() {
        let b = mock_token(&["cat", "a", "b", "c"]);
        let m = embed_tokens(&["cat"], &b).unwrap();
        assert_eq!(m.dim(), (1, 300));
        assert!(m.iter().any(|&x| x != 0.0));
        let z = embed_tokens(&["zzzqqq_unseen"], &b).unwrap();
        assert_eq!(z.dim(), (1, 300));
        assert!(z.iter().all(|&x| x == 0.0));
        assert_eq!(embed_tokens(&["a", "b", "c"], &b).unwrap().dim(), (3, 300));
    }

    #[test]
    fn granularity_mismatch_is_an_error() {
        assert!(matches!(embed_tokens(&["a"], &mock_sentence()), Err(EmbeddingError::WrongGranularity { .. })));
    }

    #[test]
    fn missing_model_file_is_unavailable() {
        let cfg = BackendConfig {
            backend_id: "laser".into(),
            kind: Granularity::Sentence,
            provider: Provider::File,
            model_path: Some("does/not/exist.jsonl".into()),
            dim: None,
            seed: 0,
            vocab_path: None,
        };
        let err = cfg.load(Path::new("/nonexistent")).unwrap_err();
        assert!(matches!(err, EmbeddingError::BackendUnavailable { .. }));
        assert!(err.to_string().contains("mock"));
    }

    #[test]
    fn cache_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cache = EmbeddingCache::open(dir.path()).unwrap();
        let b = mock_sentence();
        let a = cached_sentence("hello world", &b, Some(&cache)).unwrap();
        let hit = cached_sentence("hello world", &b, Some(&cache)).unwrap();
        assert_eq!(a, hit);
        assert_eq!(a, embed_sentence("hello world", &b).unwrap());
        assert_eq!(cache.len(), 1);
    }

    proptest::proptest! {
        #[test]
        fn sentence_dimension_contract(text in "\\PC{1,40}") {
            proptest::prop_assume!(!text.trim().is_empty());
            let v = embed_sentence(&text, &mock_sentence()).unwrap();
            proptest::prop_assert_eq!(v.len(), SENTENCE_DIM);
            proptest::prop_assert!(v.iter().all(|x| x.is_finite()));
        }

        #[test]
        fn token_dimension_contract(tokens in proptest::collection::vec("[a-z]{1,6}", 1..10)) {
            let m = embed_tokens(&tokens, &mock_token(&["ab", "cd"])).unwrap();
            proptest::prop_assert_eq!(m.dim(), (tokens.len(), TOKEN_DIM));
        }
    }
}
