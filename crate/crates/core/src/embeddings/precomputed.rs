//! Sentence vectors computed offline by an external encoder.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use super::{EmbeddingError, SentenceEncoder};

#[derive(Deserialize)]
struct Row {
    text: String,
    vector: Vec<f64>,
}

/// JSON Lines store of `{"text", "vector"}` rows keyed by exact text.
#[derive(Debug, Clone)]
pub struct PrecomputedSentences {
    backend_id: String,
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl PrecomputedSentences {
    pub fn load(path: &Path, backend_id: &str) -> Result<Self, EmbeddingError> {
        let body = std::fs::read_to_string(path).map_err(|e| EmbeddingError::io(path, e))?;
        let mut vectors = HashMap::new();
        let mut dim = 0;
        for (i, line) in body.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let err = |message: String| EmbeddingError::Parse { path: path.into(), message: format!("line {}: {message}", i + 1) };
            let row: Row = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
            if dim == 0 {
                dim = row.vector.len();
            }
            if row.vector.len() != dim || dim == 0 {
                return Err(err(format!("vector has {} components, expected {dim}", row.vector.len())));
            }
            if row.vector.iter().any(|x| !x.is_finite()) {
                return Err(err("non-finite component".into()));
            }
            vectors.entry(row.text).or_insert(row.vector);
        }
        if vectors.is_empty() {
            return Err(EmbeddingError::Parse { path: path.into(), message: "no vectors".into() });
        }
        Ok(PrecomputedSentences { backend_id: backend_id.into(), dim, vectors })
    }
}

impl SentenceEncoder for PrecomputedSentences {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>, EmbeddingError> {
        self.vectors.get(text).cloned().ok_or_else(|| EmbeddingError::BackendUnavailable {
            backend_id: self.backend_id.clone(),
            reason: format!("no precomputed vector for text {text:?}"),
        })
    }
}
