//! Offline deterministic encoders.

use std::collections::HashSet;
use std::path::Path;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use super::{EmbeddingError, SentenceEncoder, TokenEncoder};

/// Unit vector drawn from ChaCha20 keyed by `SHA-256(seed_le ‖ text)`.
///
/// Each component takes the top 53 bits of one `next_u64` draw, maps them
/// to `[0, 1)` and then affinely to `[-1, 1)`, before L2 normalization.
pub fn mock_embed(text: &str, dim: usize, seed: u64) -> Vec<f64> {
    assert!(dim >= 1, "dim must be at least 1");
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(text.as_bytes());
    let mut rng = ChaCha20Rng::from_seed(h.finalize().into());
    let mut v: Vec<f64> = (0..dim)
        .map(|_| ((rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)) * 2.0 - 1.0)
        .collect();
    normalize(&mut v);
    v
}

fn normalize(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    true
}

/// Sentence vector = normalized sum of [`mock_embed`] over the whitespace
/// tokens, so texts sharing words land close together.
#[derive(Debug, Clone)]
pub struct MockSentenceEncoder {
    dim: usize,
    seed: u64,
}

impl MockSentenceEncoder {
    pub fn new(dim: usize, seed: u64) -> Self {
        MockSentenceEncoder { dim, seed }
    }
}

impl SentenceEncoder for MockSentenceEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>, EmbeddingError> {
        let mut acc = vec![0.0; self.dim];
        let mut any = false;
        for tok in text.split_whitespace() {
            any = true;
            for (a, x) in acc.iter_mut().zip(mock_embed(tok, self.dim, self.seed)) {
                *a += x;
            }
        }
        if !any {
            return Err(EmbeddingError::EmptyInput);
        }
        if !normalize(&mut acc) {
            return Ok(mock_embed(text, self.dim, self.seed));
        }
        Ok(acc)
    }
}

/// Token table over a fixed vocabulary; rows are [`mock_embed`] vectors.
#[derive(Debug, Clone)]
pub struct MockTokenEncoder {
    vocab: HashSet<String>,
    dim: usize,
    seed: u64,
}

impl MockTokenEncoder {
    pub fn new<'a, I: IntoIterator<Item = &'a str>>(words: I, dim: usize, seed: u64) -> Self {
        MockTokenEncoder { vocab: words.into_iter().map(str::to_owned).collect(), dim, seed }
    }

    /// One token per line; blank lines and `#` comments are skipped.
    pub fn from_vocab_file(path: &Path, dim: usize, seed: u64) -> Result<Self, EmbeddingError> {
        let body = std::fs::read_to_string(path).map_err(|e| EmbeddingError::io(path, e))?;
        let words = body.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        Ok(Self::new(words, dim, seed))
    }

    pub fn vocab_len(&self) -> usize {
        self.vocab.len()
    }
}

impl TokenEncoder for MockTokenEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn lookup(&self, token: &str) -> Option<Vec<f64>> {
        self.vocab.contains(token).then(|| mock_embed(token, self.dim, self.seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Spelled-out reimplementation of the generator used as an oracle.
    fn oracle(text: &str, dim: usize, seed: u64) -> Vec<f64> {
        let mut key = [0u8; 32];
        let mut bytes = seed.to_le_bytes().to_vec();
        bytes.extend_from_slice(text.as_bytes());
        key.copy_from_slice(&Sha256::digest(&bytes));
        let mut rng = ChaCha20Rng::from_seed(key);
        let raw: Vec<f64> = (0..dim)
            .map(|_| {
                let bits = rng.next_u64() >> 11;
                bits as f64 / 9007199254740992.0 * 2.0 - 1.0
            })
            .collect();
        let n: f64 = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        raw.into_iter().map(|x| x / n).collect()
    }

    #[test]
    fn deterministic_and_unit_norm() {
        assert_eq!(mock_embed("x", 4, 0), mock_embed("x", 4, 0));
        for t in ["x", "hello world", "", "سلام"] {
            let v = mock_embed(t, 1024, 0);
            let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn matches_independent_oracle() {
        for (t, d, s) in [("x", 4, 0), ("hello world", 1024, 7), ("a", 1, 3)] {
            assert_eq!(mock_embed(t, d, s), oracle(t, d, s));
        }
    }

    #[test]
    fn frozen_values() {
        let v = mock_embed("x", 4, 0);
        // Computed with an independent ChaCha20 keystream implementation.
        let expected = [-0.744263418068155, -0.2962458990448043, -0.07946922490289075, 0.5932916433913226];
        for (a, b) in v.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{v:?}");
        }
        let hw = mock_embed("hello world", 1024, 7);
        for (a, b) in hw.iter().zip([-0.012233175425707387, -0.004724269328394099, -0.04473220161865272]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn distinct_strings_give_distinct_vectors() {
        let mut seen = HashSet::new();
        for i in 0..1000 {
            let v = mock_embed(&format!("s{i}"), 1024, 0);
            let key: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
            assert!(seen.insert(key));
        }
        assert_ne!(mock_embed("a", 1024, 0), mock_embed("b", 1024, 0));
    }

    #[test]
    fn sentence_vector_is_normalized_token_sum() {
        let enc = MockSentenceEncoder::new(1024, 7);
        let got = enc.encode("hello world").unwrap();
        let (h, w) = (oracle("hello", 1024, 7), oracle("world", 1024, 7));
        let sum: Vec<f64> = h.iter().zip(&w).map(|(a, b)| a + b).collect();
        let n = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (g, s) in got.iter().zip(&sum) {
            assert!((g - s / n).abs() < 1e-12);
        }
        assert_eq!(enc.encode("x").unwrap(), oracle("x", 1024, 7));
    }
}
