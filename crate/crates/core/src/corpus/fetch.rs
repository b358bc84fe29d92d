//! Hydration of ID-only sources: resolving post IDs to their text through
//! an external lookup.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::thread;
use std::time::Duration;

use log::warn;
use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use super::CorpusError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("lookup transport failure: {0}")]
pub struct TransportError(pub String);

/// Batch id → text lookup. Ids absent from the returned map are treated as
/// unresolvable (deleted, private, ...).
pub trait TextLookup: Sync {
    fn lookup(&self, ids: &[String]) -> Result<HashMap<String, String>, TransportError>;
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub batch_size: usize,
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            batch_size: 100,
            max_attempts: 4,
            initial_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(8),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailedBatch {
    pub ids: Vec<String>,
    pub attempts: u32,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FetchResult {
    /// `None` marks an id that could not be resolved.
    pub texts: BTreeMap<String, Option<String>>,
    pub missing_count: usize,
    /// Batches that still failed after all retries; their ids are missing.
    pub failures: Vec<FailedBatch>,
}

/// Resolves `ids` in batches, retrying transport failures with exponential
/// backoff. Never fails as a whole: persistent failures are reported in
/// [`FetchResult::failures`].
pub fn fetch_texts(ids: &[String], client: &dyn TextLookup, policy: &RetryPolicy) -> FetchResult {
    let unique: Vec<String> = ids.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if unique.is_empty() {
        return FetchResult::default();
    }
    let chunks: Vec<&[String]> = unique.chunks(policy.batch_size.max(1)).collect();
    let results: Vec<Result<HashMap<String, String>, FailedBatch>> =
        chunks.par_iter().map(|chunk| fetch_batch(chunk, client, policy)).collect();

    let mut out = FetchResult::default();
    for (chunk, result) in chunks.iter().zip(results) {
        match result {
            Ok(mut found) => {
                for id in chunk.iter() {
                    out.texts.insert(id.clone(), found.remove(id));
                }
            }
            Err(failed) => {
                for id in chunk.iter() {
                    out.texts.insert(id.clone(), None);
                }
                out.failures.push(failed);
            }
        }
    }
    out.missing_count = out.texts.values().filter(|t| t.is_none()).count();
    out
}

fn fetch_batch(
    ids: &[String],
    client: &dyn TextLookup,
    policy: &RetryPolicy,
) -> Result<HashMap<String, String>, FailedBatch> {
    let mut backoff = policy.initial_backoff;
    let mut attempt = 0;
    loop {
        attempt += 1;
        match client.lookup(ids) {
            Ok(found) => return Ok(found),
            Err(e) if attempt >= policy.max_attempts.max(1) => {
                return Err(FailedBatch { ids: ids.to_vec(), attempts: attempt, error: e.0 });
            }
            Err(e) => {
                warn!("lookup attempt {attempt} failed ({e}); retrying in {backoff:?}");
                thread::sleep(backoff);
                backoff = (backoff * 2).min(policy.max_backoff);
            }
        }
    }
}

/// Lookup backed by a JSON Lines file of `{"id": ..., "text": ...}` rows,
/// e.g. a previously hydrated dump.
#[derive(Debug, Clone, Default)]
pub struct FixtureLookup {
    texts: HashMap<String, String>,
}

#[derive(Deserialize)]
struct FixtureRow {
    id: serde_json::Value,
    text: String,
}

impl FixtureLookup {
    pub fn new(texts: HashMap<String, String>) -> Self {
        FixtureLookup { texts }
    }

    pub fn from_jsonl(path: &Path) -> Result<Self, CorpusError> {
        let body = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
        let mut texts = HashMap::new();
        for (i, line) in body.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: FixtureRow = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
                path: path.to_owned(),
                line: i + 1,
                message: e.to_string(),
            })?;
            let id = match row.id {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            };
            texts.insert(id, row.text);
        }
        Ok(FixtureLookup { texts })
    }
}

impl TextLookup for FixtureLookup {
    fn lookup(&self, ids: &[String]) -> Result<HashMap<String, String>, TransportError> {
        Ok(ids
            .iter()
            .filter_map(|id| self.texts.get(id).map(|t| (id.clone(), t.clone())))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn quick() -> RetryPolicy {
        RetryPolicy {
            batch_size: 2,
            max_attempts: 3,
            initial_backoff: Duration::from_millis(1),
            max_backoff: Duration::from_millis(2),
        }
    }

    #[test]
    fn all_present() {
        let stub = FixtureLookup::new(
            [("id1".to_string(), "t1".to_string()), ("id2".to_string(), "t2".to_string())].into(),
        );
        let r = fetch_texts(&ids(&["id1", "id2"]), &stub, &quick());
        assert_eq!(r.texts["id1"].as_deref(), Some("t1"));
        assert_eq!(r.texts["id2"].as_deref(), Some("t2"));
        assert_eq!(r.missing_count, 0);
    }

    #[test]
    fn none_present() {
        let r = fetch_texts(&ids(&["id1"]), &FixtureLookup::default(), &quick());
        assert_eq!(r.texts["id1"], None);
        assert_eq!(r.missing_count, 1);
        assert!(r.failures.is_empty());
    }

    #[test]
    fn empty_input() {
        assert_eq!(fetch_texts(&[], &FixtureLookup::default(), &quick()), FetchResult::default());
    }

    struct Flaky {
        calls: AtomicU32,
        fail_first: u32,
    }

    impl TextLookup for Flaky {
        fn lookup(&self, ids: &[String]) -> Result<HashMap<String, String>, TransportError> {
            if self.calls.fetch_add(1, Ordering::SeqCst) < self.fail_first {
                return Err(TransportError("timeout".into()));
            }
            Ok(ids.iter().map(|i| (i.clone(), format!("text {i}"))).collect())
        }
    }

    #[test]
    fn transient_failures_are_retried() {
        let flaky = Flaky { calls: AtomicU32::new(0), fail_first: 2 };
        let r = fetch_texts(&ids(&["a"]), &flaky, &quick());
        assert_eq!(r.texts["a"].as_deref(), Some("text a"));
        assert_eq!(flaky.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn persistent_failure_gives_partial_result() {
        let dead = Flaky { calls: AtomicU32::new(0), fail_first: u32::MAX };
        let r = fetch_texts(&ids(&["a", "b", "c"]), &dead, &quick());
        assert_eq!(r.missing_count, 3);
        assert_eq!(r.failures.len(), 2);
        assert!(r.failures.iter().all(|f| f.attempts == 3));
    }

    #[test]
    fn order_independent() {
        let stub = FixtureLookup::new([("x".to_string(), "1".to_string())].into());
        let a = fetch_texts(&ids(&["x", "y", "x"]), &stub, &quick());
        let b = fetch_texts(&ids(&["y", "x"]), &stub, &quick());
        assert_eq!(a, b);
    }
}
