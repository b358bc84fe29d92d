//! Per-language corpus statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CorpusError, Label, Record};
use crate::lang::Language;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub language: Language,
    pub n_examples: usize,
    pub n_hate: usize,
    pub hate_fraction: f64,
    /// Input rows per source, including dropped ones.
    pub per_source_counts: BTreeMap<String, usize>,
    pub n_dropped: usize,
}

/// Statistics over surviving records; `n_dropped` starts at zero.
pub fn compute_stats(records: &[Record]) -> Result<CorpusStats, CorpusError> {
    let first = records.first().ok_or_else(|| CorpusError::EmptyCorpus("<none>".into()))?;
    let language = first.language.clone();
    let mut per_source_counts = BTreeMap::new();
    let mut n_hate = 0;
    for r in records {
        if r.language != language {
            return Err(CorpusError::LanguageMismatch {
                source_id: r.source_id.clone(),
                expected: language.to_string(),
                found: r.language.to_string(),
            });
        }
        *per_source_counts.entry(r.source_id.clone()).or_insert(0) += 1;
        if r.label == Label::Hate {
            n_hate += 1;
        }
    }
    let n_examples = records.len();
    Ok(CorpusStats {
        language,
        n_examples,
        n_hate,
        hate_fraction: n_hate as f64 / n_examples as f64,
        per_source_counts,
        n_dropped: 0,
    })
}

impl CorpusStats {
    /// Folds per-source drop counts into the statistics.
    pub fn with_drops(mut self, dropped: &BTreeMap<String, usize>) -> Self {
        for (source, n) in dropped {
            *self.per_source_counts.entry(source.clone()).or_insert(0) += n;
            self.n_dropped += n;
        }
        self
    }
}

/// Published per-language totals of the original full-size collections:
/// (language, examples, hate fraction rounded to two decimals).
pub const REFERENCE_TOTALS: [(&str, usize, f64); 11] = [
    ("en", 65553, 0.35),
    ("de", 5568, 0.26),
    ("fr", 1033, 0.75),
    ("es", 10080, 0.42),
    ("it", 9692, 0.28),
    ("da", 2619, 0.12),
    ("ar", 3293, 0.51),
    ("tr", 27832, 0.19),
    ("pt", 4534, 0.33),
    ("hi", 12000, 0.36),
    ("id", 11104, 0.41),
];

/// Published grand total. It exceeds the sum of the per-language rows
/// (153308) by 3875; both are kept so drift reports can show either.
pub const REFERENCE_GRAND_TOTAL: usize = 157183;

/// Difference between a built corpus and its published reference size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceDrift {
    pub language: Language,
    pub expected_examples: usize,
    pub actual_examples: usize,
    pub expected_hate_fraction: f64,
    pub actual_hate_fraction: f64,
}

impl ReferenceDrift {
    pub fn matches(&self) -> bool {
        self.expected_examples == self.actual_examples
            && (self.actual_hate_fraction - self.expected_hate_fraction).abs() < 0.005
    }
}

pub fn reference_drift(stats: &CorpusStats) -> Option<ReferenceDrift> {
    REFERENCE_TOTALS.iter().find(|(l, _, _)| *l == stats.language.code()).map(|&(_, n, f)| {
        ReferenceDrift {
            language: stats.language.clone(),
            expected_examples: n,
            actual_examples: stats.n_examples,
            expected_hate_fraction: f,
            actual_hate_fraction: stats.hate_fraction,
        }
    })
}
