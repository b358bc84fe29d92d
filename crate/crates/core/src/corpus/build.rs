//! Merges all sources of one language into a canonical corpus.

use std::collections::{BTreeMap, HashSet};

use log::warn;
use rayon::prelude::*;

use super::rules::{unify_labels, LabelMappingRule, Unified};
use super::stats::{compute_stats, CorpusStats};
use super::translit::{transliterate, Scheme};
use super::{clean_text, CorpusError, RawRecord, Record, Split};
use crate::lang::Language;

/// One source's raw rows together with how to read them.
#[derive(Debug, Clone)]
pub struct SourceBatch {
    pub rule: LabelMappingRule,
    pub text_column: String,
    pub records: Vec<RawRecord>,
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    /// Keep the untouched source text in [`Record::raw`].
    pub keep_raw: bool,
    /// Drop records whose cleaned text already occurred (first one wins).
    pub dedup: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { keep_raw: true, dedup: false }
    }
}

#[derive(Debug, Clone)]
pub struct BuiltCorpus {
    pub records: Vec<Record>,
    pub stats: CorpusStats,
    /// Source-script characters that had no transliteration entry.
    pub transliteration_warnings: usize,
}

enum Outcome {
    Kept(Record, usize),
    Dropped(usize),
}

fn process(
    raw: &RawRecord,
    batch: &SourceBatch,
    scheme: Option<Scheme>,
    stopwords: &HashSet<String>,
    keep_raw: bool,
) -> Result<Outcome, CorpusError> {
    let label = match unify_labels(raw, &batch.rule)? {
        Unified::Label(l) => l,
        Unified::Reject => return Ok(Outcome::Dropped(0)),
    };
    let original = raw.column(&batch.text_column)?;
    let (romanized, warnings) = match scheme {
        Some(s) => {
            let t = transliterate(original, s);
            (t.text, t.unmapped)
        }
        None => (original.to_owned(), 0),
    };
    let text = clean_text(&romanized, stopwords);
    if text.is_empty() {
        return Ok(Outcome::Dropped(warnings));
    }
    Ok(Outcome::Kept(
        Record {
            text,
            label,
            language: raw.language.clone(),
            source_id: raw.source_id.clone(),
            split: Split::Unassigned,
            raw: keep_raw.then(|| original.to_owned()),
        },
        warnings,
    ))
}

/// Unifies labels, transliterates (ar/hi), cleans and merges every source
/// of `language`. Output order follows the input order of sources and rows.
pub fn build_language_corpus(
    sources: &[SourceBatch],
    language: &Language,
    stopwords: &HashSet<String>,
    options: BuildOptions,
) -> Result<BuiltCorpus, CorpusError> {
    let scheme = Scheme::for_language(language.code());
    let mut records = Vec::new();
    let mut dropped: BTreeMap<String, usize> = BTreeMap::new();
    let mut warnings = 0;
    let mut seen = HashSet::new();

    for batch in sources {
        let source_id = &batch.rule.source_id;
        dropped.entry(source_id.clone()).or_insert(0);
        if let Some(r) = batch.records.iter().find(|r| &r.language != language) {
            return Err(CorpusError::LanguageMismatch {
                source_id: r.source_id.clone(),
                expected: language.to_string(),
                found: r.language.to_string(),
            });
        }
        let outcomes: Vec<Outcome> = batch
            .records
            .par_iter()
            .map(|raw| process(raw, batch, scheme, stopwords, options.keep_raw))
            .collect::<Result<_, _>>()?;
        for outcome in outcomes {
            match outcome {
                Outcome::Kept(record, w) => {
                    warnings += w;
                    if options.dedup && !seen.insert(record.text.clone()) {
                        *dropped.get_mut(source_id).expect("entry inserted above") += 1;
                        continue;
                    }
                    records.push(record);
                }
                Outcome::Dropped(w) => {
                    warnings += w;
                    *dropped.get_mut(source_id).expect("entry inserted above") += 1;
                }
            }
        }
    }
    if warnings > 0 {
        warn!("{language}: {warnings} characters had no transliteration entry");
    }
    if records.is_empty() {
        return Err(CorpusError::EmptyCorpus(language.to_string()));
    }
    let stats = compute_stats(&records)?.with_drops(&dropped);
    Ok(BuiltCorpus { records, stats, transliteration_warnings: warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::rules::RuleKind;
    use crate::corpus::Label;

    fn raw(lang: &str, source: &str, text: &str, label: &str) -> RawRecord {
        let mut p = BTreeMap::new();
        p.insert("text".to_string(), text.to_string());
        p.insert("label".to_string(), label.to_string());
        RawRecord::new(source, p, Language::new(lang).unwrap()).unwrap()
    }

    fn batch(source: &str, rows: Vec<RawRecord>) -> SourceBatch {
        SourceBatch {
            rule: LabelMappingRule::new(source, RuleKind::CategoryMap, &["label"])
                .positive(&["hate"])
                .negative(&["none"])
                .reject(&["skip"])
                .validated()
                .unwrap(),
            text_column: "text".into(),
            records: rows,
        }
    }

    #[test]
    fn counts_rejected_records() {
        let rows = vec![
            raw("en", "s1", "first post", "hate"),
            raw("en", "s1", "second post", "none"),
            raw("en", "s1", "third post", "skip"),
            raw("en", "s1", "fourth post", "none"),
        ];
        let en = Language::new("en").unwrap();
        let built = build_language_corpus(&[batch("s1", rows)], &en, &HashSet::new(), BuildOptions::default())
            .unwrap();
        assert_eq!(built.stats.n_examples, 3);
        assert_eq!(built.stats.n_dropped, 1);
        assert_eq!(built.stats.per_source_counts["s1"], 4);
        let texts: Vec<&str> = built.records.iter().map(|r| r.text.as_str()).collect();
        assert_eq!(texts, ["first post", "second post", "fourth post"]);
        assert_eq!(built.records[0].raw.as_deref(), Some("first post"));
    }

    #[test]
    fn empty_after_cleaning_is_dropped() {
        let rows = vec![raw("en", "s", "\u{1F600}\u{1F600}", "hate"), raw("en", "s", "ok", "none")];
        let en = Language::new("en").unwrap();
        let built =
            build_language_corpus(&[batch("s", rows)], &en, &HashSet::new(), BuildOptions::default()).unwrap();
        assert_eq!(built.stats.n_examples, 1);
        assert_eq!(built.stats.n_dropped, 1);
    }

    #[test]
    fn arabic_is_transliterated_before_filtering() {
        let rows = vec![raw("ar", "lev", "سلام عليكم", "hate")];
        let ar = Language::new("ar").unwrap();
        let built =
            build_language_corpus(&[batch("lev", rows)], &ar, &HashSet::new(), BuildOptions::default()).unwrap();
        assert_eq!(built.records[0].text, "slam elykm");
        assert_eq!(built.records[0].label, Label::Hate);
        assert_eq!(built.records[0].raw.as_deref(), Some("سلام عليكم"));
    }

    #[test]
    fn all_rejected_is_empty_corpus() {
        let rows = vec![raw("en", "s", "x", "skip")];
        let en = Language::new("en").unwrap();
        let err = build_language_corpus(&[batch("s", rows)], &en, &HashSet::new(), BuildOptions::default())
            .unwrap_err();
        assert!(matches!(err, CorpusError::EmptyCorpus(_)));
    }

    #[test]
    fn dedup_when_enabled() {
        let rows = vec![raw("en", "s", "same", "hate"), raw("en", "s", "SAME", "none")];
        let en = Language::new("en").unwrap();
        let opts = BuildOptions { keep_raw: false, dedup: true };
        let built = build_language_corpus(&[batch("s", rows.clone())], &en, &HashSet::new(), opts).unwrap();
        assert_eq!(built.stats.n_examples, 1);
        assert_eq!(built.records[0].raw, None);
        let built =
            build_language_corpus(&[batch("s", rows)], &en, &HashSet::new(), BuildOptions::default()).unwrap();
        assert_eq!(built.stats.n_examples, 2);
    }

    #[test]
    fn foreign_language_source_rejected() {
        let rows = vec![raw("de", "s", "x", "hate")];
        let en = Language::new("en").unwrap();
        assert!(matches!(
            build_language_corpus(&[batch("s", rows)], &en, &HashSet::new(), BuildOptions::default()),
            Err(CorpusError::LanguageMismatch { .. })
        ));
    }
}
