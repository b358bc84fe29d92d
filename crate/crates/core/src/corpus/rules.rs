//! Per-source recipes that collapse heterogeneous annotation schemes to a
//! binary label.
//!
//! Raw annotation values are compared after trimming and ASCII
//! lowercasing. A rule must be total: every value it meets has to fall in
//! exactly one of the positive, negative or reject sets, otherwise
//! [`unify_labels`] fails with [`CorpusError::RuleCoverage`].

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{CorpusError, Label, RawRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    /// The column already carries the binary label.
    BinaryPassthrough,
    /// One categorical column; each category maps to hate, not-hate or reject.
    CategoryMap,
    /// Multi-valued attribute columns (e.g. `hateful_normal`); any hateful
    /// value yields 1, otherwise any normal value yields 0.
    MultiAttribute,
    /// One column per annotator; the majority vote wins.
    AnnotatorVote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    #[default]
    ToZero,
    ToOne,
    Drop,
}

/// Outcome of label unification for one raw record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unified {
    Label(Label),
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMappingRule {
    #[serde(default)]
    pub source_id: String,
    pub kind: RuleKind,
    /// Annotation columns the rule reads.
    pub columns: Vec<String>,
    #[serde(default)]
    pub positive_values: BTreeSet<String>,
    #[serde(default)]
    pub negative_values: BTreeSet<String>,
    /// Values that exclude the record (or, for votes, count as abstentions).
    #[serde(default)]
    pub reject_values: BTreeSet<String>,
    #[serde(default)]
    pub tie_policy: TiePolicy,
    /// Separator between values of a multi-attribute cell.
    #[serde(default = "default_separator")]
    pub separator: String,
}

fn default_separator() -> String {
    "_".to_owned()
}

fn norm(v: &str) -> String {
    v.trim().to_ascii_lowercase()
}

impl LabelMappingRule {
    pub fn new(source_id: impl Into<String>, kind: RuleKind, columns: &[&str]) -> Self {
        LabelMappingRule {
            source_id: source_id.into(),
            kind,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            positive_values: BTreeSet::new(),
            negative_values: BTreeSet::new(),
            reject_values: BTreeSet::new(),
            tie_policy: TiePolicy::default(),
            separator: default_separator(),
        }
    }

    pub fn positive(mut self, values: &[&str]) -> Self {
        self.positive_values.extend(values.iter().map(|v| norm(v)));
        self
    }

    pub fn negative(mut self, values: &[&str]) -> Self {
        self.negative_values.extend(values.iter().map(|v| norm(v)));
        self
    }

    pub fn reject(mut self, values: &[&str]) -> Self {
        self.reject_values.extend(values.iter().map(|v| norm(v)));
        self
    }

    pub fn ties(mut self, policy: TiePolicy) -> Self {
        self.tie_policy = policy;
        self
    }

    /// Normalizes value sets and checks structural invariants.
    pub fn validated(mut self) -> Result<Self, CorpusError> {
        let invalid = |reason: String| CorpusError::InvalidRule {
            source_id: self.source_id.clone(),
            reason,
        };
        if self.columns.is_empty() {
            return Err(invalid("no annotation columns".into()));
        }
        if matches!(self.kind, RuleKind::BinaryPassthrough | RuleKind::CategoryMap)
            && self.columns.len() != 1
        {
            return Err(invalid(format!("{:?} reads exactly one column", self.kind)));
        }
        if self.kind == RuleKind::MultiAttribute && self.separator.is_empty() {
            return Err(invalid("empty multi-attribute separator".into()));
        }
        if self.kind == RuleKind::BinaryPassthrough
            && self.positive_values.is_empty()
            && self.negative_values.is_empty()
        {
            self.positive_values.insert("1".into());
            self.negative_values.insert("0".into());
        }
        let n = |s: &BTreeSet<String>| s.iter().map(|v| norm(v)).collect::<BTreeSet<_>>();
        self.positive_values = n(&self.positive_values);
        self.negative_values = n(&self.negative_values);
        self.reject_values = n(&self.reject_values);
        let sets = [
            ("positive", &self.positive_values),
            ("negative", &self.negative_values),
            ("reject", &self.reject_values),
        ];
        for (i, (na, a)) in sets.iter().enumerate() {
            for (nb, b) in &sets[i + 1..] {
                if let Some(v) = a.intersection(b).next() {
                    return Err(invalid(format!("value {v:?} is both {na} and {nb}")));
                }
            }
        }
        Ok(self)
    }

    fn classify(&self, column: &str, value: &str) -> Result<Option<Label>, CorpusError> {
        let v = norm(value);
        if self.positive_values.contains(&v) {
            Ok(Some(Label::Hate))
        } else if self.negative_values.contains(&v) {
            Ok(Some(Label::NotHate))
        } else if self.reject_values.contains(&v) {
            Ok(None)
        } else {
            Err(CorpusError::RuleCoverage {
                source_id: self.source_id.clone(),
                column: column.to_owned(),
                value: value.to_owned(),
            })
        }
    }

    fn attribute_values<'a>(&self, cell: &'a str) -> Vec<String> {
        let trimmed = cell.trim();
        if trimmed.starts_with('[') {
            if let Ok(items) = serde_json::from_str::<Vec<String>>(trimmed) {
                return items.into_iter().filter(|s| !s.trim().is_empty()).collect();
            }
        }
        trimmed
            .split(self.separator.as_str())
            .filter(|s| !s.trim().is_empty())
            .map(str::to_owned)
            .collect()
    }
}

/// Resolves one raw record to a binary label or a rejection.
pub fn unify_labels(raw: &RawRecord, rule: &LabelMappingRule) -> Result<Unified, CorpusError> {
    if raw.source_id != rule.source_id {
        return Err(CorpusError::SourceMismatch {
            rule: rule.source_id.clone(),
            record: raw.source_id.clone(),
        });
    }
    match rule.kind {
        RuleKind::BinaryPassthrough | RuleKind::CategoryMap => {
            let col = &rule.columns[0];
            let value = raw.column(col)?;
            Ok(rule.classify(col, value)?.map_or(Unified::Reject, Unified::Label))
        }
        RuleKind::MultiAttribute => {
            let (mut any_hate, mut any_normal) = (false, false);
            for col in &rule.columns {
                for v in rule.attribute_values(raw.column(col)?) {
                    match rule.classify(col, &v)? {
                        Some(Label::Hate) => any_hate = true,
                        Some(Label::NotHate) => any_normal = true,
                        None => {}
                    }
                }
            }
            Ok(if any_hate {
                Unified::Label(Label::Hate)
            } else if any_normal {
                Unified::Label(Label::NotHate)
            } else {
                Unified::Reject
            })
        }
        RuleKind::AnnotatorVote => {
            let (mut hate, mut not_hate) = (0usize, 0usize);
            for col in &rule.columns {
                match rule.classify(col, raw.column(col)?)? {
                    Some(Label::Hate) => hate += 1,
                    Some(Label::NotHate) => not_hate += 1,
                    None => {}
                }
            }
            Ok(if hate + not_hate == 0 {
                Unified::Reject
            } else if hate > not_hate {
                Unified::Label(Label::Hate)
            } else if not_hate > hate {
                Unified::Label(Label::NotHate)
            } else {
                match rule.tie_policy {
                    TiePolicy::ToZero => Unified::Label(Label::NotHate),
                    TiePolicy::ToOne => Unified::Label(Label::Hate),
                    TiePolicy::Drop => Unified::Reject,
                }
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::Language;
    use std::collections::BTreeMap;

    fn raw(source: &str, cols: &[(&str, &str)]) -> RawRecord {
        let payload: BTreeMap<String, String> =
            cols.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        RawRecord::new(source, payload, Language::new("en").unwrap()).unwrap()
    }

    fn ousidhoum_rule() -> LabelMappingRule {
        LabelMappingRule::new("ousidhoum", RuleKind::MultiAttribute, &["sentiment"])
            .positive(&["hateful"])
            .negative(&["normal", "offensive", "abusive", "fearful", "disrespectful"])
            .validated()
            .unwrap()
    }

    #[test]
    fn multi_attribute_hateful_sentiment_is_hate() {
        let r = raw("ousidhoum", &[("tweet", "x"), ("sentiment", "hateful_normal")]);
        assert_eq!(unify_labels(&r, &ousidhoum_rule()).unwrap(), Unified::Label(Label::Hate));
        let r = raw("ousidhoum", &[("sentiment", "offensive_hateful")]);
        assert_eq!(unify_labels(&r, &ousidhoum_rule()).unwrap(), Unified::Label(Label::Hate));
    }

    #[test]
    fn multi_attribute_normal_sentiment_is_not_hate() {
        let r = raw("ousidhoum", &[("sentiment", "normal")]);
        assert_eq!(unify_labels(&r, &ousidhoum_rule()).unwrap(), Unified::Label(Label::NotHate));
        let r = raw("ousidhoum", &[("sentiment", r#"["disrespectful","normal"]"#)]);
        assert_eq!(unify_labels(&r, &ousidhoum_rule()).unwrap(), Unified::Label(Label::NotHate));
    }

    #[test]
    fn binary_passthrough_is_identity() {
        let rule = LabelMappingRule::new("s", RuleKind::BinaryPassthrough, &["label"])
            .validated()
            .unwrap();
        assert_eq!(
            unify_labels(&raw("s", &[("label", "0")]), &rule).unwrap(),
            Unified::Label(Label::NotHate)
        );
        assert_eq!(
            unify_labels(&raw("s", &[("label", " 1 ")]), &rule).unwrap(),
            Unified::Label(Label::Hate)
        );
    }

    #[test]
    fn annotator_tie_follows_policy() {
        let base = LabelMappingRule::new("ross", RuleKind::AnnotatorVote, &["expert1", "expert2"])
            .positive(&["hate"])
            .negative(&["no-hate"]);
        let r = raw("ross", &[("expert1", "hate"), ("expert2", "no-hate")]);
        let zero = base.clone().ties(TiePolicy::ToZero).validated().unwrap();
        assert_eq!(unify_labels(&r, &zero).unwrap(), Unified::Label(Label::NotHate));
        let one = base.clone().ties(TiePolicy::ToOne).validated().unwrap();
        assert_eq!(unify_labels(&r, &one).unwrap(), Unified::Label(Label::Hate));
        let drop = base.ties(TiePolicy::Drop).validated().unwrap();
        assert_eq!(unify_labels(&r, &drop).unwrap(), Unified::Reject);
    }

    #[test]
    fn annotator_majority_and_abstention() {
        let rule = LabelMappingRule::new("v", RuleKind::AnnotatorVote, &["a", "b", "c"])
            .positive(&["yes"])
            .negative(&["no"])
            .reject(&[""])
            .validated()
            .unwrap();
        let r = raw("v", &[("a", "yes"), ("b", "yes"), ("c", "no")]);
        assert_eq!(unify_labels(&r, &rule).unwrap(), Unified::Label(Label::Hate));
        let r = raw("v", &[("a", ""), ("b", ""), ("c", "no")]);
        assert_eq!(unify_labels(&r, &rule).unwrap(), Unified::Label(Label::NotHate));
        let r = raw("v", &[("a", ""), ("b", ""), ("c", "")]);
        assert_eq!(unify_labels(&r, &rule).unwrap(), Unified::Reject);
    }

    #[test]
    fn category_map_with_reject() {
        let rule = LabelMappingRule::new("lev", RuleKind::CategoryMap, &["class"])
            .positive(&["hate"])
            .negative(&["normal", "abusive"])
            .reject(&["unclear"])
            .validated()
            .unwrap();
        assert_eq!(
            unify_labels(&raw("lev", &[("class", "Hate")]), &rule).unwrap(),
            Unified::Label(Label::Hate)
        );
        assert_eq!(unify_labels(&raw("lev", &[("class", "unclear")]), &rule).unwrap(), Unified::Reject);
    }

    #[test]
    fn missing_column_names_source_and_column() {
        let rule = ousidhoum_rule();
        let err = unify_labels(&raw("ousidhoum", &[("tweet", "x")]), &rule).unwrap_err();
        match err {
            CorpusError::MissingColumn { source_id, column } => {
                assert_eq!(source_id, "ousidhoum");
                assert_eq!(column, "sentiment");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn uncovered_value_is_coverage_error() {
        let rule = ousidhoum_rule();
        let err = unify_labels(&raw("ousidhoum", &[("sentiment", "sarcastic")]), &rule).unwrap_err();
        assert!(matches!(err, CorpusError::RuleCoverage { ref value, .. } if value == "sarcastic"));
    }

    #[test]
    fn overlapping_sets_rejected() {
        let err = LabelMappingRule::new("s", RuleKind::CategoryMap, &["c"])
            .positive(&["x"])
            .negative(&["X "])
            .validated()
            .unwrap_err();
        assert!(matches!(err, CorpusError::InvalidRule { .. }));
    }

    #[test]
    fn wrong_source_rejected() {
        let rule = ousidhoum_rule();
        let err = unify_labels(&raw("other", &[("sentiment", "normal")]), &rule).unwrap_err();
        assert!(matches!(err, CorpusError::SourceMismatch { .. }));
    }
}
