//! Property tests over the pure building blocks.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use proptest::prelude::*;

use hatebench::corpus::{clean_text, unify_labels, LabelMappingRule, RawRecord, RuleKind, TiePolicy, Unified};
use hatebench::embeddings::{embed_sentence, mock_embed, Backend, MockSentenceEncoder};
use hatebench::evaluation::weighted_f1;
use hatebench::models::Prediction;
use hatebench::scenarios::split::{label_counts, optional_language_cap, record_identities, split_indices};
use hatebench::{Label, Language, Record, Split};

fn label(b: bool) -> Label {
    if b {
        Label::Hate
    } else {
        Label::NotHate
    }
}

fn flip(l: Label) -> Label {
    label(l == Label::NotHate)
}

fn pairs(max: usize) -> impl Strategy<Value = Vec<(bool, bool)>> {
    prop::collection::vec((any::<bool>(), any::<bool>()), 1..=max)
}

fn unzip(v: &[(bool, bool)]) -> (Vec<Label>, Vec<Label>) {
    v.iter().map(|&(t, p)| (label(t), label(p))).unzip()
}

/// Every third text repeats unless `unique`, to exercise duplicate identities.
fn record(lang: &str, i: usize, hate: bool, unique: bool) -> Record {
    Record {
        text: format!("text {lang} {}", if unique { i } else { i / 3 }),
        label: label(hate),
        language: Language::new(lang).unwrap(),
        source_id: "prop".into(),
        split: Split::Unassigned,
        raw: None,
    }
}

/// Records of one language with at least two examples per class.
fn corpus(lang: &'static str, unique: bool) -> impl Strategy<Value = Vec<Record>> {
    prop::collection::vec(any::<bool>(), 0..60).prop_map(move |mut labels| {
        labels.extend([true, true, false, false]);
        labels.iter().enumerate().map(|(i, &h)| record(lang, i, h, unique)).collect()
    })
}

proptest! {
    #[test]
    fn f1_is_bounded_and_one_only_when_exact(v in pairs(30)) {
        let (t, p) = unzip(&v);
        let f = weighted_f1(&t, &p).unwrap().weighted_f1;
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert_eq!(f == 1.0, t == p);
        prop_assert_eq!(weighted_f1(&t, &t).unwrap().weighted_f1, 1.0);
    }

    #[test]
    fn f1_is_the_support_weighted_class_mean(v in pairs(30)) {
        let (t, p) = unzip(&v);
        let m = weighted_f1(&t, &p).unwrap();
        let n = (m.support[0] + m.support[1]) as f64;
        let expect = (m.support[0] as f64 * m.per_class_f1[0] + m.support[1] as f64 * m.per_class_f1[1]) / n;
        prop_assert!((m.weighted_f1 - expect).abs() <= 1e-12);
    }

    #[test]
    fn f1_ignores_order(v in pairs(30), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = v.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let (t, p) = unzip(&v);
        let (ts, ps) = unzip(&shuffled);
        prop_assert_eq!(weighted_f1(&t, &p).unwrap(), weighted_f1(&ts, &ps).unwrap());
    }

    #[test]
    fn f1_is_symmetric_under_class_swap(v in pairs(30)) {
        let (t, p) = unzip(&v);
        let ts: Vec<Label> = t.iter().map(|&l| flip(l)).collect();
        let ps: Vec<Label> = p.iter().map(|&l| flip(l)).collect();
        let a = weighted_f1(&t, &p).unwrap().weighted_f1;
        let b = weighted_f1(&ts, &ps).unwrap().weighted_f1;
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn split_is_a_stratified_partition(records in corpus("xa", false), ratio in 0.05f64..0.95, seed in any::<u64>()) {
        let (train, test) = split_indices(&records, ratio, seed).unwrap();
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..records.len()).collect::<Vec<_>>());

        let counts = label_counts(&records);
        for c in 0..2 {
            let in_test = test.iter().filter(|&&i| records[i].label.index() == c).count();
            prop_assert_eq!(in_test, (counts[c] as f64 * ratio).round() as usize);
        }

        let ids = record_identities(&records);
        let train_ids: HashSet<&String> = train.iter().map(|&i| &ids[i]).collect();
        prop_assert!(test.iter().all(|&i| !train_ids.contains(&ids[i])));

        prop_assert_eq!(split_indices(&records, ratio, seed).unwrap(), (train, test));
    }

    #[test]
    fn cap_keeps_a_stratified_ordered_subset(
        a in corpus("xa", true),
        b in corpus("xb", true),
        cap in 1usize..40,
        seed in any::<u64>(),
    ) {
        let mut records = a.clone();
        records.extend(b.clone());
        let kept = optional_language_cap(&records, cap, seed).unwrap();
        let ids = record_identities(&records);
        let kept_ids = record_identities(&kept);
        let positions: Vec<usize> =
            kept_ids.iter().map(|k| ids.iter().position(|i| i == k).expect("kept record comes from input")).collect();
        prop_assert!(positions.windows(2).all(|w| w[0] < w[1]), "order changed");

        for original in [&a, &b] {
            let lang = &original[0].language;
            let part: Vec<Record> = kept.iter().filter(|r| &r.language == lang).cloned().collect();
            prop_assert_eq!(part.len(), original.len().min(cap));
            let before = label_counts(original);
            let after = label_counts(&part);
            for c in 0..2 {
                let target = before[c] as f64 * part.len() as f64 / original.len() as f64;
                prop_assert!((after[c] as f64 - target).abs() < 1.0 + 1e-9);
            }
        }
        prop_assert_eq!(optional_language_cap(&records, cap, seed).unwrap(), kept);
    }

    #[test]
    fn cleaned_text_is_printable_single_line(s in "\\PC*") {
        let stop: HashSet<String> = ["the", "a"].iter().map(|w| w.to_string()).collect();
        let once = clean_text(&s, &stop);
        prop_assert!(once.chars().all(|c| c.is_ascii_graphic() || c == ' '));
        prop_assert!(!once.starts_with(' ') && !once.ends_with(' ') && !once.contains("  "));
        prop_assert_eq!(clean_text(&once, &stop), once);
    }

    #[test]
    fn mock_sentence_embeddings_keep_dim_and_purity(s in "\\PC{0,40}", dim in 1usize..64, seed in any::<u64>()) {
        let backend = Backend::sentence("mock", Arc::new(MockSentenceEncoder::new(dim, seed)));
        if s.trim().is_empty() {
            prop_assert!(embed_sentence(&s, &backend).is_err());
            return Ok(());
        }
        let v = embed_sentence(&s, &backend).unwrap();
        prop_assert_eq!(v.len(), dim);
        prop_assert_eq!(embed_sentence(&s, &backend).unwrap(), v);
        let raw = mock_embed(&s, dim, seed);
        prop_assert_eq!(raw.len(), dim);
        prop_assert!(raw.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn predictions_follow_argmax(p in 0.0f64..=1.0) {
        let pred = Prediction::from_probabilities([1.0 - p, p]);
        prop_assert!((pred.probabilities.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        prop_assert_eq!(pred.label, if p > 1.0 - p { Label::Hate } else { Label::NotHate });
    }

    #[test]
    fn annotator_votes_follow_the_majority(
        votes in prop::collection::vec(prop::sample::select(vec!["hate", "ok", "unsure"]), 1..6),
        policy in prop::sample::select(vec![TiePolicy::ToZero, TiePolicy::ToOne, TiePolicy::Drop]),
    ) {
        let columns: Vec<String> = (0..votes.len()).map(|i| format!("a{i}")).collect();
        let refs: Vec<&str> = columns.iter().map(String::as_str).collect();
        let rule = LabelMappingRule::new("votes", RuleKind::AnnotatorVote, &refs)
            .positive(&["hate"])
            .negative(&["ok"])
            .reject(&["unsure"])
            .ties(policy)
            .validated()
            .unwrap();
        let payload: BTreeMap<String, String> =
            columns.iter().cloned().zip(votes.iter().map(|v| v.to_string())).collect();
        let raw = RawRecord::new("votes", payload, Language::new("en").unwrap()).unwrap();
        let hate = votes.iter().filter(|v| **v == "hate").count();
        let ok = votes.iter().filter(|v| **v == "ok").count();
        let expect = if hate + ok == 0 {
            Unified::Reject
        } else if hate != ok {
            Unified::Label(label(hate > ok))
        } else {
            match policy {
                TiePolicy::ToZero => Unified::Label(Label::NotHate),
                TiePolicy::ToOne => Unified::Label(Label::Hate),
                TiePolicy::Drop => Unified::Reject,
            }
        };
        prop_assert_eq!(unify_labels(&raw, &rule).unwrap(), expect);
    }
}
