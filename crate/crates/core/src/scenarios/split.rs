//! Label-stratified train/test partitions and per-language subsampling.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;

use super::ScenarioError;
use crate::corpus::{Record, Split};
use crate::lang::Language;
use crate::seed::rng_for;

fn single_language(records: &[Record]) -> Result<&Language, ScenarioError> {
    let first = records.first().ok_or_else(|| ScenarioError::Invalid("cannot split an empty corpus".into()))?;
    if let Some(r) = records.iter().find(|r| r.language != first.language) {
        return Err(ScenarioError::Invalid(format!(
            "split input mixes languages {} and {}",
            first.language, r.language
        )));
    }
    Ok(&first.language)
}

fn class_indices(records: &[Record]) -> [Vec<usize>; 2] {
    let mut by_class = [Vec::new(), Vec::new()];
    for (i, r) in records.iter().enumerate() {
        by_class[r.label.index()].push(i);
    }
    by_class
}

/// Indices of the train and test parts, each in input order.
///
/// Per class `c`, `round(n_c * test_ratio)` examples go to test, chosen by a
/// permutation seeded from `seed` and the language code.
pub fn split_indices(records: &[Record], test_ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), ScenarioError> {
    if !(test_ratio > 0.0 && test_ratio < 1.0) {
        return Err(ScenarioError::Invalid(format!("test_ratio must lie in (0, 1), got {test_ratio}")));
    }
    let language = single_language(records)?;
    let by_class = class_indices(records);
    for (c, idx) in by_class.iter().enumerate() {
        if idx.len() < 2 {
            return Err(ScenarioError::Stratification {
                language: language.to_string(),
                label: c as u8,
                count: idx.len(),
            });
        }
    }
    let mut rng = rng_for(seed, &format!("split/{language}"));
    let mut is_test = vec![false; records.len()];
    for mut idx in by_class {
        let n_test = (idx.len() as f64 * test_ratio).round() as usize;
        idx.shuffle(&mut rng);
        for &i in &idx[..n_test] {
            is_test[i] = true;
        }
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..records.len()).partition(|&i| is_test[i]);
    Ok((train, test))
}

/// Partitions one language's records, tagging each with its split.
pub fn stratified_split(
    records: &[Record],
    test_ratio: f64,
    seed: u64,
) -> Result<(Vec<Record>, Vec<Record>), ScenarioError> {
    let (train, test) = split_indices(records, test_ratio, seed)?;
    let take = |idx: &[usize], split: Split| idx.iter().map(|&i| records[i].clone().with_split(split)).collect();
    Ok((take(&train, Split::Train), take(&test, Split::Test)))
}

/// Record identities: content hash plus the occurrence number of that hash
/// within `records`, so repeated identical rows stay distinct.
pub fn record_identities(records: &[Record]) -> Vec<String> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    records
        .iter()
        .map(|r| {
            let h = r.content_hash();
            let n = seen.entry(h.clone()).or_insert(0);
            let id = format!("{h}#{n}");
            *n += 1;
            id
        })
        .collect()
}

/// Largest-remainder allocation of `total` slots proportional to `sizes`.
fn allocate(sizes: [usize; 2], total: usize) -> [usize; 2] {
    let n: usize = sizes.iter().sum();
    let exact = sizes.map(|s| s as f64 * total as f64 / n as f64);
    let mut out = exact.map(|x| x.floor() as usize);
    let mut left = total - out.iter().sum::<usize>();
    let mut order = [0, 1];
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    for c in order {
        if left > 0 && out[c] < sizes[c] {
            out[c] += 1;
            left -= 1;
        }
    }
    out
}

/// Keeps at most `cap` records per language, stratified by label.
/// Relative order of the kept records is preserved.
pub fn optional_language_cap(records: &[Record], cap: usize, seed: u64) -> Result<Vec<Record>, ScenarioError> {
    if cap == 0 {
        return Err(ScenarioError::Invalid("cap_per_language must be at least 1".into()));
    }
    let mut by_lang: BTreeMap<&Language, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_lang.entry(&r.language).or_default().push(i);
    }
    let mut keep = vec![false; records.len()];
    for (lang, idx) in by_lang {
        if idx.len() <= cap {
            idx.iter().for_each(|&i| keep[i] = true);
            continue;
        }
        let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for &i in &idx {
            by_class[records[i].label.index()].push(i);
        }
        let quota = allocate([by_class[0].len(), by_class[1].len()], cap);
        let mut rng = rng_for(seed, &format!("cap/{lang}"));
        for (c, mut members) in by_class.into_iter().enumerate() {
            members.shuffle(&mut rng);
            members[..quota[c]].iter().for_each(|&i| keep[i] = true);
        }
    }
    Ok(records.iter().zip(keep).filter(|(_, k)| *k).map(|(r, _)| r.clone()).collect())
}

/// Count of each label.
pub fn label_counts(records: &[Record]) -> [usize; 2] {
    let mut c = [0; 2];
    for r in records {
        c[r.label.index()] += 1;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;

    fn recs(lang: &str, zeros: usize, ones: usize) -> Vec<Record> {
        (0..zeros + ones)
            .map(|i| Record {
                text: format!("text {i}"),
                label: if i < zeros { Label::NotHate } else { Label::Hate },
                language: Language::new(lang).unwrap(),
                source_id: "s".into(),
                split: Split::Unassigned,
                raw: None,
            })
            .collect()
    }

    #[test]
    fn six_four_at_point_two() {
        let (train, test) = stratified_split(&recs("xa", 6, 4), 0.2, 3).unwrap();
        assert_eq!(label_counts(&test), [1, 1]);
        assert_eq!(label_counts(&train), [5, 3]);
        assert!(train.iter().all(|r| r.split == Split::Train));
        assert!(test.iter().all(|r| r.split == Split::Test));
    }

    #[test]
    fn same_seed_same_partition() {
        let r = recs("xa", 30, 20);
        assert_eq!(split_indices(&r, 0.2, 9).unwrap(), split_indices(&r, 0.2, 9).unwrap());
        assert_ne!(split_indices(&r, 0.2, 9).unwrap(), split_indices(&r, 0.2, 10).unwrap());
    }

    #[test]
    fn tiny_class_is_an_error() {
        let err = split_indices(&recs("xa", 5, 1), 0.2, 0).unwrap_err();
        assert!(matches!(err, ScenarioError::Stratification { label: 1, count: 1, .. }), "{err}");
    }

    #[test]
    fn ratio_bounds() {
        assert!(split_indices(&recs("xa", 5, 5), 0.0, 0).is_err());
        assert!(split_indices(&recs("xa", 5, 5), 1.0, 0).is_err());
    }

    #[test]
    fn identities_separate_duplicates() {
        let mut r = recs("xa", 2, 0);
        r[1].text = r[0].text.clone();
        let ids = record_identities(&r);
        assert_ne!(ids[0], ids[1]);
        assert!(ids[0].ends_with("#0") && ids[1].ends_with("#1"));
    }

    #[test]
    fn cap_counts() {
        let r = recs("en", 60, 40);
        let capped = optional_language_cap(&r, 50, 1).unwrap();
        assert_eq!(capped.len(), 50);
        assert_eq!(label_counts(&capped), [30, 20]);
        assert_eq!(optional_language_cap(&r, 100, 1).unwrap(), r);
        assert_eq!(optional_language_cap(&r, 500, 1).unwrap(), r);
        assert!(optional_language_cap(&r, 0, 1).is_err());
    }

    #[test]
    fn cap_is_per_language() {
        let mut r = recs("en", 10, 10);
        r.extend(recs("de", 3, 2));
        let capped = optional_language_cap(&r, 4, 2).unwrap();
        assert_eq!(capped.iter().filter(|x| x.language.code() == "en").count(), 4);
        assert_eq!(capped.iter().filter(|x| x.language.code() == "de").count(), 4);
    }

    #[test]
    fn allocation_sums_to_total() {
        for (a, b, t) in [(7, 3, 5), (1, 9, 4), (5, 5, 3), (99, 1, 10)] {
            let q = allocate([a, b], t);
            assert_eq!(q[0] + q[1], t);
            assert!(q[0] <= a && q[1] <= b);
        }
    }
}
