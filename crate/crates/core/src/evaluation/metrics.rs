//! Binary confusion counts and class-weighted F1.

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::Label;

/// Confusion counts with class 1 (hate) as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn from_labels(y_true: &[Label], y_pred: &[Label]) -> Result<Self, EvalError> {
        check_lengths(y_true.len(), y_pred.len())?;
        let mut m = ConfusionMatrix::default();
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t, p) {
                (Label::Hate, Label::Hate) => m.tp += 1,
                (Label::NotHate, Label::Hate) => m.fp += 1,
                (Label::NotHate, Label::NotHate) => m.tn += 1,
                (Label::Hate, Label::NotHate) => m.fn_ += 1,
            }
        }
        Ok(m)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub weighted_f1: f64,
    pub per_class_f1: [f64; 2],
    pub per_class_precision: [f64; 2],
    pub per_class_recall: [f64; 2],
    pub support: [usize; 2],
}

fn check_lengths(a: usize, b: usize) -> Result<(), EvalError> {
    if a != b {
        return Err(EvalError::Argument(format!("y_true has {a} labels but y_pred has {b}")));
    }
    if a == 0 {
        return Err(EvalError::Argument("no labels to evaluate".into()));
    }
    Ok(())
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Support-weighted mean of per-class F1. Undefined precision, recall or
/// F1 (zero denominator) counts as 0.
pub fn weighted_f1(y_true: &[Label], y_pred: &[Label]) -> Result<MetricResult, EvalError> {
    let m = ConfusionMatrix::from_labels(y_true, y_pred)?;
    Ok(metrics_from_confusion(&m))
}

/// Same as [`weighted_f1`] for integer labels, rejecting values outside {0,1}.
pub fn weighted_f1_from_ints(y_true: &[i64], y_pred: &[i64]) -> Result<MetricResult, EvalError> {
    check_lengths(y_true.len(), y_pred.len())?;
    let conv = |v: &[i64]| {
        v.iter()
            .map(|&x| match x {
                0 => Ok(Label::NotHate),
                1 => Ok(Label::Hate),
                other => Err(EvalError::Argument(format!("label {other} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>, _>>()
    };
    weighted_f1(&conv(y_true)?, &conv(y_pred)?)
}

pub fn metrics_from_confusion(m: &ConfusionMatrix) -> MetricResult {
    // (tp, fp, fn) seen from each class's point of view
    let per_class = [(m.tn, m.fn_, m.fp), (m.tp, m.fp, m.fn_)];
    let mut precision = [0.0; 2];
    let mut recall = [0.0; 2];
    let mut f1 = [0.0; 2];
    let mut support = [0usize; 2];
    for (c, &(tp, fp, fn_)) in per_class.iter().enumerate() {
        precision[c] = ratio(tp, tp + fp);
        recall[c] = ratio(tp, tp + fn_);
        let s = precision[c] + recall[c];
        f1[c] = if s == 0.0 { 0.0 } else { 2.0 * precision[c] * recall[c] / s };
        support[c] = tp + fn_;
    }
    let total = (support[0] + support[1]) as f64;
    let weighted = if total == 0.0 {
        0.0
    } else {
        (support[0] as f64 * f1[0] + support[1] as f64 * f1[1]) / total
    };
    MetricResult {
        weighted_f1: weighted,
        per_class_f1: f1,
        per_class_precision: precision,
        per_class_recall: recall,
        support,
    }
}
