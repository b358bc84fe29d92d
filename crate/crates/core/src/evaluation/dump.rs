//! Prediction dumps: one JSON object per test record, enough to
//! recompute every metric without the model.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{weighted_f1, EvalError, MetricResult};
use crate::corpus::Label;
use crate::models::Prediction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpRow {
    pub record_hash: String,
    pub y_true: Label,
    pub y_pred: Label,
    pub p0: f64,
    pub p1: f64,
}

pub fn write_dump(path: &Path, hashes: &[String], y_true: &[Label], preds: &[Prediction]) -> Result<(), EvalError> {
    if hashes.len() != y_true.len() || y_true.len() != preds.len() {
        return Err(EvalError::Argument("dump columns have different lengths".into()));
    }
    let mut body = String::new();
    for ((h, &t), p) in hashes.iter().zip(y_true).zip(preds) {
        let row = DumpRow {
            record_hash: h.clone(),
            y_true: t,
            y_pred: p.label,
            p0: p.probabilities[0],
            p1: p.probabilities[1],
        };
        body.push_str(&serde_json::to_string(&row).expect("row serializes"));
        body.push('\n');
    }
    crate::corpus::io::write_atomic(path, body.as_bytes())
        .map_err(|e| EvalError::Dump { path: path.into(), message: e.to_string() })
}

pub fn read_dump(path: &Path) -> Result<Vec<DumpRow>, EvalError> {
    let err = |m: String| EvalError::Dump { path: path.into(), message: m };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| err(format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn metrics_from_dump(rows: &[DumpRow]) -> Result<MetricResult, EvalError> {
    let t: Vec<Label> = rows.iter().map(|r| r.y_true).collect();
    let p: Vec<Label> = rows.iter().map(|r| r.y_pred).collect();
    weighted_f1(&t, &p)
}
