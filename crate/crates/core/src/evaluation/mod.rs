//! Class-weighted F1, prediction dumps and comparison tables.

pub mod dump;
pub mod metrics;
pub mod report;

use thiserror::Error;

use crate::corpus::{Label, Record};
use crate::embeddings::{Backend, EmbeddingCache};
use crate::models::{predict, Model, ModelError, Prediction};

pub use dump::{metrics_from_dump, read_dump, write_dump, DumpRow};
pub use metrics::{metrics_from_confusion, weighted_f1, weighted_f1_from_ints, ConfusionMatrix, MetricResult};
pub use report::{render_report, Axis, Report};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0}")]
    Argument(String),
    #[error("test split for {0} is empty")]
    EmptyTestSplit(String),
    #[error("corpus snapshot mismatch for {language}: runs {runs:?} used different corpus files")]
    ProvenanceMismatch { language: String, runs: Vec<String> },
    #[error("more than one run provides {row} / {column}: {runs:?}")]
    AmbiguousCell { row: String, column: String, runs: Vec<String> },
    #[error("no completed runs to report")]
    NoRuns,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {message}")]
    Dump { path: std::path::PathBuf, message: String },
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub metrics: MetricResult,
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<Prediction>,
}

/// Predicts the whole test split of one language and scores it.
pub fn evaluate_run(
    model: &Model,
    test_records: &[Record],
    backend: &Backend,
    cache: Option<&EmbeddingCache>,
    batch_size: usize,
) -> Result<Evaluation, EvalError> {
    let Some(first) = test_records.first() else {
        return Err(EvalError::EmptyTestSplit("<unknown>".into()));
    };
    if let Some(r) = test_records.iter().find(|r| r.language != first.language) {
        return Err(EvalError::Argument(format!(
            "test records mix languages {} and {}",
            first.language, r.language
        )));
    }
    let predictions = predict(model, test_records, backend, cache, batch_size)?;
    let y_true: Vec<Label> = test_records.iter().map(|r| r.label).collect();
    let y_pred: Vec<Label> = predictions.iter().map(|p| p.label).collect();
    let confusion = ConfusionMatrix::from_labels(&y_true, &y_pred)?;
    Ok(Evaluation { metrics: metrics_from_confusion(&confusion), confusion, predictions })
}
