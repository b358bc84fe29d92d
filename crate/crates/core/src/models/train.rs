//! Mini-batch training and batched inference.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Inputs, Model, ModelError, ModelFamily, Prediction, TrainConfig};
use crate::corpus::{Label, Record, Split};
use crate::embeddings::{Backend, EmbeddingCache};
use crate::evaluation::weighted_f1;
use crate::nn::{softmax_rows, AdamW, Graph};
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Per-example mean of the (optionally class-weighted) loss.
    pub mean_loss: f64,
    /// Weighted F1 of the predictions made during the epoch's forward passes.
    pub train_weighted_f1: f64,
}

pub type TrainHistory = Vec<EpochStats>;

/// Text a family consumes: raw text for contextual models when kept,
/// cleaned text otherwise.
pub fn model_text(record: &Record, family: ModelFamily) -> &str {
    match (family, &record.raw) {
        (ModelFamily::ContextualFinetune, Some(raw)) => raw,
        _ => &record.text,
    }
}

/// Featurizes `records` (all from the train split) and runs [`fit`].
pub fn train(
    model: &mut Model,
    records: &[Record],
    backend: &Backend,
    cache: Option<&EmbeddingCache>,
    config: &TrainConfig,
) -> Result<TrainHistory, ModelError> {
    if records.is_empty() {
        return Err(ModelError::Precondition("training set is empty".into()));
    }
    if let Some(r) = records.iter().find(|r| r.split != Split::Train) {
        return Err(ModelError::Precondition(format!("record from split {:?} passed to training", r.split)));
    }
    let texts: Vec<&str> = records.iter().map(|r| model_text(r, model.family())).collect();
    let inputs = model.featurize(&texts, backend, cache)?;
    let labels: Vec<Label> = records.iter().map(|r| r.label).collect();
    fit(model, &inputs, &labels, config)
}

/// AdamW on mean cross-entropy over seeded shuffled mini-batches.
///
/// Shuffling and dropout draw from independent streams derived from
/// `config.seed`, so identical inputs and seed give bit-identical
/// parameters.
pub fn fit(model: &mut Model, inputs: &Inputs, labels: &[Label], config: &TrainConfig) -> Result<TrainHistory, ModelError> {
    config.validate()?;
    let n = inputs.len();
    if n == 0 {
        return Err(ModelError::Precondition("training set is empty".into()));
    }
    if labels.len() != n {
        return Err(ModelError::Shape {
            context: "training labels".into(),
            expected: format!("{n} labels"),
            actual: format!("{} labels", labels.len()),
        });
    }
    let class_weight = if config.class_weights {
        let mut counts = [0usize; 2];
        labels.iter().for_each(|l| counts[l.index()] += 1);
        counts.map(|c| if c == 0 { 0.0 } else { n as f64 / (2.0 * c as f64) })
    } else {
        [1.0, 1.0]
    };

    let mut opt = AdamW::new(config.learning_rate, config.weight_decay);
    let mut shuffle_rng = rng_for(config.seed, "shuffle");
    let mut dropout_rng = rng_for(config.seed, "dropout");
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut y_true = Vec::with_capacity(n);
        let mut y_pred = Vec::with_capacity(n);
        for chunk in order.chunks(config.batch_size) {
            let batch = inputs.select(chunk);
            let targets: Vec<usize> = chunk.iter().map(|&i| labels[i].index()).collect();
            let weights: Vec<f64> = targets.iter().map(|&t| class_weight[t]).collect();
            let (loss_value, grads, logits) = {
                let mut g = Graph::new(model.params());
                let logits = model.forward_train(&mut g, &batch, &mut dropout_rng)?;
                let loss = g.cross_entropy(logits, &targets, Some(&weights));
                (g.value(loss)[[0, 0]], g.backward(loss), g.value(logits).clone())
            };
            if !loss_value.is_finite() {
                return Err(ModelError::Diverged { epoch });
            }
            opt.step(model.params_mut(), &grads);
            loss_sum += loss_value * chunk.len() as f64;
            for (r, &i) in chunk.iter().enumerate() {
                y_true.push(labels[i]);
                y_pred.push(if logits[[r, 1]] > logits[[r, 0]] { Label::Hate } else { Label::NotHate });
            }
        }
        let f1 = weighted_f1(&y_true, &y_pred).map(|m| m.weighted_f1).unwrap_or(0.0);
        history.push(EpochStats { epoch, mean_loss: loss_sum / n as f64, train_weighted_f1: f1 });
        log::debug!("epoch {epoch}: loss {:.6} train F1 {f1:.4}", loss_sum / n as f64);
    }
    Ok(history)
}

/// One prediction per input row, computed `batch_size` rows at a time.
pub fn predict_inputs(model: &Model, inputs: &Inputs, batch_size: usize) -> Result<Vec<Prediction>, ModelError> {
    let idx: Vec<usize> = (0..inputs.len()).collect();
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in idx.chunks(batch_size.max(1)) {
        let probs = softmax_rows(&model.logits(&inputs.select(chunk))?);
        out.extend(probs.outer_iter().map(|p| Prediction::from_probabilities([p[0], p[1]])));
    }
    Ok(out)
}

/// Order-preserving predictions for `records`.
pub fn predict(
    model: &Model,
    records: &[Record],
    backend: &Backend,
    cache: Option<&EmbeddingCache>,
    batch_size: usize,
) -> Result<Vec<Prediction>, ModelError> {
    if records.is_empty() {
        return Err(ModelError::Precondition("no records to predict".into()));
    }
    let texts: Vec<&str> = records.iter().map(|r| model_text(r, model.family())).collect();
    let inputs = model.featurize(&texts, backend, cache)?;
    predict_inputs(model, &inputs, batch_size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::MockSentenceEncoder;
    use crate::lang::Language;
    use crate::nn::Matrix;
    use std::sync::Arc;

    fn rec(text: &str, label: Label) -> Record {
        Record {
            text: text.into(),
            label,
            language: Language::new("xa").unwrap(),
            source_id: "s".into(),
            split: Split::Train,
            raw: None,
        }
    }

    fn toy() -> Vec<Record> {
        (0..32)
            .map(|i| {
                if i % 2 == 0 {
                    rec(&format!("vile scum w{i}"), Label::Hate)
                } else {
                    rec(&format!("sunny garden w{i}"), Label::NotHate)
                }
            })
            .collect()
    }

    fn backend() -> Backend {
        Backend::sentence("mock", Arc::new(MockSentenceEncoder::new(64, 3)))
    }

    fn quick() -> TrainConfig {
        TrainConfig { epochs: 15, learning_rate: 0.05, ..TrainConfig::for_family(ModelFamily::LinearHead) }
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let mut m = Model::linear_head(64);
        assert!(matches!(train(&mut m, &[], &backend(), None, &quick()), Err(ModelError::Precondition(_))));
    }

    #[test]
    fn test_records_are_rejected() {
        let mut m = Model::linear_head(64);
        let r = vec![rec("a b", Label::Hate).with_split(Split::Test)];
        assert!(train(&mut m, &r, &backend(), None, &quick()).is_err());
    }

    #[test]
    fn same_seed_same_parameters() {
        let data = toy();
        let run = || {
            let mut m = Model::cnn_gru(
                8,
                super::super::CnnGruParams { kernel_widths: vec![2], filters: 3, hidden: 3, dropout: 0.25 },
                8,
                1,
            );
            let inputs = Inputs::Sequences((0..8).map(|i| Matrix::from_elem((2 + i % 3, 8), i as f64 / 8.0)).collect());
            let labels: Vec<Label> = (0..8).map(|i| if i % 2 == 0 { Label::Hate } else { Label::NotHate }).collect();
            let h = fit(&mut m, &inputs, &labels, &TrainConfig { epochs: 3, ..quick() }).unwrap();
            (m, h)
        };
        let (a, ha) = run();
        let (b, hb) = run();
        assert!(a.params().bit_identical(b.params()));
        assert_eq!(ha, hb);

        let mut m1 = Model::linear_head(64);
        let mut m2 = Model::linear_head(64);
        train(&mut m1, &data, &backend(), None, &quick()).unwrap();
        train(&mut m2, &data, &backend(), None, &quick()).unwrap();
        assert!(m1.params().bit_identical(m2.params()));
    }

    #[test]
    fn learns_separable_toy_set() {
        let data = toy();
        let mut m = Model::linear_head(64);
        let h = train(&mut m, &data, &backend(), None, &quick()).unwrap();
        assert_eq!(h.len(), 15);
        assert!(h.last().unwrap().train_weighted_f1 >= 0.95);
        assert!(h.last().unwrap().mean_loss < h[0].mean_loss);
        let preds = predict(&m, &data, &backend(), None, 16).unwrap();
        assert_eq!(preds.len(), data.len());
        for (p, r) in preds.iter().zip(&data) {
            assert!((p.probabilities[0] + p.probabilities[1] - 1.0).abs() < 1e-6);
            assert_eq!(p.label, r.label);
        }
        let again = predict(&m, &data[..1], &backend(), None, 16).unwrap();
        assert_eq!(again[0], preds[0]);
    }

    #[test]
    fn divergence_reports_the_epoch() {
        let mut m = Model::linear_head(2);
        let x = Matrix::from_shape_vec((2, 2), vec![f64::NAN, 0.0, 1.0, 1.0]).unwrap();
        let err = fit(&mut m, &Inputs::Dense(x), &[Label::Hate, Label::NotHate], &quick()).unwrap_err();
        assert!(matches!(err, ModelError::Diverged { epoch: 1 }));
    }
}
