//! The three classifier families and their shared training engine.
//!
//! | family                | input granularity | architecture                                  |
//! |-----------------------|-------------------|-----------------------------------------------|
//! | `linear_head`         | sentence          | affine map to 2 logits (logistic regression)  |
//! | `cnn_gru`             | token             | parallel 1-D convolutions, GRU, dropout, head |
//! | `contextual_finetune` | raw_tokens        | BERT-style encoder, pooled `[CLS]`, head      |
//!
//! All families are trained by [`fit`] with AdamW on mean cross-entropy.

mod bert;
mod checkpoint;
mod cnn_gru;
mod linear;
mod train;
mod weights;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ndarray::Axis;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::embeddings::{EmbeddingError, Granularity};
use crate::nn::{Graph, Matrix, NodeId, ParamStore};

pub use bert::{write_random_checkpoint, BertConfig};
pub use cnn_gru::{CnnGru, CnnGruParams};
pub use linear::LinearHead;
pub use train::{fit, predict, predict_inputs, train, EpochStats, TrainHistory};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown model family {0:?}; valid families: linear_head, cnn_gru, contextual_finetune")]
    UnknownFamily(String),
    #[error("{context}: expected {expected}, got {actual}")]
    Shape { context: String, expected: String, actual: String },
    #[error("{0}")]
    Precondition(String),
    #[error("training diverged: non-finite loss in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("model family {family} needs a {expected} backend, got {found}")]
    BackendMismatch { family: ModelFamily, expected: Granularity, found: Granularity },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },
}

impl ModelError {
    pub(crate) fn checkpoint(path: impl Into<PathBuf>, message: impl fmt::Display) -> Self {
        ModelError::Checkpoint { path: path.into(), message: message.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    LinearHead,
    CnnGru,
    ContextualFinetune,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 3] = [ModelFamily::LinearHead, ModelFamily::CnnGru, ModelFamily::ContextualFinetune];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelFamily::LinearHead => "linear_head",
            ModelFamily::CnnGru => "cnn_gru",
            ModelFamily::ContextualFinetune => "contextual_finetune",
        }
    }

    /// Column heading in reports.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelFamily::LinearHead => "Sentence + LR",
            ModelFamily::CnnGru => "Word + CNN-GRU",
            ModelFamily::ContextualFinetune => "Contextual",
        }
    }

    /// The only embedding granularity this family accepts.
    pub fn granularity(self) -> Granularity {
        match self {
            ModelFamily::LinearHead => Granularity::Sentence,
            ModelFamily::CnnGru => Granularity::Token,
            ModelFamily::ContextualFinetune => Granularity::RawTokens,
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelFamily {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelFamily::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| ModelError::UnknownFamily(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Adamw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    CrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub loss: Loss,
    /// Token cap for sequence models; `None` for the linear head.
    pub max_sequence_length: Option<usize>,
    pub seed: u64,
    /// Decoupled AdamW decay.
    pub weight_decay: f64,
    /// Inverse-frequency class weights in the loss.
    pub class_weights: bool,
}

impl TrainConfig {
    /// Per-family defaults.
    pub fn for_family(family: ModelFamily) -> Self {
        let (epochs, learning_rate, max_sequence_length, weight_decay) = match family {
            ModelFamily::LinearHead => (20, 1e-3, None, 0.0),
            ModelFamily::CnnGru => (20, 1e-4, Some(64), 0.01),
            ModelFamily::ContextualFinetune => (5, 5e-5, Some(512), 0.01),
        };
        TrainConfig {
            epochs,
            learning_rate,
            batch_size: 16,
            optimizer: Optimizer::Adamw,
            loss: Loss::CrossEntropy,
            max_sequence_length,
            seed: 0,
            weight_decay,
            class_weights: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Precondition(m.to_owned()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad("weight_decay must be non-negative");
        }
        if self.max_sequence_length == Some(0) {
            return bad("max_sequence_length must be at least 1");
        }
        Ok(())
    }
}

/// Optional per-scenario overrides of [`TrainConfig`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_sequence_length: Option<usize>,
    pub weight_decay: Option<f64>,
    pub class_weights: Option<bool>,
}

impl TrainOverrides {
    pub fn apply(&self, mut c: TrainConfig) -> TrainConfig {
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.learning_rate {
            c.learning_rate = v;
        }
        if let Some(v) = self.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = self.max_sequence_length {
            c.max_sequence_length = Some(v);
        }
        if let Some(v) = self.weight_decay {
            c.weight_decay = v;
        }
        if let Some(v) = self.class_weights {
            c.class_weights = v;
        }
        c
    }
}

/// Architecture record of a model, written into checkpoints and manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub input_granularity: Granularity,
    /// Embedding width (sentence or token); `None` for contextual models.
    pub input_dim: Option<usize>,
    pub n_classes: usize,
    pub max_sequence_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cnn_gru: Option<CnnGruParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contextual: Option<BertConfig>,
}

impl ModelSpec {
    pub fn linear_head(input_dim: usize) -> Self {
        ModelSpec {
            family: ModelFamily::LinearHead,
            input_granularity: Granularity::Sentence,
            input_dim: Some(input_dim),
            n_classes: 2,
            max_sequence_length: None,
            cnn_gru: None,
            contextual: None,
        }
    }

    pub fn cnn_gru(input_dim: usize, params: CnnGruParams, max_sequence_length: usize) -> Self {
        ModelSpec {
            family: ModelFamily::CnnGru,
            input_granularity: Granularity::Token,
            input_dim: Some(input_dim),
            n_classes: 2,
            max_sequence_length: Some(max_sequence_length),
            cnn_gru: Some(params),
            contextual: None,
        }
    }
}

/// Featurized batch in the form a family consumes.
#[derive(Debug, Clone, PartialEq)]
pub enum Inputs {
    /// One sentence vector per row.
    Dense(Matrix),
    /// One `T × dim` token matrix per example.
    Sequences(Vec<Matrix>),
    /// Subword ids per example, special tokens included.
    Ids(Vec<Vec<u32>>),
}

impl Inputs {
    pub fn len(&self) -> usize {
        match self {
            Inputs::Dense(m) => m.nrows(),
            Inputs::Sequences(s) => s.len(),
            Inputs::Ids(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, idx: &[usize]) -> Inputs {
        match self {
            Inputs::Dense(m) => Inputs::Dense(m.select(Axis(0), idx)),
            Inputs::Sequences(s) => Inputs::Sequences(idx.iter().map(|&i| s[i].clone()).collect()),
            Inputs::Ids(s) => Inputs::Ids(idx.iter().map(|&i| s[i].clone()).collect()),
        }
    }
}

/// Class decision with its distribution; ties resolve to class 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    pub probabilities: [f64; 2],
}

impl Prediction {
    pub fn from_probabilities(p: [f64; 2]) -> Self {
        let label = if p[1] > p[0] { Label::Hate } else { Label::NotHate };
        Prediction { label, probabilities: p }
    }
}

pub(crate) enum Network {
    Linear(LinearHead),
    CnnGru(CnnGru),
    Contextual(Box<bert::BertClassifier>),
}

impl Network {
    fn store(&self) -> &ParamStore {
        match self {
            Network::Linear(m) => &m.store,
            Network::CnnGru(m) => &m.store,
            Network::Contextual(m) => &m.store,
        }
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        match self {
            Network::Linear(m) => &mut m.store,
            Network::CnnGru(m) => &mut m.store,
            Network::Contextual(m) => &mut m.store,
        }
    }

    /// Batch × 2 logits. `dropout` is `Some` only while training.
    fn forward(
        &self,
        g: &mut Graph,
        inputs: &Inputs,
        dropout: Option<&mut rand_chacha::ChaCha8Rng>,
    ) -> Result<NodeId, ModelError> {
        match self {
            Network::Linear(m) => m.forward(g, inputs),
            Network::CnnGru(m) => m.forward(g, inputs, dropout),
            Network::Contextual(m) => m.forward(g, inputs, dropout),
        }
    }
}

/// A classifier instance: architecture record plus parameters.
pub struct Model {
    spec: ModelSpec,
    network: Network,
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model")
            .field("family", &self.spec.family)
            .field("parameters", &self.num_parameters())
            .finish()
    }
}

impl Model {
    /// Zero-initialized logistic-regression head over `input_dim` features.
    pub fn linear_head(input_dim: usize) -> Self {
        Model { spec: ModelSpec::linear_head(input_dim), network: Network::Linear(LinearHead::new(input_dim)) }
    }

    pub fn cnn_gru(input_dim: usize, params: CnnGruParams, max_sequence_length: usize, seed: u64) -> Self {
        let net = CnnGru::new(input_dim, &params, seed);
        Model { spec: ModelSpec::cnn_gru(input_dim, params, max_sequence_length), network: Network::CnnGru(net) }
    }

    /// Loads a BERT-format checkpoint directory and attaches a fresh
    /// 2-class head.
    pub fn contextual(checkpoint: &std::path::Path, max_sequence_length: usize, seed: u64) -> Result<Self, ModelError> {
        let net = bert::BertClassifier::load(checkpoint, max_sequence_length, seed)?;
        let spec = ModelSpec {
            family: ModelFamily::ContextualFinetune,
            input_granularity: Granularity::RawTokens,
            input_dim: None,
            n_classes: 2,
            max_sequence_length: Some(net.max_len()),
            cnn_gru: None,
            contextual: Some(net.config.clone()),
        };
        Ok(Model { spec, network: Network::Contextual(Box::new(net)) })
    }

    /// Builds an untrained model of `family` suited to `backend`.
    pub fn for_backend(
        family: ModelFamily,
        backend: &crate::embeddings::Backend,
        config: &TrainConfig,
    ) -> Result<Self, ModelError> {
        if backend.granularity() != family.granularity() {
            return Err(ModelError::BackendMismatch {
                family,
                expected: family.granularity(),
                found: backend.granularity(),
            });
        }
        let init_seed = crate::seed::derive_seed(config.seed, "init");
        match family {
            ModelFamily::LinearHead => Ok(Model::linear_head(backend.dim().expect("sentence backends have a dim"))),
            ModelFamily::CnnGru => Ok(Model::cnn_gru(
                backend.dim().expect("token backends have a dim"),
                CnnGruParams::default(),
                config.max_sequence_length.unwrap_or(64),
                init_seed,
            )),
            ModelFamily::ContextualFinetune => Model::contextual(
                backend.model_path().expect("raw_tokens backends have a model path"),
                config.max_sequence_length.unwrap_or(512),
                init_seed,
            ),
        }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn family(&self) -> ModelFamily {
        self.spec.family
    }

    pub fn params(&self) -> &ParamStore {
        self.network.store()
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        self.network.store_mut()
    }

    /// Trainable scalar count.
    pub fn num_parameters(&self) -> usize {
        self.params().iter().filter(|(_, p)| p.trainable).map(|(_, p)| p.value.len()).sum()
    }

    /// Inference-mode logits.
    pub fn logits(&self, inputs: &Inputs) -> Result<Matrix, ModelError> {
        let mut g = Graph::inference(self.params());
        let out = self.network.forward(&mut g, inputs, None)?;
        Ok(g.value(out).clone())
    }

    /// Training-mode forward pass on a caller-owned graph.
    pub fn forward_train(
        &self,
        g: &mut Graph,
        inputs: &Inputs,
        dropout: &mut rand_chacha::ChaCha8Rng,
    ) -> Result<NodeId, ModelError> {
        self.network.forward(g, inputs, Some(dropout))
    }

    /// Turns texts into the family's input form. `texts[i]` is the cleaned
    /// text for embedding-based families and the raw text for contextual
    /// models.
    pub fn featurize<S: AsRef<str> + Sync>(
        &self,
        texts: &[S],
        backend: &crate::embeddings::Backend,
        cache: Option<&crate::embeddings::EmbeddingCache>,
    ) -> Result<Inputs, ModelError> {
        use rayon::prelude::*;
        if backend.granularity() != self.spec.input_granularity {
            return Err(ModelError::BackendMismatch {
                family: self.spec.family,
                expected: self.spec.input_granularity,
                found: backend.granularity(),
            });
        }
        match &self.network {
            Network::Linear(_) => {
                let rows = texts
                    .par_iter()
                    .map(|t| crate::embeddings::cached_sentence(t.as_ref(), backend, cache))
                    .collect::<Result<Vec<_>, _>>()?;
                let dim = backend.dim().expect("sentence dim");
                let flat: Vec<f64> = rows.into_iter().flatten().collect();
                Ok(Inputs::Dense(Matrix::from_shape_vec((texts.len(), dim), flat).expect("rows of equal width")))
            }
            Network::CnnGru(m) => {
                let cap = self.spec.max_sequence_length.unwrap_or(64);
                let seqs = texts
                    .par_iter()
                    .map(|t| m.featurize(t.as_ref(), backend, cap))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Inputs::Sequences(seqs))
            }
            Network::Contextual(m) => {
                let ids = texts.par_iter().map(|t| m.encode(t.as_ref())).collect::<Result<Vec<_>, _>>()?;
                Ok(Inputs::Ids(ids))
            }
        }
    }

    /// Writes `metadata.json` and the weights into `dir`.
    pub fn save(&self, dir: &std::path::Path, config: &TrainConfig) -> Result<(), ModelError> {
        checkpoint::save(self, dir, config)
    }

    pub fn load(dir: &std::path::Path) -> Result<(Self, TrainConfig), ModelError> {
        checkpoint::load(dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_parsing_lists_valid_names() {
        assert_eq!("cnn_gru".parse::<ModelFamily>().unwrap(), ModelFamily::CnnGru);
        let err = "svm".parse::<ModelFamily>().unwrap_err().to_string();
        for f in ModelFamily::ALL {
            assert!(err.contains(f.as_str()));
        }
    }

    #[test]
    fn table_defaults() {
        let l = TrainConfig::for_family(ModelFamily::LinearHead);
        assert_eq!((l.epochs, l.learning_rate, l.batch_size), (20, 1e-3, 16));
        let c = TrainConfig::for_family(ModelFamily::ContextualFinetune);
        assert_eq!((c.epochs, c.learning_rate, c.max_sequence_length), (5, 5e-5, Some(512)));
        let g = TrainConfig::for_family(ModelFamily::CnnGru);
        assert_eq!((g.epochs, g.learning_rate, g.max_sequence_length), (20, 1e-4, Some(64)));
        for f in ModelFamily::ALL {
            let t = TrainConfig::for_family(f);
            assert_eq!((t.optimizer, t.loss, t.class_weights), (Optimizer::Adamw, Loss::CrossEntropy, false));
        }
    }

    #[test]
    fn prediction_label_is_argmax_with_ties_to_zero() {
        assert_eq!(Prediction::from_probabilities([0.5, 0.5]).label, Label::NotHate);
        assert_eq!(Prediction::from_probabilities([0.2, 0.8]).label, Label::Hate);
        assert_eq!(Prediction::from_probabilities([0.9, 0.1]).label, Label::NotHate);
    }

    #[test]
    fn overrides_apply() {
        let o = TrainOverrides { epochs: Some(3), class_weights: Some(true), ..Default::default() };
        let c = o.apply(TrainConfig::for_family(ModelFamily::LinearHead));
        assert_eq!((c.epochs, c.class_weights, c.learning_rate), (3, true, 1e-3));
    }
}
