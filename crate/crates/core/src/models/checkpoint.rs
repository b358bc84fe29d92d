//! `runs/<run_id>/model/` layout: `metadata.json` plus `model.safetensors`
//! (float64). Contextual checkpoints also carry `config.json` and the
//! tokenizer files so the directory is a loadable encoder checkpoint.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bert::{self, BertClassifier};
use super::cnn_gru::CnnGru;
use super::linear::LinearHead;
use super::weights::{self, Precision};
use super::{Model, ModelError, ModelFamily, ModelSpec, Network, TrainConfig};
use crate::nn::ParamStore;

pub const METADATA_FILE: &str = "metadata.json";

#[derive(Debug, Serialize, Deserialize)]
struct ParamInfo {
    name: String,
    shape: [usize; 2],
}

#[derive(Debug, Serialize, Deserialize)]
struct Metadata {
    spec: ModelSpec,
    train_config: TrainConfig,
    code_version: String,
    weights_file: String,
    parameters: Vec<ParamInfo>,
}

pub(super) fn save(model: &Model, dir: &Path, config: &TrainConfig) -> Result<(), ModelError> {
    std::fs::create_dir_all(dir).map_err(|e| ModelError::checkpoint(dir, e))?;
    match &model.network {
        Network::Contextual(b) => b.save(dir)?,
        _ => weights::write(&dir.join(bert::WEIGHTS_FILE), model.params(), Precision::F64, |_| false)?,
    }
    let meta = Metadata {
        spec: model.spec.clone(),
        train_config: config.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_owned(),
        weights_file: bert::WEIGHTS_FILE.to_owned(),
        parameters: model
            .params()
            .iter()
            .map(|(_, p)| ParamInfo { name: p.name.clone(), shape: [p.value.nrows(), p.value.ncols()] })
            .collect(),
    };
    let body = serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n";
    crate::corpus::io::write_atomic(&dir.join(METADATA_FILE), body.as_bytes()).map_err(|e| ModelError::checkpoint(dir, e))
}

pub(super) fn load(dir: &Path) -> Result<(Model, TrainConfig), ModelError> {
    let mpath = dir.join(METADATA_FILE);
    let text = std::fs::read_to_string(&mpath).map_err(|e| ModelError::checkpoint(&mpath, e))?;
    let meta: Metadata = serde_json::from_str(&text).map_err(|e| ModelError::checkpoint(&mpath, e))?;
    let wpath = dir.join(&meta.weights_file);
    let network = match meta.spec.family {
        ModelFamily::ContextualFinetune => {
            let cap = meta.spec.max_sequence_length.unwrap_or(512);
            Network::Contextual(Box::new(BertClassifier::from_saved(dir, cap)?))
        }
        family => {
            let mut store = ParamStore::new();
            for t in weights::read(&wpath)? {
                let name = t.name.clone();
                store.add(name, t.into_matrix(&wpath)?);
            }
            let bad = |m: String| ModelError::checkpoint(&wpath, m);
            if family == ModelFamily::LinearHead {
                Network::Linear(LinearHead::from_store(store).map_err(bad)?)
            } else {
                let params = meta.spec.cnn_gru.clone().ok_or_else(|| bad("metadata lacks cnn_gru parameters".into()))?;
                let dim = meta.spec.input_dim.ok_or_else(|| bad("metadata lacks input_dim".into()))?;
                Network::CnnGru(CnnGru::from_store(store, dim, params).map_err(bad)?)
            }
        }
    };
    Ok((Model { spec: meta.spec, network }, meta.train_config))
}
