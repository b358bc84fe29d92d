//! BERT-format encoder with a sequence-classification head.
//!
//! A checkpoint directory holds `config.json`, `model.safetensors` and
//! either `tokenizer.json` or `vocab.txt` (plus an optional
//! `tokenizer_config.json` carrying `do_lower_case`). Tensor names follow
//! the usual `bert.embeddings.*`, `bert.encoder.layer.N.*`,
//! `bert.pooler.*`, `classifier.*` layout; linear weights are `[out, in]`.
//! Missing pooler or classifier tensors are initialized from N(0, 0.02).

mod config;

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tokenizers::models::wordpiece::WordPiece;
use tokenizers::normalizers::bert::BertNormalizer;
use tokenizers::pre_tokenizers::bert::BertPreTokenizer;
use tokenizers::processors::bert::BertProcessing;
use tokenizers::utils::truncation::TruncationParams;
use tokenizers::{Model as _, Tokenizer};

pub use config::BertConfig;

use super::cnn_gru::dropout_mask;
use super::weights::{self, Precision};
use super::{Inputs, ModelError};
use crate::embeddings::EmbeddingError;
use crate::nn::{init, Graph, NodeId, ParamId, ParamStore};

pub const WEIGHTS_FILE: &str = "model.safetensors";
const TOKENIZER_FILES: [&str; 3] = ["tokenizer.json", "vocab.txt", "tokenizer_config.json"];

struct Dense {
    w: ParamId,
    b: ParamId,
}

struct Norm {
    gamma: ParamId,
    beta: ParamId,
}

struct Layer {
    query: Dense,
    key: Dense,
    value: Dense,
    attn_out: Dense,
    attn_norm: Norm,
    intermediate: Dense,
    output: Dense,
    out_norm: Norm,
}

pub(crate) struct BertClassifier {
    pub(crate) store: ParamStore,
    pub(crate) config: BertConfig,
    tokenizer: Tokenizer,
    tokenizer_dir: PathBuf,
    max_len: usize,
    word: ParamId,
    position: ParamId,
    token_type: ParamId,
    emb_norm: Norm,
    layers: Vec<Layer>,
    pooler: Dense,
    classifier: Dense,
}

fn unavailable(path: &Path, reason: impl Into<String>) -> ModelError {
    ModelError::Embedding(EmbeddingError::BackendUnavailable {
        backend_id: path.display().to_string(),
        reason: reason.into(),
    })
}

/// Tensors stored as vectors in the checkpoint format.
pub(crate) fn is_one_d(name: &str) -> bool {
    name.ends_with(".bias") || name.ends_with("LayerNorm.weight")
}

fn canonical_name(name: &str) -> String {
    let n = if name.starts_with("bert.") || name.starts_with("classifier.") {
        name.to_owned()
    } else {
        format!("bert.{name}")
    };
    if let Some(stem) = n.strip_suffix("LayerNorm.gamma") {
        format!("{stem}LayerNorm.weight")
    } else if let Some(stem) = n.strip_suffix("LayerNorm.beta") {
        format!("{stem}LayerNorm.bias")
    } else {
        n
    }
}

fn load_tokenizer(dir: &Path, max_len: usize) -> Result<Tokenizer, ModelError> {
    let tk_err = |e: Box<dyn std::error::Error + Send + Sync>| ModelError::checkpoint(dir, format!("tokenizer: {e}"));
    let mut tk = if dir.join("tokenizer.json").exists() {
        Tokenizer::from_file(dir.join("tokenizer.json")).map_err(tk_err)?
    } else {
        let vocab = dir.join("vocab.txt");
        if !vocab.exists() {
            return Err(unavailable(dir, "checkpoint has neither tokenizer.json nor vocab.txt"));
        }
        let lower = match std::fs::read_to_string(dir.join("tokenizer_config.json")) {
            Ok(s) => serde_json::from_str::<serde_json::Value>(&s)
                .ok()
                .and_then(|v| v.get("do_lower_case").and_then(|b| b.as_bool()))
                .unwrap_or(true),
            Err(_) => true,
        };
        let wp = WordPiece::from_file(&vocab.to_string_lossy()).unk_token("[UNK]".into()).build().map_err(tk_err)?;
        let special = |t: &str| {
            wp.get_vocab().get(t).copied().ok_or_else(|| ModelError::checkpoint(&vocab, format!("vocabulary lacks {t}")))
        };
        let (cls, sep) = (special("[CLS]")?, special("[SEP]")?);
        let mut tk = Tokenizer::new(wp);
        tk.with_normalizer(Some(BertNormalizer::new(true, true, None, lower))).map_err(tk_err)?;
        tk.with_pre_tokenizer(Some(BertPreTokenizer));
        tk.with_post_processor(Some(BertProcessing::new(("[SEP]".into(), sep), ("[CLS]".into(), cls))));
        tk
    };
    tk.with_truncation(Some(TruncationParams { max_length: max_len, ..Default::default() })).map_err(tk_err)?;
    tk.with_padding(None);
    Ok(tk)
}

impl BertClassifier {
    /// Loads a checkpoint; the sequence cap is `min(max_len, positions)`.
    pub(crate) fn load(dir: &Path, max_len: usize, seed: u64) -> Result<Self, ModelError> {
        if !dir.is_dir() {
            return Err(unavailable(dir, "checkpoint directory does not exist"));
        }
        let cfg_path = dir.join("config.json");
        let cfg_text = std::fs::read_to_string(&cfg_path).map_err(|_| unavailable(dir, "config.json is missing"))?;
        let config: BertConfig = serde_json::from_str(&cfg_text).map_err(|e| ModelError::checkpoint(&cfg_path, e))?;
        config.validate().map_err(|e| ModelError::checkpoint(&cfg_path, e))?;
        let wpath = dir.join(WEIGHTS_FILE);
        if !wpath.exists() {
            return Err(unavailable(dir, format!("{WEIGHTS_FILE} is missing")));
        }
        let mut store = ParamStore::new();
        for t in weights::read(&wpath)? {
            let name = canonical_name(&t.name);
            if !(name.starts_with("bert.embeddings.")
                || name.starts_with("bert.encoder.")
                || name.starts_with("bert.pooler.")
                || name.starts_with("classifier."))
            {
                continue;
            }
            if store.id(&name).is_none() {
                store.add(name, t.into_matrix(&wpath)?);
            }
        }
        Self::assemble(store, config, dir, max_len, seed)
    }

    fn assemble(mut store: ParamStore, config: BertConfig, tokenizer_dir: &Path, max_len: usize, seed: u64) -> Result<Self, ModelError> {
        let h = config.hidden_size;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init_missing = |store: &mut ParamStore, name: &str, rows: usize, cols: usize, zero: bool| {
            if store.id(name).is_none() {
                let v = if zero { init::zeros(rows, cols) } else { init::normal(rows, cols, 0.02, &mut rng) };
                store.add(name, v);
            }
        };
        init_missing(&mut store, "bert.pooler.dense.weight", h, h, false);
        init_missing(&mut store, "bert.pooler.dense.bias", 1, h, true);
        // a head saved for a different label count is replaced
        if store.id("classifier.weight").is_some_and(|id| store.value(id).dim() != (2, h)) {
            return Err(ModelError::checkpoint(tokenizer_dir, "classifier.weight is not [2, hidden_size]"));
        }
        init_missing(&mut store, "classifier.weight", 2, h, false);
        init_missing(&mut store, "classifier.bias", 1, 2, true);

        let where_ = tokenizer_dir.join(WEIGHTS_FILE);
        let get = |name: &str, shape: (usize, usize)| -> Result<ParamId, ModelError> {
            let id = store.id(name).ok_or_else(|| ModelError::checkpoint(&where_, format!("missing tensor {name}")))?;
            let got = store.value(id).dim();
            if got != shape {
                return Err(ModelError::checkpoint(&where_, format!("{name}: expected {shape:?}, found {got:?}")));
            }
            Ok(id)
        };
        let dense = |p: &str, out: usize, inp: usize| -> Result<Dense, ModelError> {
            Ok(Dense { w: get(&format!("{p}.weight"), (out, inp))?, b: get(&format!("{p}.bias"), (1, out))? })
        };
        let norm = |p: &str| -> Result<Norm, ModelError> {
            Ok(Norm { gamma: get(&format!("{p}.weight"), (1, h))?, beta: get(&format!("{p}.bias"), (1, h))? })
        };
        let i = config.intermediate_size;
        let layers = (0..config.num_hidden_layers)
            .map(|l| {
                let p = format!("bert.encoder.layer.{l}");
                Ok(Layer {
                    query: dense(&format!("{p}.attention.self.query"), h, h)?,
                    key: dense(&format!("{p}.attention.self.key"), h, h)?,
                    value: dense(&format!("{p}.attention.self.value"), h, h)?,
                    attn_out: dense(&format!("{p}.attention.output.dense"), h, h)?,
                    attn_norm: norm(&format!("{p}.attention.output.LayerNorm"))?,
                    intermediate: dense(&format!("{p}.intermediate.dense"), i, h)?,
                    output: dense(&format!("{p}.output.dense"), h, i)?,
                    out_norm: norm(&format!("{p}.output.LayerNorm"))?,
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        let max_len = max_len.min(config.max_position_embeddings);
        let model = BertClassifier {
            word: get("bert.embeddings.word_embeddings.weight", (config.vocab_size, h))?,
            position: get("bert.embeddings.position_embeddings.weight", (config.max_position_embeddings, h))?,
            token_type: get("bert.embeddings.token_type_embeddings.weight", (config.type_vocab_size, h))?,
            emb_norm: norm("bert.embeddings.LayerNorm")?,
            layers,
            pooler: dense("bert.pooler.dense", h, h)?,
            classifier: dense("classifier", 2, h)?,
            tokenizer: load_tokenizer(tokenizer_dir, max_len)?,
            tokenizer_dir: tokenizer_dir.to_path_buf(),
            store,
            config,
            max_len,
        };
        Ok(model)
    }

    pub(crate) fn max_len(&self) -> usize {
        self.max_len
    }

    /// Subword ids with `[CLS]`/`[SEP]`, truncated to the sequence cap.
    pub(crate) fn encode(&self, text: &str) -> Result<Vec<u32>, ModelError> {
        let enc = self
            .tokenizer
            .encode(text, true)
            .map_err(|e| ModelError::checkpoint(&self.tokenizer_dir, format!("tokenizer: {e}")))?;
        Ok(enc.get_ids().to_vec())
    }

    /// Writes config, tokenizer files and weights as a loadable checkpoint.
    pub(crate) fn save(&self, dir: &Path) -> Result<(), ModelError> {
        let cfg = serde_json::to_string_pretty(&self.config).expect("config serializes");
        crate::corpus::io::write_atomic(&dir.join("config.json"), cfg.as_bytes())
            .map_err(|e| ModelError::checkpoint(dir, e))?;
        for f in TOKENIZER_FILES {
            let src = self.tokenizer_dir.join(f);
            if src.exists() && src != dir.join(f) {
                std::fs::copy(&src, dir.join(f)).map_err(|e| ModelError::checkpoint(&src, e))?;
            }
        }
        weights::write(&dir.join(WEIGHTS_FILE), &self.store, Precision::F64, is_one_d)
    }

    fn dense(&self, g: &mut Graph, x: NodeId, d: &Dense) -> NodeId {
        let (w, b) = (g.param(d.w), g.param(d.b));
        let xw = g.matmul_t(x, w);
        g.add_row(xw, b)
    }

    fn norm(&self, g: &mut Graph, x: NodeId, n: &Norm) -> NodeId {
        let (gamma, beta) = (g.param(n.gamma), g.param(n.beta));
        g.layer_norm(x, gamma, beta, self.config.layer_norm_eps)
    }

    fn drop(g: &mut Graph, x: NodeId, p: f64, rng: &mut Option<&mut ChaCha8Rng>) -> NodeId {
        match rng {
            Some(r) if p > 0.0 => {
                let (rows, cols) = g.shape(x);
                g.mask_mul(x, dropout_mask(rows, cols, p, r))
            }
            _ => x,
        }
    }

    fn act(&self, g: &mut Graph, x: NodeId) -> NodeId {
        if self.config.hidden_act == "relu" {
            g.relu(x)
        } else {
            g.gelu(x)
        }
    }

    pub(crate) fn forward(
        &self,
        g: &mut Graph,
        inputs: &Inputs,
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<NodeId, ModelError> {
        let Inputs::Ids(seqs) = inputs else {
            return Err(ModelError::Shape {
                context: "contextual model input".into(),
                expected: "subword ids".into(),
                actual: "embedded input".into(),
            });
        };
        if seqs.is_empty() {
            return Err(ModelError::Precondition("empty batch".into()));
        }
        let cfg = &self.config;
        let mut ids = Vec::new();
        let mut positions = Vec::new();
        let mut spans = Vec::with_capacity(seqs.len());
        for s in seqs {
            if s.is_empty() {
                return Err(ModelError::Precondition("empty token sequence".into()));
            }
            let s = &s[..s.len().min(self.max_len)];
            if let Some(&bad) = s.iter().find(|&&t| t as usize >= cfg.vocab_size) {
                return Err(ModelError::Shape {
                    context: "token id".into(),
                    expected: format!("< {}", cfg.vocab_size),
                    actual: bad.to_string(),
                });
            }
            spans.push((ids.len(), ids.len() + s.len()));
            ids.extend(s.iter().map(|&t| t as usize));
            positions.extend(0..s.len());
        }
        let (word, pos, typ) = (g.param(self.word), g.param(self.position), g.param(self.token_type));
        let we = g.gather(word, &ids);
        let pe = g.gather(pos, &positions);
        let te = g.gather(typ, &vec![0; ids.len()]);
        let sum = g.add(we, pe);
        let sum = g.add(sum, te);
        let mut x = self.norm(g, sum, &self.emb_norm);
        x = Self::drop(g, x, cfg.hidden_dropout_prob, &mut dropout);

        let heads = cfg.num_attention_heads;
        let dh = cfg.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        for layer in &self.layers {
            let q = self.dense(g, x, &layer.query);
            let k = self.dense(g, x, &layer.key);
            let v = self.dense(g, x, &layer.value);
            let mut per_seq = Vec::with_capacity(spans.len());
            for &(a, b) in &spans {
                let (qs, ks, vs) = (g.slice_rows(q, a, b), g.slice_rows(k, a, b), g.slice_rows(v, a, b));
                let mut ctx_heads = Vec::with_capacity(heads);
                for hd in 0..heads {
                    let (c0, c1) = (hd * dh, (hd + 1) * dh);
                    let (qh, kh, vh) = (g.slice_cols(qs, c0, c1), g.slice_cols(ks, c0, c1), g.slice_cols(vs, c0, c1));
                    let scores = g.matmul_t(qh, kh);
                    let scores = g.scale(scores, scale);
                    let probs = g.softmax_rows(scores);
                    let probs = Self::drop(g, probs, cfg.attention_probs_dropout_prob, &mut dropout);
                    ctx_heads.push(g.matmul(probs, vh));
                }
                per_seq.push(g.concat_cols(&ctx_heads));
            }
            let ctx = g.concat_rows(&per_seq);
            let attn = self.dense(g, ctx, &layer.attn_out);
            let attn = Self::drop(g, attn, cfg.hidden_dropout_prob, &mut dropout);
            let res = g.add(attn, x);
            x = self.norm(g, res, &layer.attn_norm);
            let inter = self.dense(g, x, &layer.intermediate);
            let inter = self.act(g, inter);
            let out = self.dense(g, inter, &layer.output);
            let out = Self::drop(g, out, cfg.hidden_dropout_prob, &mut dropout);
            let res = g.add(out, x);
            x = self.norm(g, res, &layer.out_norm);
        }
        let cls: Vec<NodeId> = spans.iter().map(|&(a, _)| g.slice_rows(x, a, a + 1)).collect();
        let cls = g.concat_rows(&cls);
        let pooled = self.dense(g, cls, &self.pooler);
        let pooled = g.tanh(pooled);
        let pooled = Self::drop(g, pooled, cfg.hidden_dropout_prob, &mut dropout);
        Ok(self.dense(g, pooled, &self.classifier))
    }

    /// Rebuilds a fine-tuned classifier saved by [`BertClassifier::save`].
    pub(crate) fn from_saved(dir: &Path, max_len: usize) -> Result<Self, ModelError> {
        Self::load(dir, max_len, 0)
    }
}

/// Writes a randomly initialized checkpoint (N(0, 0.02) weights, unit
/// LayerNorm) with the given vocabulary. The vocabulary must contain
/// `[PAD]`, `[UNK]`, `[CLS]` and `[SEP]`.
pub fn write_random_checkpoint(dir: &Path, config: &BertConfig, vocab: &[&str], seed: u64) -> Result<(), ModelError> {
    for t in ["[PAD]", "[UNK]", "[CLS]", "[SEP]"] {
        if !vocab.contains(&t) {
            return Err(ModelError::checkpoint(dir, format!("vocabulary lacks {t}")));
        }
    }
    let mut config = config.clone();
    config.vocab_size = vocab.len();
    config.validate().map_err(|e| ModelError::checkpoint(dir, e))?;
    std::fs::create_dir_all(dir).map_err(|e| ModelError::checkpoint(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, i) = (config.hidden_size, config.intermediate_size);
    let mut s = ParamStore::new();
    let mut normal = |s: &mut ParamStore, name: String, r: usize, c: usize| {
        s.add(name, init::normal(r, c, 0.02, &mut rng));
    };
    normal(&mut s, "bert.embeddings.word_embeddings.weight".into(), config.vocab_size, h);
    normal(&mut s, "bert.embeddings.position_embeddings.weight".into(), config.max_position_embeddings, h);
    normal(&mut s, "bert.embeddings.token_type_embeddings.weight".into(), config.type_vocab_size, h);
    let ln = |s: &mut ParamStore, p: &str| {
        s.add(format!("{p}.LayerNorm.weight"), init::ones(1, h));
        s.add(format!("{p}.LayerNorm.bias"), init::zeros(1, h));
    };
    ln(&mut s, "bert.embeddings");
    for l in 0..config.num_hidden_layers {
        let p = format!("bert.encoder.layer.{l}");
        for (name, out, inp) in [
            ("attention.self.query", h, h),
            ("attention.self.key", h, h),
            ("attention.self.value", h, h),
            ("attention.output.dense", h, h),
            ("intermediate.dense", i, h),
            ("output.dense", h, i),
        ] {
            normal(&mut s, format!("{p}.{name}.weight"), out, inp);
            s.add(format!("{p}.{name}.bias"), init::zeros(1, out));
        }
        ln(&mut s, &format!("{p}.attention.output"));
        ln(&mut s, &format!("{p}.output"));
    }
    normal(&mut s, "bert.pooler.dense.weight".into(), h, h);
    s.add("bert.pooler.dense.bias", init::zeros(1, h));
    let cfg = serde_json::to_string_pretty(&config).expect("config serializes");
    std::fs::write(dir.join("config.json"), cfg).map_err(|e| ModelError::checkpoint(dir, e))?;
    std::fs::write(dir.join("vocab.txt"), vocab.join("\n") + "\n").map_err(|e| ModelError::checkpoint(dir, e))?;
    weights::write(&dir.join(WEIGHTS_FILE), &s, Precision::F32, is_one_d)
}
