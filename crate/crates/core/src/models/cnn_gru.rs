//! Text CNN feeding a GRU.
//!
//! Three parallel 1-D convolutions (widths 2, 3, 4 by default) slide over
//! the token axis with "same" padding, each spanning the full embedding
//! depth. Their ReLU outputs are concatenated per time step and read by a
//! single-layer unidirectional GRU; the final hidden state goes through
//! dropout and an affine map to two logits.
//!
//! GRU gate layout follows the common `r, z, n` convention:
//!
//! ```text
//! r = σ(W_ir x + b_ir + W_hr h + b_hr)
//! z = σ(W_iz x + b_iz + W_hz h + b_hz)
//! n = tanh(W_in x + b_in + r ⊙ (W_hn h + b_hn))
//! h' = (1 − z) ⊙ n + z ⊙ h
//! ```

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Inputs, ModelError};
use crate::embeddings::{embed_tokens, Backend};
use crate::nn::{init, Graph, Matrix, NodeId, ParamId, ParamStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnGruParams {
    pub kernel_widths: Vec<usize>,
    pub filters: usize,
    pub hidden: usize,
    pub dropout: f64,
}

impl Default for CnnGruParams {
    fn default() -> Self {
        CnnGruParams { kernel_widths: vec![2, 3, 4], filters: 300, hidden: 64, dropout: 0.25 }
    }
}

impl CnnGruParams {
    pub fn max_width(&self) -> usize {
        self.kernel_widths.iter().copied().max().unwrap_or(1)
    }
}

pub struct CnnGru {
    pub(crate) store: ParamStore,
    params: CnnGruParams,
    input_dim: usize,
    conv: Vec<(usize, ParamId, ParamId)>,
    w_ih: ParamId,
    w_hh: ParamId,
    b_ih: ParamId,
    b_hh: ParamId,
    head_w: ParamId,
    head_b: ParamId,
}

impl CnnGru {
    pub fn new(input_dim: usize, params: &CnnGruParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let (f, h) = (params.filters, params.hidden);
        for &w in &params.kernel_widths {
            let bound = 1.0 / ((w * input_dim) as f64).sqrt();
            store.add(format!("conv{w}.weight"), init::uniform(w * input_dim, f, bound, &mut rng));
            store.add(format!("conv{w}.bias"), init::uniform(1, f, bound, &mut rng));
        }
        let feat = f * params.kernel_widths.len();
        let gb = 1.0 / (h as f64).sqrt();
        store.add("gru.w_ih", init::uniform(feat, 3 * h, gb, &mut rng));
        store.add("gru.w_hh", init::uniform(h, 3 * h, gb, &mut rng));
        store.add("gru.b_ih", init::uniform(1, 3 * h, gb, &mut rng));
        store.add("gru.b_hh", init::uniform(1, 3 * h, gb, &mut rng));
        store.add("head.weight", init::uniform(h, 2, gb, &mut rng));
        store.add("head.bias", init::uniform(1, 2, gb, &mut rng));
        Self::from_store(store, input_dim, params.clone()).expect("freshly built store is complete")
    }

    pub(crate) fn from_store(store: ParamStore, input_dim: usize, params: CnnGruParams) -> Result<Self, String> {
        let get = |n: &str| store.id(n).ok_or_else(|| format!("missing {n}"));
        let conv = params
            .kernel_widths
            .iter()
            .map(|&w| Ok((w, get(&format!("conv{w}.weight"))?, get(&format!("conv{w}.bias"))?)))
            .collect::<Result<Vec<_>, String>>()?;
        for &(w, wid, _) in &conv {
            if store.value(wid).dim() != (w * input_dim, params.filters) {
                return Err(format!("conv{w}.weight has the wrong shape"));
            }
        }
        Ok(CnnGru {
            conv,
            w_ih: get("gru.w_ih")?,
            w_hh: get("gru.w_hh")?,
            b_ih: get("gru.b_ih")?,
            b_hh: get("gru.b_hh")?,
            head_w: get("head.weight")?,
            head_b: get("head.bias")?,
            store,
            params,
            input_dim,
        })
    }

    /// Token matrix for one cleaned text: truncated to `cap` tokens and
    /// zero-padded up to the widest kernel.
    pub(crate) fn featurize(&self, text: &str, backend: &Backend, cap: usize) -> Result<Matrix, ModelError> {
        let tokens: Vec<&str> = text.split_whitespace().take(cap).collect();
        if tokens.is_empty() {
            return Err(ModelError::Precondition("cannot featurize an empty text".into()));
        }
        Ok(pad_rows(embed_tokens(&tokens, backend)?, self.params.max_width()))
    }

    pub(crate) fn forward(
        &self,
        g: &mut Graph,
        inputs: &Inputs,
        dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<NodeId, ModelError> {
        let Inputs::Sequences(seqs) = inputs else {
            return Err(ModelError::Shape {
                context: "cnn_gru input".into(),
                expected: "token matrices".into(),
                actual: "non-sequence input".into(),
            });
        };
        if seqs.is_empty() {
            return Err(ModelError::Precondition("empty batch".into()));
        }
        let seqs: Vec<Matrix> = seqs
            .iter()
            .map(|s| {
                if s.ncols() != self.input_dim {
                    Err(ModelError::Shape {
                        context: "cnn_gru token embeddings".into(),
                        expected: format!("{} columns", self.input_dim),
                        actual: format!("{} columns", s.ncols()),
                    })
                } else {
                    Ok(pad_rows(s.clone(), self.params.max_width()))
                }
            })
            .collect::<Result<_, _>>()?;

        let mut branches = Vec::with_capacity(self.conv.len());
        for &(w, wid, bid) in &self.conv {
            let unfolded = g.input(unfold_same(&seqs, w));
            let (wn, bn) = (g.param(wid), g.param(bid));
            let pre = g.affine(unfolded, wn, bn);
            branches.push(g.relu(pre));
        }
        let feats = g.concat_cols(&branches);
        let (w_ih, b_ih) = (g.param(self.w_ih), g.param(self.b_ih));
        let gi_all = g.affine(feats, w_ih, b_ih);
        let (w_hh, b_hh) = (g.param(self.w_hh), g.param(self.b_hh));
        let h = self.params.hidden;

        let mut finals = Vec::with_capacity(seqs.len());
        let mut offset = 0;
        for s in &seqs {
            let mut state = g.input(Matrix::zeros((1, h)));
            for t in 0..s.nrows() {
                let gi = g.slice_rows(gi_all, offset + t, offset + t + 1);
                let gh = g.affine(state, w_hh, b_hh);
                let (gi_r, gh_r) = (g.slice_cols(gi, 0, h), g.slice_cols(gh, 0, h));
                let (gi_z, gh_z) = (g.slice_cols(gi, h, 2 * h), g.slice_cols(gh, h, 2 * h));
                let (gi_n, gh_n) = (g.slice_cols(gi, 2 * h, 3 * h), g.slice_cols(gh, 2 * h, 3 * h));
                let r_pre = g.add(gi_r, gh_r);
                let r = g.sigmoid(r_pre);
                let z_pre = g.add(gi_z, gh_z);
                let z = g.sigmoid(z_pre);
                let rn = g.mul(r, gh_n);
                let n_pre = g.add(gi_n, rn);
                let n = g.tanh(n_pre);
                let keep = g.one_minus(z);
                let new_part = g.mul(keep, n);
                let old_part = g.mul(z, state);
                state = g.add(new_part, old_part);
            }
            offset += s.nrows();
            finals.push(state);
        }
        let mut hidden = g.concat_rows(&finals);
        if let Some(rng) = dropout {
            hidden = g.mask_mul(hidden, dropout_mask(finals.len(), h, self.params.dropout, rng));
        }
        let (hw, hb) = (g.param(self.head_w), g.param(self.head_b));
        Ok(g.affine(hidden, hw, hb))
    }
}

pub(crate) fn pad_rows(m: Matrix, min_rows: usize) -> Matrix {
    if m.nrows() >= min_rows {
        return m;
    }
    let mut out = Matrix::zeros((min_rows, m.ncols()));
    out.slice_mut(ndarray::s![..m.nrows(), ..]).assign(&m);
    out
}

/// Row `t` of each sequence holds tokens `t − ⌊(w−1)/2⌋ ..` (w of them)
/// laid side by side, zeros beyond the edges. Sequences are stacked.
fn unfold_same(seqs: &[Matrix], w: usize) -> Matrix {
    let d = seqs[0].ncols();
    let total: usize = seqs.iter().map(|s| s.nrows()).sum();
    let left = (w - 1) / 2;
    let mut out = Matrix::zeros((total, w * d));
    let mut row = 0;
    for s in seqs {
        let t_len = s.nrows() as isize;
        for t in 0..t_len {
            for k in 0..w {
                let src = t - left as isize + k as isize;
                if (0..t_len).contains(&src) {
                    out.slice_mut(ndarray::s![row, k * d..(k + 1) * d]).assign(&s.row(src as usize));
                }
            }
            row += 1;
        }
    }
    out
}

/// Inverted-dropout mask: kept entries are scaled by `1 / (1 − p)`.
pub(crate) fn dropout_mask(rows: usize, cols: usize, p: f64, rng: &mut ChaCha8Rng) -> Matrix {
    if p <= 0.0 {
        return Matrix::ones((rows, cols));
    }
    let keep = 1.0 / (1.0 - p);
    Matrix::from_shape_fn((rows, cols), |_| if rng.gen::<f64>() < p { 0.0 } else { keep })
}
