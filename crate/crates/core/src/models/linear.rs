//! Logistic regression in two-class softmax form.

use super::{Inputs, ModelError};
use crate::nn::{Graph, Matrix, NodeId, ParamId, ParamStore};

pub struct LinearHead {
    pub(crate) store: ParamStore,
    input_dim: usize,
    weight: ParamId,
    bias: ParamId,
}

impl LinearHead {
    /// `input_dim × 2` weights and a bias row, all zero.
    pub fn new(input_dim: usize) -> Self {
        let mut store = ParamStore::new();
        let weight = store.add("linear.weight", Matrix::zeros((input_dim, 2)));
        let bias = store.add("linear.bias", Matrix::zeros((1, 2)));
        LinearHead { store, input_dim, weight, bias }
    }

    pub(crate) fn from_store(store: ParamStore) -> Result<Self, String> {
        let weight = store.id("linear.weight").ok_or("missing linear.weight")?;
        let bias = store.id("linear.bias").ok_or("missing linear.bias")?;
        let (d, k) = store.value(weight).dim();
        if k != 2 || store.value(bias).dim() != (1, 2) {
            return Err("linear head tensors have the wrong shape".into());
        }
        Ok(LinearHead { store, input_dim: d, weight, bias })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub(crate) fn forward(&self, g: &mut Graph, inputs: &Inputs) -> Result<NodeId, ModelError> {
        let Inputs::Dense(x) = inputs else {
            return Err(ModelError::Shape {
                context: "linear head input".into(),
                expected: "sentence vectors".into(),
                actual: "sequence input".into(),
            });
        };
        if x.ncols() != self.input_dim {
            return Err(ModelError::Shape {
                context: "linear head input".into(),
                expected: format!("{} features", self.input_dim),
                actual: format!("{} features", x.ncols()),
            });
        }
        let xi = g.input(x.clone());
        let (w, b) = (g.param(self.weight), g.param(self.bias));
        Ok(g.affine(xi, w, b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Model;
    use rand::{Rng, SeedableRng};

    #[test]
    fn parameter_count() {
        assert_eq!(Model::linear_head(1024).num_parameters(), 2050);
    }

    #[test]
    fn zero_init_gives_uniform_probabilities() {
        let m = Model::linear_head(8);
        let x = Matrix::from_shape_fn((3, 8), |(i, j)| (i * 8 + j) as f64 - 7.0);
        let preds = crate::models::predict_inputs(&m, &Inputs::Dense(x), 16).unwrap();
        for p in preds {
            assert_eq!(p.probabilities, [0.5, 0.5]);
        }
    }

    #[test]
    fn dimension_mismatch_names_both_sizes() {
        let m = Model::linear_head(1024);
        let err = m.logits(&Inputs::Dense(Matrix::zeros((2, 300)))).unwrap_err().to_string();
        assert!(err.contains("1024") && err.contains("300"), "{err}");
    }

    /// Analytic cross-entropy gradients against central differences.
    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let d = rng.gen_range(1..=8);
            let n = rng.gen_range(1..=4);
            let mut head = LinearHead::new(d);
            let w = head.weight;
            let b = head.bias;
            *head.store.value_mut(w) = Matrix::from_shape_fn((d, 2), |_| rng.gen_range(-1.0..1.0));
            *head.store.value_mut(b) = Matrix::from_shape_fn((1, 2), |_| rng.gen_range(-1.0..1.0));
            let x = Matrix::from_shape_fn((n, d), |_| rng.gen_range(-2.0..2.0));
            let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let loss_of = |s: &ParamStore, head: &LinearHead| {
                let mut g = Graph::new(s);
                let l = head.forward(&mut g, &Inputs::Dense(x.clone())).unwrap();
                let loss = g.cross_entropy(l, &y, None);
                g.value(loss)[[0, 0]]
            };
            let grads = {
                let mut g = Graph::new(&head.store);
                let l = head.forward(&mut g, &Inputs::Dense(x.clone())).unwrap();
                let loss = g.cross_entropy(l, &y, None);
                g.backward(loss)
            };
            for id in [w, b] {
                let (r, c) = head.store.value(id).dim();
                for i in 0..r {
                    for j in 0..c {
                        let h = 1e-6;
                        let orig = head.store.value(id)[[i, j]];
                        let mut s = head.store.clone();
                        s.value_mut(id)[[i, j]] = orig + h;
                        let up = loss_of(&s, &head);
                        s.value_mut(id)[[i, j]] = orig - h;
                        let down = loss_of(&s, &head);
                        let numeric = (up - down) / (2.0 * h);
                        let analytic = grads.get(id).unwrap()[[i, j]];
                        let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-8);
                        assert!(rel < 1e-4, "trial {trial}: {analytic} vs {numeric}");
                    }
                }
            }
        }
    }
}
