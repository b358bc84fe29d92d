use super::{Gradients, Matrix, ParamStore};

/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    moments: Vec<Option<(Matrix, Matrix)>>,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamW { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, step: 0, moments: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update. Parameters without a gradient are left untouched.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) {
        self.step += 1;
        if self.moments.len() < store.len() {
            self.moments.resize(store.len(), None);
        }
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps, lr, wd) = (self.beta1, self.beta2, self.eps, self.lr, self.weight_decay);
        for (id, grad) in grads.iter() {
            if !store.get(id).trainable {
                continue;
            }
            let value = store.value_mut(id);
            let (m, v) = self.moments[id.index()]
                .get_or_insert_with(|| (Matrix::zeros(value.raw_dim()), Matrix::zeros(value.raw_dim())));
            ndarray::Zip::from(&mut *value).and(&mut *m).and(&mut *v).and(grad).for_each(|p, m, v, &g| {
                *p -= lr * wd * *p;
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Graph;
    use ndarray::array;

    #[test]
    fn first_step_moves_by_lr() {
        // with bias correction the first Adam step is lr * sign(g)
        let mut store = ParamStore::new();
        let w = store.add("w", array![[1.0, -2.0]]);
        let grads = {
            let mut g = Graph::new(&store);
            let x = g.param(w);
            let s = g.sum_all(x);
            g.backward(s)
        };
        let mut opt = AdamW::new(0.1, 0.0);
        opt.step(&mut store, &grads);
        let v = store.value(w);
        assert!((v[[0, 0]] - 0.9).abs() < 1e-6);
        assert!((v[[0, 1]] + 2.1).abs() < 1e-6);
    }

    #[test]
    fn decoupled_decay_shrinks_weights() {
        let mut store = ParamStore::new();
        let w = store.add("w", array![[10.0]]);
        let grads = {
            let mut g = Graph::new(&store);
            let x = g.param(w);
            let z = g.scale(x, 0.0);
            let s = g.sum_all(z);
            g.backward(s)
        };
        let mut opt = AdamW::new(0.1, 0.5);
        opt.step(&mut store, &grads);
        assert!((store.value(w)[[0, 0]] - 9.5).abs() < 1e-9);
    }
}
