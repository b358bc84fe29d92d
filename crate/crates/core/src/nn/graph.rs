use std::collections::HashMap;

use ndarray::{s, Axis};

use super::{Matrix, ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

enum Op {
    Input,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    /// a · bᵀ
    MatMulT(NodeId, NodeId),
    Add(NodeId, NodeId),
    /// (m×n) + (1×n) broadcast over rows
    AddRow(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    OneMinus(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    Gelu(NodeId),
    SoftmaxRows(NodeId),
    LayerNorm { x: NodeId, gamma: NodeId, beta: NodeId, xhat: Matrix, inv_std: Vec<f64> },
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    SliceRows(NodeId, usize, usize),
    SliceCols(NodeId, usize, usize),
    Gather(NodeId, Vec<usize>),
    MaskMul(NodeId, Matrix),
    SumAll(NodeId),
    CrossEntropy { logits: NodeId, targets: Vec<usize>, weights: Vec<f64>, probs: Matrix },
}

struct Node {
    /// `None` for parameters, whose value lives in the store.
    value: Option<Matrix>,
    op: Op,
    needs_grad: bool,
}

/// Gradients of a scalar loss with respect to every parameter that
/// influenced it.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    by_param: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Matrix> {
        self.by_param.get(id.index()).and_then(Option::as_ref)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Matrix)> {
        self.by_param.iter().enumerate().filter_map(|(i, g)| g.as_ref().map(|g| (ParamId(i), g)))
    }
}

/// Computation tape for one forward/backward pass.
pub struct Graph<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    params: HashMap<ParamId, NodeId>,
    track: bool,
}

impl<'p> Graph<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Graph { store, nodes: Vec::new(), params: HashMap::new(), track: true }
    }

    /// A graph that records no gradient information (inference).
    pub fn inference(store: &'p ParamStore) -> Self {
        Graph { track: false, ..Graph::new(store) }
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        let node = &self.nodes[id.0];
        match (&node.value, &node.op) {
            (Some(v), _) => v,
            (None, Op::Param(p)) => self.store.value(*p),
            (None, _) => unreachable!("non-parameter node without a value"),
        }
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        self.value(id).dim()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op, inputs: &[NodeId]) -> NodeId {
        let needs_grad = self.track && inputs.iter().any(|i| self.nodes[i.0].needs_grad);
        self.nodes.push(Node { value: Some(value), op, needs_grad });
        NodeId(self.nodes.len() - 1)
    }

    /// A constant input.
    pub fn input(&mut self, value: Matrix) -> NodeId {
        self.nodes.push(Node { value: Some(value), op: Op::Input, needs_grad: false });
        NodeId(self.nodes.len() - 1)
    }

    /// The node for a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(&n) = self.params.get(&id) {
            return n;
        }
        let needs_grad = self.track && self.store.get(id).trainable;
        self.nodes.push(Node { value: None, op: Op::Param(id), needs_grad });
        let n = NodeId(self.nodes.len() - 1);
        self.params.insert(id, n);
        n
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b), &[a, b])
    }

    pub fn matmul_t(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).dot(&self.value(b).t());
        self.push(v, Op::MatMulT(a, b), &[a, b])
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b), &[a, b])
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        assert_eq!(self.shape(row).0, 1, "add_row expects a 1×n row");
        let v = self.value(a) + self.value(row);
        self.push(v, Op::AddRow(a, row), &[a, row])
    }

    /// `x · w + b` with `b` a 1×n row.
    pub fn affine(&mut self, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
        let xw = self.matmul(x, w);
        self.add_row(xw, b)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, a: NodeId, k: f64) -> NodeId {
        let v = self.value(a) * k;
        self.push(v, Op::Scale(a, k), &[a])
    }

    pub fn one_minus(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(|x| 1.0 - x);
        self.push(v, Op::OneMinus(a), &[a])
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(sigmoid);
        self.push(v, Op::Sigmoid(a), &[a])
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(f64::tanh);
        self.push(v, Op::Tanh(a), &[a])
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(|x| x.max(0.0));
        self.push(v, Op::Relu(a), &[a])
    }

    /// Exact (erf-based) GELU.
    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(|x| 0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2)));
        self.push(v, Op::Gelu(a), &[a])
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let v = softmax_rows(self.value(a));
        self.push(v, Op::SoftmaxRows(a), &[a])
    }

    /// Row-wise layer normalization with 1×n `gamma` and `beta`.
    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId, eps: f64) -> NodeId {
        let xv = self.value(x);
        let (rows, cols) = xv.dim();
        let mut xhat = Matrix::zeros((rows, cols));
        let mut inv_std = Vec::with_capacity(rows);
        for (r, row) in xv.outer_iter().enumerate() {
            let mean = row.sum() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std.push(is);
            for (c, v) in row.iter().enumerate() {
                xhat[[r, c]] = (v - mean) * is;
            }
        }
        let v = &xhat * self.value(gamma) + self.value(beta);
        self.push(v, Op::LayerNorm { x, gamma, beta, xhat, inv_std }, &[x, gamma, beta])
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("concat_cols: row counts differ");
        self.push(v, Op::ConcatCols(parts.to_vec()), parts)
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = ndarray::concatenate(Axis(0), &views).expect("concat_rows: column counts differ");
        self.push(v, Op::ConcatRows(parts.to_vec()), parts)
    }

    pub fn slice_rows(&mut self, a: NodeId, start: usize, end: usize) -> NodeId {
        let v = self.value(a).slice(s![start..end, ..]).to_owned();
        self.push(v, Op::SliceRows(a, start, end), &[a])
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> NodeId {
        let v = self.value(a).slice(s![.., start..end]).to_owned();
        self.push(v, Op::SliceCols(a, start, end), &[a])
    }

    /// Selects rows of `table` (embedding lookup).
    pub fn gather(&mut self, table: NodeId, rows: &[usize]) -> NodeId {
        let t = self.value(table);
        let v = t.select(Axis(0), rows);
        self.push(v, Op::Gather(table, rows.to_vec()), &[table])
    }

    /// Elementwise product with a constant mask (dropout).
    pub fn mask_mul(&mut self, a: NodeId, mask: Matrix) -> NodeId {
        let v = self.value(a) * &mask;
        self.push(v, Op::MaskMul(a, mask), &[a])
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let v = Matrix::from_elem((1, 1), self.value(a).sum());
        self.push(v, Op::SumAll(a), &[a])
    }

    /// Weighted mean cross-entropy of row-wise softmax(logits) against
    /// class indices: Σ wᵢ·(−log pᵢ[tᵢ]) / Σ wᵢ.
    pub fn cross_entropy(&mut self, logits: NodeId, targets: &[usize], weights: Option<&[f64]>) -> NodeId {
        let lv = self.value(logits);
        assert_eq!(lv.nrows(), targets.len(), "one target per logit row");
        let weights: Vec<f64> = match weights {
            Some(w) => w.to_vec(),
            None => vec![1.0; targets.len()],
        };
        let probs = softmax_rows(lv);
        let wsum: f64 = weights.iter().sum();
        let mut loss = 0.0;
        for (r, (&t, &w)) in targets.iter().zip(&weights).enumerate() {
            let row = lv.row(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += w * (lse - row[t]);
        }
        let v = Matrix::from_elem((1, 1), loss / wsum);
        self.push(v, Op::CrossEntropy { logits, targets: targets.to_vec(), weights, probs }, &[logits])
    }

    /// Reverse pass from a 1×1 node.
    pub fn backward(&self, loss: NodeId) -> Gradients {
        assert_eq!(self.shape(loss), (1, 1), "backward expects a scalar");
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::ones((1, 1)));
        let mut out = Gradients { by_param: vec![None; self.store.len()] };

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let y = node.value.as_ref();
            match &node.op {
                Op::Input => {}
                Op::Param(p) => out.by_param[p.index()] = Some(g),
                Op::MatMul(a, b) => {
                    if self.wants(*a) {
                        let ga = g.dot(&self.value(*b).t());
                        self.acc(&mut grads, *a, ga);
                    }
                    if self.wants(*b) {
                        let gb = self.value(*a).t().dot(&g);
                        self.acc(&mut grads, *b, gb);
                    }
                }
                Op::MatMulT(a, b) => {
                    if self.wants(*a) {
                        let ga = g.dot(self.value(*b));
                        self.acc(&mut grads, *a, ga);
                    }
                    if self.wants(*b) {
                        let gb = g.t().dot(self.value(*a));
                        self.acc(&mut grads, *b, gb);
                    }
                }
                Op::Add(a, b) => {
                    self.acc(&mut grads, *b, g.clone());
                    self.acc(&mut grads, *a, g);
                }
                Op::AddRow(a, row) => {
                    let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    self.acc(&mut grads, *row, gr);
                    self.acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    if self.wants(*a) {
                        let ga = &g * self.value(*b);
                        self.acc(&mut grads, *a, ga);
                    }
                    if self.wants(*b) {
                        let gb = &g * self.value(*a);
                        self.acc(&mut grads, *b, gb);
                    }
                }
                Op::Scale(a, k) => self.acc(&mut grads, *a, g * *k),
                Op::OneMinus(a) => self.acc(&mut grads, *a, -g),
                Op::Sigmoid(a) => {
                    let y = y.expect("computed node");
                    self.acc(&mut grads, *a, &g * &y.mapv(|s| s * (1.0 - s)));
                }
                Op::Tanh(a) => {
                    let y = y.expect("computed node");
                    self.acc(&mut grads, *a, &g * &y.mapv(|t| 1.0 - t * t));
                }
                Op::Relu(a) => {
                    let y = y.expect("computed node");
                    self.acc(&mut grads, *a, &g * &y.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }));
                }
                Op::Gelu(a) => {
                    let d = self.value(*a).mapv(|x| {
                        let cdf = 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2));
                        let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
                        cdf + x * pdf
                    });
                    self.acc(&mut grads, *a, &g * &d);
                }
                Op::SoftmaxRows(a) => {
                    let y = y.expect("computed node");
                    let mut ga = Matrix::zeros(y.raw_dim());
                    for r in 0..y.nrows() {
                        let dot: f64 = g.row(r).iter().zip(y.row(r)).map(|(a, b)| a * b).sum();
                        for c in 0..y.ncols() {
                            ga[[r, c]] = y[[r, c]] * (g[[r, c]] - dot);
                        }
                    }
                    self.acc(&mut grads, *a, ga);
                }
                Op::LayerNorm { x, gamma, beta, xhat, inv_std } => {
                    if self.wants(*gamma) {
                        let gg = (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
                        self.acc(&mut grads, *gamma, gg);
                    }
                    if self.wants(*beta) {
                        let gb = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                        self.acc(&mut grads, *beta, gb);
                    }
                    if self.wants(*x) {
                        let dxhat = &g * self.value(*gamma);
                        let n = xhat.ncols() as f64;
                        let mut gx = Matrix::zeros(xhat.raw_dim());
                        for r in 0..xhat.nrows() {
                            let d = dxhat.row(r);
                            let xh = xhat.row(r);
                            let sum_d: f64 = d.sum();
                            let sum_dx: f64 = d.iter().zip(xh).map(|(a, b)| a * b).sum();
                            for c in 0..xhat.ncols() {
                                gx[[r, c]] = inv_std[r] / n * (n * d[c] - sum_d - xh[c] * sum_dx);
                            }
                        }
                        self.acc(&mut grads, *x, gx);
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let w = self.shape(*p).1;
                        if self.wants(*p) {
                            self.acc(&mut grads, *p, g.slice(s![.., start..start + w]).to_owned());
                        }
                        start += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let h = self.shape(*p).0;
                        if self.wants(*p) {
                            self.acc(&mut grads, *p, g.slice(s![start..start + h, ..]).to_owned());
                        }
                        start += h;
                    }
                }
                Op::SliceRows(a, start, end) => {
                    let mut ga = Matrix::zeros(self.value(*a).raw_dim());
                    ga.slice_mut(s![*start..*end, ..]).assign(&g);
                    self.acc(&mut grads, *a, ga);
                }
                Op::SliceCols(a, start, end) => {
                    let mut ga = Matrix::zeros(self.value(*a).raw_dim());
                    ga.slice_mut(s![.., *start..*end]).assign(&g);
                    self.acc(&mut grads, *a, ga);
                }
                Op::Gather(table, rows) => {
                    let mut gt = Matrix::zeros(self.value(*table).raw_dim());
                    for (i, &r) in rows.iter().enumerate() {
                        let mut dst = gt.row_mut(r);
                        dst += &g.row(i);
                    }
                    self.acc(&mut grads, *table, gt);
                }
                Op::MaskMul(a, mask) => self.acc(&mut grads, *a, &g * mask),
                Op::SumAll(a) => {
                    let ga = Matrix::from_elem(self.value(*a).raw_dim(), g[[0, 0]]);
                    self.acc(&mut grads, *a, ga);
                }
                Op::CrossEntropy { logits, targets, weights, probs } => {
                    let wsum: f64 = weights.iter().sum();
                    let mut gl = probs.clone();
                    for (r, (&t, &w)) in targets.iter().zip(weights).enumerate() {
                        gl[[r, t]] -= 1.0;
                        gl.row_mut(r).mapv_inplace(|v| v * w / wsum * g[[0, 0]]);
                    }
                    self.acc(&mut grads, *logits, gl);
                }
            }
        }
        out
    }

    fn wants(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    fn acc(&self, grads: &mut [Option<Matrix>], id: NodeId, g: Matrix) {
        if !self.wants(id) {
            return;
        }
        match &mut grads[id.0] {
            Some(existing) => *existing += &g,
            slot => *slot = Some(g),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable row-wise softmax.
pub fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for mut row in out.outer_iter_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}
