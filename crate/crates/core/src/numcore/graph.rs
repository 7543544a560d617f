//! Tape-based reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Graph`] records every forward operation in insertion order, which is
//! also a valid topological order. Parameters enter as borrowed leaves, so
//! building a graph never copies model weights.

use std::borrow::Cow;
use std::sync::atomic::{AtomicU64, Ordering};

use super::tensor::{gemm_acc, gemm_nt_acc, gemm_tn_acc, Tensor};
use super::NumError;

const LAYER_NORM_EPS: f64 = 1e-5;

static NEXT_GRAPH: AtomicU64 = AtomicU64::new(1);

/// Handle to a node of one particular graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId {
    graph: u64,
    index: usize,
}

/// Primitive kinds reachable through [`Graph::forward_op`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OpKind {
    Matmul,
    Add,
    Concat,
    Relu,
    Sigmoid,
    SoftmaxRows,
    LayerNorm,
    Scale(f64),
}

#[derive(Debug)]
enum Op {
    Leaf,
    Matmul(usize, usize),
    MatmulNt(usize, usize),
    Add(usize, usize),
    AddRow(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Concat(Vec<usize>),
    SliceCols { input: usize, start: usize },
    Relu(usize),
    Sigmoid(usize),
    SoftmaxRows(usize),
    LayerNorm { x: usize, gain: usize, bias: usize, xhat: Vec<f64>, rstd: Vec<f64> },
    Scale(usize, f64),
    GatherRows { table: usize, indices: Vec<usize> },
    Sum(usize),
    Mean(usize),
    Mse(usize, usize),
}

struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Computation graph borrowing its parameter leaves for `'a`.
pub struct Graph<'a> {
    id: u64,
    nodes: Vec<Node<'a>>,
}

/// Gradients produced by [`Graph::backward`], indexed by node.
#[derive(Debug)]
pub struct Gradients {
    graph: u64,
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `id`; `None` when the node does
    /// not lie on a differentiable path to the loss.
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        if id.graph != self.graph {
            return None;
        }
        self.grads.get(id.index).and_then(Option::as_ref)
    }

    pub fn take(&mut self, id: NodeId) -> Option<Tensor> {
        if id.graph != self.graph {
            return None;
        }
        self.grads.get_mut(id.index).and_then(Option::take)
    }
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a> Graph<'a> {
    pub fn new() -> Self {
        Self { id: NEXT_GRAPH.fetch_add(1, Ordering::Relaxed), nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Borrowed leaf that receives a gradient.
    pub fn param(&mut self, tensor: &'a Tensor) -> NodeId {
        self.push_leaf(Cow::Borrowed(tensor), true)
    }

    /// Owned leaf that receives a gradient.
    pub fn param_owned(&mut self, tensor: Tensor) -> NodeId {
        self.push_leaf(Cow::Owned(tensor), true)
    }

    /// Leaf excluded from differentiation.
    pub fn constant(&mut self, tensor: Tensor) -> NodeId {
        self.push_leaf(Cow::Owned(tensor), false)
    }

    pub fn constant_ref(&mut self, tensor: &'a Tensor) -> NodeId {
        self.push_leaf(Cow::Borrowed(tensor), false)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        assert_eq!(id.graph, self.id, "node belongs to a different graph");
        &self.nodes[id.index].value
    }

    fn push_leaf(&mut self, value: Cow<'a, Tensor>, requires_grad: bool) -> NodeId {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad });
        NodeId { graph: self.id, index: self.nodes.len() - 1 }
    }

    fn idx(&self, id: NodeId) -> Result<usize, NumError> {
        if id.graph != self.id || id.index >= self.nodes.len() {
            return Err(NumError::ForeignNode);
        }
        Ok(id.index)
    }

    fn val(&self, i: usize) -> &Tensor {
        &self.nodes[i].value
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op, inputs: &[usize]) -> Result<NodeId, NumError> {
        if !value.is_finite() {
            return Err(NumError::NonFinite { op: name });
        }
        let requires_grad = inputs.iter().any(|&i| self.nodes[i].requires_grad);
        self.nodes.push(Node { value: Cow::Owned(value), op, requires_grad });
        Ok(NodeId { graph: self.id, index: self.nodes.len() - 1 })
    }

    /// Dispatches one of the primitive kinds. `LayerNorm` takes
    /// `[x, gain, bias]`; `Concat` joins any number of inputs column-wise.
    pub fn forward_op(&mut self, kind: OpKind, inputs: &[NodeId]) -> Result<NodeId, NumError> {
        let arity = |n: usize| {
            if inputs.len() == n {
                Ok(())
            } else {
                Err(NumError::Arity { op: kind_name(kind), expected: n, got: inputs.len() })
            }
        };
        match kind {
            OpKind::Matmul => {
                arity(2)?;
                self.matmul(inputs[0], inputs[1])
            }
            OpKind::Add => {
                arity(2)?;
                self.add(inputs[0], inputs[1])
            }
            OpKind::Concat => self.concat_cols(inputs),
            OpKind::Relu => {
                arity(1)?;
                self.relu(inputs[0])
            }
            OpKind::Sigmoid => {
                arity(1)?;
                self.sigmoid(inputs[0])
            }
            OpKind::SoftmaxRows => {
                arity(1)?;
                self.softmax_rows(inputs[0])
            }
            OpKind::LayerNorm => {
                arity(3)?;
                self.layer_norm(inputs[0], inputs[1], inputs[2])
            }
            OpKind::Scale(s) => {
                arity(1)?;
                self.scale(inputs[0], s)
            }
        }
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let (ta, tb) = (self.val(ia), self.val(ib));
        let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
        if tb.rows() != k {
            return Err(mismatch("matmul", ta, tb));
        }
        let mut out = vec![0.0; m * n];
        gemm_acc(ta.data(), tb.data(), &mut out, m, k, n);
        self.push("matmul", Tensor::from_parts(vec![m, n], out), Op::Matmul(ia, ib), &[ia, ib])
    }

    /// `a · bᵀ` without materializing the transpose.
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let (ta, tb) = (self.val(ia), self.val(ib));
        let (m, k, n) = (ta.rows(), ta.cols(), tb.rows());
        if tb.cols() != k {
            return Err(mismatch("matmul_nt", ta, tb));
        }
        let mut out = vec![0.0; m * n];
        gemm_nt_acc(ta.data(), tb.data(), &mut out, m, k, n);
        self.push("matmul_nt", Tensor::from_parts(vec![m, n], out), Op::MatmulNt(ia, ib), &[ia, ib])
    }

    /// Elementwise sum; a single row `b` is broadcast over the rows of `a`.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let (ta, tb) = (self.val(ia), self.val(ib));
        if ta.same_shape(tb) {
            let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect();
            let out = Tensor::from_parts(ta.shape().to_vec(), data);
            return self.push("add", out, Op::Add(ia, ib), &[ia, ib]);
        }
        if tb.rows() == 1 && tb.len() == ta.cols() && ta.rank() == 2 {
            let c = ta.cols();
            let bias = tb.data();
            let data = ta.data().iter().enumerate().map(|(i, x)| x + bias[i % c]).collect();
            let out = Tensor::from_parts(ta.shape().to_vec(), data);
            return self.push("add", out, Op::AddRow(ia, ib), &[ia, ib]);
        }
        Err(mismatch("add", ta, tb))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let (ta, tb) = (self.val(ia), self.val(ib));
        if !ta.same_shape(tb) {
            return Err(mismatch("sub", ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x - y).collect();
        let out = Tensor::from_parts(ta.shape().to_vec(), data);
        self.push("sub", out, Op::Sub(ia, ib), &[ia, ib])
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let (ta, tb) = (self.val(ia), self.val(ib));
        if !ta.same_shape(tb) {
            return Err(mismatch("mul", ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::from_parts(ta.shape().to_vec(), data);
        self.push("mul", out, Op::Mul(ia, ib), &[ia, ib])
    }

    /// Column-wise concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId, NumError> {
        if parts.is_empty() {
            return Err(NumError::Arity { op: "concat", expected: 1, got: 0 });
        }
        let idx = parts.iter().map(|&p| self.idx(p)).collect::<Result<Vec<_>, _>>()?;
        let rows = self.val(idx[0]).rows();
        let mut widths = Vec::with_capacity(idx.len());
        for &i in &idx {
            let t = self.val(i);
            if t.rows() != rows {
                return Err(mismatch("concat", self.val(idx[0]), t));
            }
            widths.push(t.cols());
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &i in &idx {
                data.extend_from_slice(self.val(i).row(r));
            }
        }
        let out = Tensor::from_parts(vec![rows, total], data);
        let inputs = idx.clone();
        self.push("concat", out, Op::Concat(idx), &inputs)
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId, NumError> {
        let ia = self.idx(a)?;
        let ta = self.val(ia);
        if start >= end || end > ta.cols() {
            return Err(NumError::ShapeMismatch {
                op: "slice_cols",
                detail: format!("range {}..{} out of {} columns", start, end, ta.cols()),
            });
        }
        let rows = ta.rows();
        let mut data = Vec::with_capacity(rows * (end - start));
        for r in 0..rows {
            data.extend_from_slice(&ta.row(r)[start..end]);
        }
        let out = Tensor::from_parts(vec![rows, end - start], data);
        self.push("slice_cols", out, Op::SliceCols { input: ia, start }, &[ia])
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId, NumError> {
        let ia = self.idx(a)?;
        let out = self.val(ia).map(|v| v.max(0.0));
        self.push("relu", out, Op::Relu(ia), &[ia])
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId, NumError> {
        let ia = self.idx(a)?;
        let out = self.val(ia).map(sigmoid);
        self.push("sigmoid", out, Op::Sigmoid(ia), &[ia])
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&mut self, a: NodeId) -> Result<NodeId, NumError> {
        let ia = self.idx(a)?;
        let ta = self.val(ia);
        let c = ta.cols();
        let mut data = ta.data().to_vec();
        for row in data.chunks_mut(c) {
            softmax_in_place(row);
        }
        let out = Tensor::from_parts(ta.shape().to_vec(), data);
        self.push("softmax_rows", out, Op::SoftmaxRows(ia), &[ia])
    }

    /// Per-row normalization to zero mean and unit variance followed by an
    /// elementwise affine map with `gain` and `bias` (each of length `cols`).
    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId) -> Result<NodeId, NumError> {
        let (ix, ig, ib) = (self.idx(x)?, self.idx(gain)?, self.idx(bias)?);
        let (tx, tg, tb) = (self.val(ix), self.val(ig), self.val(ib));
        let c = tx.cols();
        if tg.len() != c || tb.len() != c {
            return Err(mismatch("layer_norm", tx, tg));
        }
        let rows = tx.rows();
        let mut xhat = Vec::with_capacity(rows * c);
        let mut rstd = Vec::with_capacity(rows);
        let mut out = Vec::with_capacity(rows * c);
        for r in 0..rows {
            let row = tx.row(r);
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c as f64;
            let s = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            rstd.push(s);
            for (j, v) in row.iter().enumerate() {
                let h = (v - mean) * s;
                xhat.push(h);
                out.push(h * tg.data()[j] + tb.data()[j]);
            }
        }
        let out = Tensor::from_parts(tx.shape().to_vec(), out);
        self.push("layer_norm", out, Op::LayerNorm { x: ix, gain: ig, bias: ib, xhat, rstd }, &[ix, ig, ib])
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId, NumError> {
        let ia = self.idx(a)?;
        let out = self.val(ia).map(|v| v * factor);
        self.push("scale", out, Op::Scale(ia, factor), &[ia])
    }

    /// Selects rows of `table`; equivalent to multiplying a stack of one-hot
    /// rows by `table`.
    pub fn gather_rows(&mut self, table: NodeId, indices: Vec<usize>) -> Result<NodeId, NumError> {
        let it = self.idx(table)?;
        let tt = self.val(it);
        let (n, c) = (tt.rows(), tt.cols());
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(NumError::ShapeMismatch {
                op: "gather_rows",
                detail: format!("row index {} out of {} rows", bad, n),
            });
        }
        let mut data = Vec::with_capacity(indices.len() * c);
        for &i in &indices {
            data.extend_from_slice(tt.row(i));
        }
        let out = Tensor::from_parts(vec![indices.len(), c], data);
        self.push("gather_rows", out, Op::GatherRows { table: it, indices }, &[it])
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId, NumError> {
        let ia = self.idx(a)?;
        let out = Tensor::scalar(self.val(ia).sum());
        self.push("sum", out, Op::Sum(ia), &[ia])
    }

    pub fn mean(&mut self, a: NodeId) -> Result<NodeId, NumError> {
        let ia = self.idx(a)?;
        let t = self.val(ia);
        let out = Tensor::scalar(t.sum() / t.len() as f64);
        self.push("mean", out, Op::Mean(ia), &[ia])
    }

    /// Mean over all elements of the squared differences.
    pub fn mse(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let (ta, tb) = (self.val(ia), self.val(ib));
        if !ta.same_shape(tb) {
            return Err(mismatch("mse", ta, tb));
        }
        let out = Tensor::scalar(mse(ta.data(), tb.data()));
        self.push("mse", out, Op::Mse(ia, ib), &[ia, ib])
    }

    /// Reverse sweep from a scalar `loss`. Gradients of shared nodes are the
    /// sum over all their uses.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, NumError> {
        let li = self.idx(loss)?;
        let lv = self.val(li);
        if lv.len() != 1 {
            return Err(NumError::NonScalarLoss { shape: lv.shape().to_vec() });
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[li] = Some(Tensor::full(lv.shape(), 1.0));

        for i in (0..=li).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { graph: self.id, grads })
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let out = &node.value;
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            &Op::Matmul(a, b) => {
                let (ta, tb) = (self.val(a), self.val(b));
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                if self.nodes[a].requires_grad {
                    let mut da = vec![0.0; m * k];
                    gemm_nt_acc(gd, tb.data(), &mut da, m, n, k);
                    self.accumulate(grads, a, da);
                }
                if self.nodes[b].requires_grad {
                    let mut db = vec![0.0; k * n];
                    gemm_tn_acc(ta.data(), gd, &mut db, m, k, n);
                    self.accumulate(grads, b, db);
                }
            }
            &Op::MatmulNt(a, b) => {
                let (ta, tb) = (self.val(a), self.val(b));
                let (m, k, n) = (ta.rows(), ta.cols(), tb.rows());
                if self.nodes[a].requires_grad {
                    let mut da = vec![0.0; m * k];
                    gemm_acc(gd, tb.data(), &mut da, m, n, k);
                    self.accumulate(grads, a, da);
                }
                if self.nodes[b].requires_grad {
                    let mut db = vec![0.0; n * k];
                    gemm_tn_acc(gd, ta.data(), &mut db, m, n, k);
                    self.accumulate(grads, b, db);
                }
            }
            &Op::Add(a, b) => {
                self.accumulate(grads, a, gd.to_vec());
                self.accumulate(grads, b, gd.to_vec());
            }
            &Op::AddRow(a, b) => {
                self.accumulate(grads, a, gd.to_vec());
                let c = out.cols();
                let mut db = vec![0.0; c];
                for row in gd.chunks(c) {
                    for (d, v) in db.iter_mut().zip(row) {
                        *d += v;
                    }
                }
                self.accumulate(grads, b, db);
            }
            &Op::Sub(a, b) => {
                self.accumulate(grads, a, gd.to_vec());
                self.accumulate(grads, b, gd.iter().map(|v| -v).collect());
            }
            &Op::Mul(a, b) => {
                let (ta, tb) = (self.val(a).data(), self.val(b).data());
                self.accumulate(grads, a, gd.iter().zip(tb).map(|(g, y)| g * y).collect());
                self.accumulate(grads, b, gd.iter().zip(ta).map(|(g, x)| g * x).collect());
            }
            Op::Concat(parts) => {
                let rows = out.rows();
                let total = out.cols();
                let mut offset = 0;
                for &p in parts {
                    let w = self.val(p).cols();
                    if self.nodes[p].requires_grad {
                        let mut dp = Vec::with_capacity(rows * w);
                        for r in 0..rows {
                            dp.extend_from_slice(&gd[r * total + offset..r * total + offset + w]);
                        }
                        self.accumulate(grads, p, dp);
                    }
                    offset += w;
                }
            }
            &Op::SliceCols { input, start } => {
                let src = self.val(input);
                let (rows, c, w) = (src.rows(), src.cols(), out.cols());
                let mut dx = vec![0.0; rows * c];
                for r in 0..rows {
                    dx[r * c + start..r * c + start + w].copy_from_slice(&gd[r * w..(r + 1) * w]);
                }
                self.accumulate(grads, input, dx);
            }
            &Op::Relu(a) => {
                let x = self.val(a).data();
                self.accumulate(grads, a, gd.iter().zip(x).map(|(g, &v)| if v > 0.0 { *g } else { 0.0 }).collect());
            }
            &Op::Sigmoid(a) => {
                let y = out.data();
                self.accumulate(grads, a, gd.iter().zip(y).map(|(g, s)| g * s * (1.0 - s)).collect());
            }
            &Op::SoftmaxRows(a) => {
                let c = out.cols();
                let mut dx = Vec::with_capacity(out.len());
                for (yr, gr) in out.data().chunks(c).zip(gd.chunks(c)) {
                    let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                    dx.extend(yr.iter().zip(gr).map(|(y, g)| y * (g - dot)));
                }
                self.accumulate(grads, a, dx);
            }
            Op::LayerNorm { x, gain, bias, xhat, rstd } => {
                let c = out.cols();
                let gv = self.val(*gain).data();
                let mut dgain = vec![0.0; c];
                let mut dbias = vec![0.0; c];
                let mut dx = Vec::with_capacity(out.len());
                for (r, (hr, gr)) in xhat.chunks(c).zip(gd.chunks(c)).enumerate() {
                    let mut mean_dh = 0.0;
                    let mut mean_dh_h = 0.0;
                    for j in 0..c {
                        dgain[j] += gr[j] * hr[j];
                        dbias[j] += gr[j];
                        let dh = gr[j] * gv[j];
                        mean_dh += dh;
                        mean_dh_h += dh * hr[j];
                    }
                    mean_dh /= c as f64;
                    mean_dh_h /= c as f64;
                    for j in 0..c {
                        let dh = gr[j] * gv[j];
                        dx.push(rstd[r] * (dh - mean_dh - hr[j] * mean_dh_h));
                    }
                }
                self.accumulate(grads, *x, dx);
                self.accumulate(grads, *gain, dgain);
                self.accumulate(grads, *bias, dbias);
            }
            &Op::Scale(a, f) => {
                self.accumulate(grads, a, gd.iter().map(|g| g * f).collect());
            }
            Op::GatherRows { table, indices } => {
                let tt = self.val(*table);
                let c = tt.cols();
                let mut dt = vec![0.0; tt.len()];
                for (r, &i) in indices.iter().enumerate() {
                    for (d, v) in dt[i * c..(i + 1) * c].iter_mut().zip(&gd[r * c..(r + 1) * c]) {
                        *d += v;
                    }
                }
                self.accumulate(grads, *table, dt);
            }
            &Op::Sum(a) => {
                let n = self.val(a).len();
                self.accumulate(grads, a, vec![gd[0]; n]);
            }
            &Op::Mean(a) => {
                let n = self.val(a).len();
                self.accumulate(grads, a, vec![gd[0] / n as f64; n]);
            }
            &Op::Mse(a, b) => {
                let (ta, tb) = (self.val(a).data(), self.val(b).data());
                let k = 2.0 * gd[0] / ta.len() as f64;
                let da: Vec<f64> = ta.iter().zip(tb).map(|(x, y)| k * (x - y)).collect();
                if self.nodes[b].requires_grad {
                    self.accumulate(grads, b, da.iter().map(|v| -v).collect());
                }
                self.accumulate(grads, a, da);
            }
        }
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], target: usize, delta: Vec<f64>) {
        if !self.nodes[target].requires_grad {
            return;
        }
        match &mut grads[target] {
            Some(existing) => {
                for (e, d) in existing.data_mut().iter_mut().zip(&delta) {
                    *e += d;
                }
            }
            slot @ None => {
                *slot = Some(Tensor::from_parts(self.nodes[target].value.shape().to_vec(), delta));
            }
        }
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// Mean of squared differences over all elements.
pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> NumError {
    NumError::ShapeMismatch { op, detail: format!("{:?} vs {:?}", a.shape(), b.shape()) }
}

fn kind_name(kind: OpKind) -> &'static str {
    match kind {
        OpKind::Matmul => "matmul",
        OpKind::Add => "add",
        OpKind::Concat => "concat",
        OpKind::Relu => "relu",
        OpKind::Sigmoid => "sigmoid",
        OpKind::SoftmaxRows => "softmax_rows",
        OpKind::LayerNorm => "layer_norm",
        OpKind::Scale(_) => "scale",
    }
}
