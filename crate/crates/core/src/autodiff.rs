//! Tape-based reverse-mode automatic differentiation over 2-D tensors.
//!
//! A [`Graph`] records every operation as it is evaluated. Nodes are appended
//! in evaluation order, so the tape is already topologically sorted and
//! [`Graph::backward`] is a single reverse sweep.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::tensor::{matmul_acc, matmul_nt_acc, matmul_tn_acc, Tensor};

/// Handle to a node on a [`Graph`] tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

/// One output element of a [`Graph::remap`]: either a signed copy of an input
/// element or a hard zero.
pub type RemapEntry = Option<(u32, f64)>;

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Act(Var, Activation),
    Softmax { x: Var, scale: f64 },
    ConcatCols(Vec<Var>),
    SliceRows(Var, usize),
    PadRows(Var),
    Embedding { table: Var, ids: Vec<usize> },
    CrossEntropy { logits: Var, targets: Vec<usize>, ignore: usize, probs: Tensor, count: usize },
    BinarizeSte(Var),
    Remap(Var, Vec<RemapEntry>),
    Sum(Var),
    LayerNorm { x: Var, inv_std: Vec<f64> },
}

struct Node {
    value: Tensor,
    op: Op,
    param: Option<ParamId>,
}

/// Computation tape. Build one per forward pass.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

const LN_EPS: f64 = 1e-5;

fn dim_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Dimension {
        op,
        left: a.shape(),
        right: b.shape(),
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            op,
            param: None,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// A constant (or externally owned) input.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    /// Binds a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(store.get(id).clone(), Op::Leaf);
        self.nodes[v.0].param = Some(id);
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let out = ta.matmul(tb)?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    /// `a · bᵀ` without materialising the transpose.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.cols() {
            return Err(dim_err("matmul_nt", ta, tb));
        }
        let mut out = Tensor::zeros(ta.rows(), tb.rows());
        matmul_nt_acc(ta, tb, &mut out);
        Ok(self.push(out, Op::MatMulNt(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(dim_err("add", ta, tb));
        }
        let mut out = ta.clone();
        out.add_assign(tb);
        Ok(self.push(out, Op::Add(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(dim_err("mul", ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::new(ta.rows(), ta.cols(), data)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    /// Adds a `1 × cols` bias row to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(bias));
        if tb.rows() != 1 || tb.cols() != ta.cols() {
            return Err(dim_err("add_row", ta, tb));
        }
        let mut out = ta.clone();
        for r in 0..out.rows() {
            for (o, b) in out.row_mut(r).iter_mut().zip(tb.data()) {
                *o += b;
            }
        }
        Ok(self.push(out, Op::AddRow(a, bias)))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let out = self.value(a).map(|v| v * k);
        self.push(out, Op::Scale(a, k))
    }

    pub fn activation(&mut self, a: Var, kind: Activation) -> Var {
        let out = match kind {
            Activation::Relu => self.value(a).map(|v| v.max(0.0)),
            Activation::Tanh => self.value(a).map(f64::tanh),
        };
        self.push(out, Op::Act(a, kind))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Relu)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Tanh)
    }

    /// Row-wise softmax of `scale · x`.
    pub fn softmax_rows(&mut self, x: Var, scale: f64) -> Var {
        self.softmax_rows_masked(x, scale, None)
    }

    /// Row-wise softmax of `scale · x`, treating positions where `allowed` is
    /// false as −∞. A row with no allowed position yields all zeros.
    pub fn softmax_rows_masked(&mut self, x: Var, scale: f64, allowed: Option<&[bool]>) -> Var {
        let tx = self.value(x);
        let (rows, cols) = tx.shape();
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let xr = tx.row(r);
            let ok = |c: usize| allowed.map_or(true, |m| m[r * cols + c]);
            let mut max = f64::NEG_INFINITY;
            for (c, &v) in xr.iter().enumerate() {
                if ok(c) {
                    max = max.max(scale * v);
                }
            }
            if max == f64::NEG_INFINITY {
                continue;
            }
            let orow = out.row_mut(r);
            let mut total = 0.0;
            for (c, &v) in xr.iter().enumerate() {
                if ok(c) {
                    let e = (scale * v - max).exp();
                    orow[c] = e;
                    total += e;
                }
            }
            for o in orow.iter_mut() {
                *o /= total;
            }
        }
        self.push(out, Op::Softmax { x, scale })
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Usage("concat_cols of zero parts".into()))?;
        let rows = self.value(*first).rows();
        let mut cols = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows {
                return Err(dim_err("concat_cols", self.value(*first), t));
            }
            cols += t.cols();
        }
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for &p in parts {
                let src = self.value(p).row(r);
                out.row_mut(r)[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    /// Rows `start..end` of `x`.
    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let tx = self.value(x);
        if start > end || end > tx.rows() {
            return Err(Error::Dimension {
                op: "slice_rows",
                left: tx.shape(),
                right: (start, end),
            });
        }
        let c = tx.cols();
        let out = Tensor::new(end - start, c, tx.data()[start * c..end * c].to_vec())?;
        Ok(self.push(out, Op::SliceRows(x, start)))
    }

    /// Zero-pads `x` at the bottom to `rows` rows.
    pub fn pad_rows(&mut self, x: Var, rows: usize) -> Result<Var> {
        let tx = self.value(x);
        if rows < tx.rows() {
            return Err(Error::Dimension {
                op: "pad_rows",
                left: tx.shape(),
                right: (rows, tx.cols()),
            });
        }
        let mut data = tx.data().to_vec();
        data.resize(rows * tx.cols(), 0.0);
        let out = Tensor::new(rows, tx.cols(), data)?;
        Ok(self.push(out, Op::PadRows(x)))
    }

    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let tt = self.value(table);
        let mut out = Tensor::zeros(ids.len(), tt.cols());
        for (i, &id) in ids.iter().enumerate() {
            if id >= tt.rows() {
                return Err(Error::Vocabulary(format!(
                    "token id {id} outside table of {} rows",
                    tt.rows()
                )));
            }
            out.row_mut(i).copy_from_slice(tt.row(id));
        }
        Ok(self.push(
            out,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Mean token cross-entropy of `logits` rows against `targets`, skipping
    /// rows whose target equals `ignore`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize], ignore: usize) -> Result<Var> {
        let tl = self.value(logits);
        if tl.rows() != targets.len() {
            return Err(Error::Dimension {
                op: "cross_entropy",
                left: tl.shape(),
                right: (targets.len(), 1),
            });
        }
        let mut probs = Tensor::zeros(tl.rows(), tl.cols());
        let mut total = 0.0;
        let mut count = 0;
        for (r, &t) in targets.iter().enumerate() {
            if t == ignore {
                continue;
            }
            if t >= tl.cols() {
                return Err(Error::Vocabulary(format!("target id {t} outside {} classes", tl.cols())));
            }
            let row = tl.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
            for (p, v) in probs.row_mut(r).iter_mut().zip(row) {
                *p = (v - lse).exp();
            }
            total += lse - row[t];
            count += 1;
        }
        if count == 0 {
            return Err(Error::DegenerateBatch);
        }
        Ok(self.push(
            Tensor::scalar(total / count as f64),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                ignore,
                probs,
                count,
            },
        ))
    }

    /// Hard ±1 quantisation of `tanh(x)` (ties go to +1); the backward pass
    /// uses the derivative of `tanh` as a straight-through surrogate.
    pub fn binarize_ste(&mut self, x: Var) -> Var {
        let out = self
            .value(x)
            .map(|v| if v.tanh() >= 0.0 { 1.0 } else { -1.0 });
        self.push(out, Op::BinarizeSte(x))
    }

    /// Produces a `rows × cols` tensor whose flat element `i` is
    /// `sign · x.flat[src]` for `Some((src, sign))` and 0 for `None`.
    pub fn remap(&mut self, x: Var, rows: usize, cols: usize, map: Vec<RemapEntry>) -> Result<Var> {
        let tx = self.value(x);
        if map.len() != rows * cols {
            return Err(Error::Dimension {
                op: "remap",
                left: (rows, cols),
                right: (map.len(), 1),
            });
        }
        let mut data = Vec::with_capacity(map.len());
        for e in &map {
            data.push(match *e {
                Some((src, sign)) => {
                    let src = src as usize;
                    if src >= tx.len() {
                        return Err(dim_err("remap", tx, &Tensor::zeros(rows, cols)));
                    }
                    sign * tx.data()[src]
                }
                None => 0.0,
            });
        }
        let out = Tensor::new(rows, cols, data)?;
        Ok(self.push(out, Op::Remap(x, map)))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// Per-row standardisation without affine parameters.
    pub fn layer_norm(&mut self, x: Var) -> Var {
        let tx = self.value(x);
        let (rows, cols) = tx.shape();
        let mut out = Tensor::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = tx.row(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / cols as f64;
            let is = 1.0 / (var + LN_EPS).sqrt();
            for (o, v) in out.row_mut(r).iter_mut().zip(row) {
                *o = (v - mean) * is;
            }
            inv_std.push(is);
        }
        self.push(out, Op::LayerNorm { x, inv_std })
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        if self.value(root).shape() != (1, 1) {
            return Err(Error::Usage(format!(
                "backward from non-scalar node of shape {:?}",
                self.value(root).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        fn acc<'a>(grads: &'a mut [Option<Tensor>], v: Var, shape: (usize, usize)) -> &'a mut Tensor {
            grads[v.0].get_or_insert_with(|| Tensor::zeros(shape.0, shape.1))
        }
        let val = |v: Var| &self.nodes[v.0].value;

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                matmul_nt_acc(g, val(*b), acc(grads, *a, val(*a).shape()));
                matmul_tn_acc(val(*a), g, acc(grads, *b, val(*b).shape()));
            }
            Op::MatMulNt(a, b) => {
                matmul_acc(g, val(*b), acc(grads, *a, val(*a).shape()));
                matmul_tn_acc(g, val(*a), acc(grads, *b, val(*b).shape()));
            }
            Op::Add(a, b) => {
                acc(grads, *a, g.shape()).add_assign(g);
                acc(grads, *b, g.shape()).add_assign(g);
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let ga = acc(grads, *a, g.shape());
                for ((o, gv), bv) in ga.data_mut().iter_mut().zip(g.data()).zip(tb.data()) {
                    *o += gv * bv;
                }
                let gb = acc(grads, *b, g.shape());
                for ((o, gv), av) in gb.data_mut().iter_mut().zip(g.data()).zip(ta.data()) {
                    *o += gv * av;
                }
            }
            Op::AddRow(a, bias) => {
                acc(grads, *a, g.shape()).add_assign(g);
                let gb = acc(grads, *bias, (1, g.cols()));
                for r in 0..g.rows() {
                    for (o, v) in gb.data_mut().iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
            }
            Op::Scale(a, k) => {
                let ga = acc(grads, *a, g.shape());
                for (o, v) in ga.data_mut().iter_mut().zip(g.data()) {
                    *o += k * v;
                }
            }
            Op::Act(a, kind) => {
                let x = val(*a);
                let y = &node.value;
                let ga = acc(grads, *a, g.shape());
                let it = ga.data_mut().iter_mut().zip(g.data()).zip(x.data().iter().zip(y.data()));
                match kind {
                    Activation::Relu => {
                        for ((o, gv), (xv, _)) in it {
                            if *xv > 0.0 {
                                *o += gv;
                            }
                        }
                    }
                    Activation::Tanh => {
                        for ((o, gv), (_, yv)) in it {
                            *o += gv * (1.0 - yv * yv);
                        }
                    }
                }
            }
            Op::Softmax { x, scale } => {
                let y = &node.value;
                let gx = acc(grads, *x, g.shape());
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for ((o, yv), gv) in gx.row_mut(r).iter_mut().zip(yr).zip(gr) {
                        *o += scale * yv * (gv - dot);
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for p in parts {
                    let (pr, pc) = val(*p).shape();
                    let gp = acc(grads, *p, (pr, pc));
                    for r in 0..pr {
                        for (o, v) in gp.row_mut(r).iter_mut().zip(&g.row(r)[off..off + pc]) {
                            *o += v;
                        }
                    }
                    off += pc;
                }
            }
            Op::SliceRows(x, start) => {
                let c = g.cols();
                let gx = acc(grads, *x, val(*x).shape());
                for (o, v) in gx.data_mut()[start * c..(start + g.rows()) * c].iter_mut().zip(g.data()) {
                    *o += v;
                }
            }
            Op::PadRows(x) => {
                let shape = val(*x).shape();
                let gx = acc(grads, *x, shape);
                for (o, v) in gx.data_mut().iter_mut().zip(g.data()) {
                    *o += v;
                }
            }
            Op::Embedding { table, ids } => {
                let gt = acc(grads, *table, val(*table).shape());
                for (i, &id) in ids.iter().enumerate() {
                    for (o, v) in gt.row_mut(id).iter_mut().zip(g.row(i)) {
                        *o += v;
                    }
                }
            }
            Op::CrossEntropy {
                logits,
                targets,
                ignore,
                probs,
                count,
            } => {
                let k = g.get(0, 0) / *count as f64;
                let gl = acc(grads, *logits, probs.shape());
                for (r, &t) in targets.iter().enumerate() {
                    if t == *ignore {
                        continue;
                    }
                    let row = gl.row_mut(r);
                    for (o, p) in row.iter_mut().zip(probs.row(r)) {
                        *o += k * p;
                    }
                    row[t] -= k;
                }
            }
            Op::BinarizeSte(x) => {
                let tx = val(*x);
                let gx = acc(grads, *x, g.shape());
                for ((o, gv), xv) in gx.data_mut().iter_mut().zip(g.data()).zip(tx.data()) {
                    let t = xv.tanh();
                    *o += gv * (1.0 - t * t);
                }
            }
            Op::Remap(x, map) => {
                let gx = acc(grads, *x, val(*x).shape());
                let gxd = gx.data_mut();
                for (e, gv) in map.iter().zip(g.data()) {
                    if let Some((src, sign)) = e {
                        gxd[*src as usize] += sign * gv;
                    }
                }
            }
            Op::Sum(x) => {
                let gv = g.get(0, 0);
                let gx = acc(grads, *x, val(*x).shape());
                for o in gx.data_mut() {
                    *o += gv;
                }
            }
            Op::LayerNorm { x, inv_std } => {
                let y = &node.value;
                let cols = y.cols() as f64;
                let gx = acc(grads, *x, g.shape());
                for (r, is) in inv_std.iter().enumerate() {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let mean_g = gr.iter().sum::<f64>() / cols;
                    let mean_gy = gr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / cols;
                    for ((o, gv), yv) in gx.row_mut(r).iter_mut().zip(gr).zip(yr) {
                        *o += is * (gv - mean_g - yv * mean_gy);
                    }
                }
            }
        }
    }
}

/// Result of [`Graph::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the root with respect to `v`, if `v` influenced the root.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradients of every parameter bound to `graph`, keyed by parameter id.
    pub fn into_param_grads(mut self, graph: &Graph) -> Vec<(ParamId, Tensor)> {
        let mut out: Vec<(ParamId, Tensor)> = graph
            .params
            .iter()
            .filter_map(|(&id, &v)| self.grads[v.0].take().map(|g| (id, g)))
            .collect();
        out.sort_by_key(|(id, _)| *id);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: usize, cols: usize, data: &[f64]) -> Tensor {
        Tensor::new(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn softmax_uniform_and_stable() {
        let mut g = Graph::new();
        let x = g.input(t(2, 3, &[0.0, 0.0, 0.0, 1000.0, 0.0, -1000.0]));
        let y = g.softmax_rows(x, 1.0);
        let v = g.value(y);
        for c in 0..3 {
            assert!((v.get(0, c) - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((v.get(1, 0) - 1.0).abs() < 1e-15);
        assert!(v.get(1, 1) < 1e-300);
        assert!(v.is_finite());
    }

    #[test]
    fn masked_softmax_zeroes_masked_columns() {
        let mut g = Graph::new();
        let x = g.input(t(2, 2, &[3.0, 1.0, 2.0, 2.0]));
        let y = g.softmax_rows_masked(x, 1.0, Some(&[true, false, false, false]));
        assert_eq!(g.value(y).data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn relu_and_tanh_forward() {
        let mut g = Graph::new();
        let x = g.input(t(1, 3, &[-1.0, 0.0, 2.0]));
        let r = g.relu(x);
        assert_eq!(g.value(r).data(), &[0.0, 0.0, 2.0]);
        let z = g.input(t(1, 1, &[0.0]));
        let th = g.tanh(z);
        assert_eq!(g.value(th).data(), &[0.0]);
    }

    #[test]
    fn add_zero_is_identity() {
        let mut g = Graph::new();
        let x = g.input(t(2, 2, &[1.0, -2.0, 3.5, 4.0]));
        let z = g.input(Tensor::zeros(2, 2));
        let y = g.add(x, z).unwrap();
        assert_eq!(g.value(y), g.value(x));
        let w = g.input(Tensor::zeros(3, 2));
        assert!(matches!(g.add(x, w), Err(Error::Dimension { .. })));
    }

    #[test]
    fn concat_shape_law_and_slice_roundtrip() {
        let mut g = Graph::new();
        let chunks: Vec<Var> = (0..4)
            .map(|h| g.input(Tensor::filled(5, 3, h as f64)))
            .collect();
        let cat = g.concat_cols(&chunks).unwrap();
        assert_eq!(g.value(cat).shape(), (5, 12));

        let x = g.input(Tensor::new(4, 3, (0..12).map(f64::from).collect()).unwrap());
        let a = g.slice_rows(x, 0, 1).unwrap();
        let b = g.slice_rows(x, 1, 4).unwrap();
        let (ta, tb) = (g.value(a).clone(), g.value(b).clone());
        let mut data = ta.into_data();
        data.extend(tb.into_data());
        assert_eq!(data, g.value(x).data());
    }

    #[test]
    fn embedding_first_row_and_repeated_ids_accumulate() {
        let mut g = Graph::new();
        let table = g.input(Tensor::new(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let e0 = g.embedding(table, &[0]).unwrap();
        assert_eq!(g.value(e0).data(), &[1.0, 2.0]);
        let e = g.embedding(table, &[2, 2]).unwrap();
        let s = g.sum(e);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(table).unwrap().data(), &[0.0, 0.0, 0.0, 0.0, 2.0, 2.0]);
        assert!(matches!(g.embedding(table, &[3]), Err(Error::Vocabulary(_))));
    }

    #[test]
    fn cross_entropy_analytic_cases() {
        let mut g = Graph::new();
        let l = g.input(t(1, 3, &[1000.0, 0.0, 0.0]));
        let ce = g.cross_entropy(l, &[0], usize::MAX).unwrap();
        assert!(g.value(ce).get(0, 0).abs() < 1e-12);

        let v = 7;
        let u = g.input(Tensor::zeros(2, v));
        let ce = g.cross_entropy(u, &[3, 5], usize::MAX).unwrap();
        assert!((g.value(ce).get(0, 0) - (v as f64).ln()).abs() < 1e-12);

        let ce = g.cross_entropy(u, &[0, 0], 0);
        assert!(matches!(ce, Err(Error::DegenerateBatch)));
    }

    #[test]
    fn backward_of_sum_is_ones() {
        let mut g = Graph::new();
        let w = g.input(Tensor::new(2, 3, vec![0.5; 6]).unwrap());
        let s = g.sum(w);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(w).unwrap(), &Tensor::filled(2, 3, 1.0));
    }

    #[test]
    fn backward_of_linear_map_is_outer_structure() {
        // L = Σ (W x): dL/dW[i][k] = x[k] for every row i.
        let mut g = Graph::new();
        let w = g.input(Tensor::new(2, 3, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap());
        let x = g.input(t(3, 1, &[1.0, -2.0, 3.0]));
        let y = g.matmul(w, x).unwrap();
        let s = g.sum(y);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(w).unwrap().data(), &[1.0, -2.0, 3.0, 1.0, -2.0, 3.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_root() {
        let mut g = Graph::new();
        let w = g.input(Tensor::zeros(2, 2));
        assert!(matches!(g.backward(w), Err(Error::Usage(_))));
    }

    #[test]
    fn binarize_forward_values() {
        let mut g = Graph::new();
        let x = g.input(t(1, 3, &[-5.0, 5.0, 0.0]));
        let b = g.binarize_ste(x);
        assert_eq!(g.value(b).data(), &[-1.0, 1.0, 1.0]);
    }

    #[test]
    fn remap_signs_and_zeros() {
        let mut g = Graph::new();
        let x = g.input(t(1, 3, &[1.0, 2.0, 3.0]));
        let y = g
            .remap(x, 1, 3, vec![Some((2, -1.0)), None, Some((0, 1.0))])
            .unwrap();
        assert_eq!(g.value(y).data(), &[-3.0, 0.0, 1.0]);
    }
}
