//! Reverse-mode differentiation over a linear tape.
//!
//! Each recorded operation appends one node holding its output value and
//! whatever forward state its backward rule needs. Inputs always precede the
//! node that consumes them, so a single reverse sweep visits every node once
//! in a valid topological order.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dense::{gemm_nn, gemm_nt, gemm_tn, Tensor};
use super::sparse::{EdgeIndex, SparseAdj};
use crate::error::{Error, Result};

const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRowBroadcast(Var, Var),
    Relu(Var),
    Scale(Var, f64),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceRows {
        input: Var,
        start: usize,
    },
    MeanPoolRows(Var),
    Sum(Var),
    Mask {
        input: Var,
        mask: Vec<f64>,
    },
    SparseAggregate {
        input: Var,
        adj: Arc<SparseAdj>,
    },
    EdgeScores {
        q: Var,
        k: Var,
        edges: Arc<EdgeIndex>,
        heads: usize,
        scale: f64,
    },
    SegmentSoftmax {
        scores: Var,
        edges: Arc<EdgeIndex>,
    },
    EdgeAggregate {
        weights: Var,
        values: Var,
        edges: Arc<EdgeIndex>,
        heads: usize,
    },
    LayerNorm {
        input: Var,
        gain: Var,
        bias: Var,
        xhat: Tensor,
        inv_std: Vec<f64>,
    },
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Tensor,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    grad: Option<Tensor>,
    requires_grad: bool,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn dim_err(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::Dimension { op, left: a, right: b }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        debug_assert!(
            matches!(op, Op::Leaf) || value.is_finite() || !self.inputs_finite(&op),
            "non-finite output from finite inputs in {op:?}"
        );
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn inputs_finite(&self, op: &Op) -> bool {
        Self::inputs(op).iter().all(|v| self.nodes[v.0].value.is_finite())
    }

    fn inputs(op: &Op) -> Vec<Var> {
        match op {
            Op::Leaf => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::AddRowBroadcast(a, b) => vec![*a, *b],
            Op::Relu(a) | Op::Scale(a, _) | Op::MeanPoolRows(a) | Op::Sum(a) => vec![*a],
            Op::ConcatCols(v) | Op::ConcatRows(v) => v.clone(),
            Op::SliceRows { input, .. } | Op::Mask { input, .. } | Op::SparseAggregate { input, .. } => vec![*input],
            Op::EdgeScores { q, k, .. } => vec![*q, *k],
            Op::SegmentSoftmax { scores, .. } => vec![*scores],
            Op::EdgeAggregate { weights, values, .. } => vec![*weights, *values],
            Op::LayerNorm { input, gain, bias, .. } => vec![*input, *gain, *bias],
            Op::CrossEntropy { logits, .. } => vec![*logits],
        }
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Records a trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Accumulated gradient of a leaf after [`Tape::backward`].
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    pub fn zero_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(dim_err("matmul", sa, sb));
        }
        let mut out = Tensor::zeros(sa.0, sb.1);
        gemm_nn(self.value(a), self.value(b), &mut out);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(dim_err("add", sa, sb));
        }
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    /// `x + 1ᵀ·row`: adds a `1×d` row to every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (sx, sr) = (self.shape(x), self.shape(row));
        if sr.0 != 1 || sr.1 != sx.1 {
            return Err(dim_err("add_row", sx, sr));
        }
        let mut out = self.value(x).clone();
        let bias = self.value(row).data().to_vec();
        for r in 0..sx.0 {
            for (o, b) in out.row_mut(r).iter_mut().zip(&bias) {
                *o += b;
            }
        }
        let rg = self.rg(x) || self.rg(row);
        Ok(self.push(out, Op::AddRowBroadcast(x, row), rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            // `f64::max` would turn NaN into 0 and hide a diverged input.
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let rg = self.rg(x);
        self.push(out, Op::Relu(x), rg)
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            *v *= factor;
        }
        let rg = self.rg(x);
        self.push(out, Op::Scale(x, factor), rg)
    }

    /// Stacks tensors side by side along the feature axis.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::contract("concat_cols of zero tensors"))?;
        let rows = self.shape(*first).0;
        let mut cols = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.0 != rows {
                return Err(dim_err("concat_cols", self.shape(*first), s));
            }
            cols += s.1;
        }
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut c0 = 0;
            for &p in parts {
                let src = self.value(p).row(r);
                out.row_mut(r)[c0..c0 + src.len()].copy_from_slice(src);
                c0 += src.len();
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), rg))
    }

    /// Stacks tensors vertically.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::contract("concat_rows of zero tensors"))?;
        let cols = self.shape(*first).1;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.1 != cols {
                return Err(dim_err("concat_rows", self.shape(*first), s));
            }
            rows += s.0;
            data.extend_from_slice(self.value(p).data());
        }
        let out = Tensor::from_vec(rows, cols, data)?;
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(out, Op::ConcatRows(parts.to_vec()), rg))
    }

    /// Rows `start..end` of `x`.
    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let s = self.shape(x);
        if start > end || end > s.0 {
            return Err(Error::Index {
                what: "row slice end",
                index: end,
                bound: s.0,
            });
        }
        let data = self.value(x).data()[start * s.1..end * s.1].to_vec();
        let out = Tensor::from_vec(end - start, s.1, data)?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::SliceRows { input: x, start }, rg))
    }

    /// Averages all rows into a single `1×d` row.
    pub fn mean_pool_rows(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.shape(x);
        if r == 0 {
            return Err(Error::contract("mean_pool_rows over zero rows"));
        }
        let mut out = Tensor::zeros(1, c);
        let src = self.value(x);
        for i in 0..r {
            for (o, v) in out.data_mut().iter_mut().zip(src.row(i)) {
                *o += v;
            }
        }
        let inv = 1.0 / r as f64;
        for o in out.data_mut() {
            *o *= inv;
        }
        let rg = self.rg(x);
        Ok(self.push(out, Op::MeanPoolRows(x), rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let out = Tensor::scalar(self.value(x).sum());
        let rg = self.rg(x);
        self.push(out, Op::Sum(x), rg)
    }

    /// Inverted dropout. In eval mode, or with `rate == 0`, returns `x`
    /// itself so the output is bit-identical to the input.
    pub fn dropout(&mut self, x: Var, rate: f64, mode: Mode, seed: u64) -> Result<Var> {
        check_rate(rate)?;
        if mode == Mode::Eval || rate == 0.0 {
            return Ok(x);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keep_scale = 1.0 / (1.0 - rate);
        let n = self.value(x).data().len();
        let mask: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep_scale })
            .collect();
        let mut out = self.value(x).clone();
        for (o, m) in out.data_mut().iter_mut().zip(&mask) {
            *o *= m;
        }
        let rg = self.rg(x);
        Ok(self.push(out, Op::Mask { input: x, mask }, rg))
    }

    /// `out[v] = Σ_{(u→v)} w(u→v) · h[u]`, summed in `(v, u)` order.
    pub fn sparse_aggregate(&mut self, adj: &Arc<SparseAdj>, h: Var) -> Result<Var> {
        let s = self.shape(h);
        if s.0 != adj.num_nodes() {
            return Err(dim_err("sparse_aggregate", (adj.num_nodes(), s.1), s));
        }
        let out = aggregate_forward(adj, self.value(h));
        let rg = self.rg(h);
        Ok(self.push(
            out,
            Op::SparseAggregate {
                input: h,
                adj: Arc::clone(adj),
            },
            rg,
        ))
    }

    /// Per-edge, per-head scaled dot products `scale · q[dst]·k[src]`
    /// restricted to each head's column block. Output is `E×heads`.
    pub fn edge_scores(&mut self, q: Var, k: Var, edges: &Arc<EdgeIndex>, heads: usize, scale: f64) -> Result<Var> {
        let (sq, sk) = (self.shape(q), self.shape(k));
        if sq != sk || sq.0 != edges.num_nodes() {
            return Err(dim_err("edge_scores", sq, sk));
        }
        if heads == 0 || sq.1 % heads != 0 {
            return Err(Error::config(format!(
                "feature width {} not divisible by {heads} heads",
                sq.1
            )));
        }
        let hd = sq.1 / heads;
        let (qv, kv) = (self.value(q), self.value(k));
        let mut out = Tensor::zeros(edges.len(), heads);
        for e in 0..edges.len() {
            let qr = qv.row(edges.dst()[e]);
            let kr = kv.row(edges.src()[e]);
            for h in 0..heads {
                let cols = h * hd..(h + 1) * hd;
                let dot: f64 = qr[cols.clone()].iter().zip(&kr[cols]).map(|(a, b)| a * b).sum();
                out.set(e, h, scale * dot);
            }
        }
        let rg = self.rg(q) || self.rg(k);
        Ok(self.push(
            out,
            Op::EdgeScores {
                q,
                k,
                edges: Arc::clone(edges),
                heads,
                scale,
            },
            rg,
        ))
    }

    /// Softmax over the incoming edges of each destination, independently per
    /// column of the `E×heads` score matrix.
    pub fn segment_softmax(&mut self, scores: Var, edges: &Arc<EdgeIndex>) -> Result<Var> {
        let s = self.shape(scores);
        if s.0 != edges.len() {
            return Err(dim_err("segment_softmax", s, (edges.len(), s.1)));
        }
        let src = self.value(scores);
        let mut out = Tensor::zeros(s.0, s.1);
        let mut column = Vec::new();
        for v in 0..edges.num_nodes() {
            let range = edges.incoming(v);
            if range.is_empty() {
                continue;
            }
            for h in 0..s.1 {
                column.clear();
                column.extend(range.clone().map(|e| src.get(e, h)));
                softmax_in_place(&mut column);
                for (e, p) in range.clone().zip(&column) {
                    out.set(e, h, *p);
                }
            }
        }
        let rg = self.rg(scores);
        Ok(self.push(
            out,
            Op::SegmentSoftmax {
                scores,
                edges: Arc::clone(edges),
            },
            rg,
        ))
    }

    /// `out[dst, c] = Σ_e w[e, head(c)] · values[src, c]`.
    pub fn edge_aggregate(&mut self, weights: Var, values: Var, edges: &Arc<EdgeIndex>, heads: usize) -> Result<Var> {
        let (sw, sv) = (self.shape(weights), self.shape(values));
        if sw != (edges.len(), heads) || sv.0 != edges.num_nodes() || sv.1 % heads != 0 {
            return Err(dim_err("edge_aggregate", sw, sv));
        }
        let hd = sv.1 / heads;
        let (w, val) = (self.value(weights), self.value(values));
        let mut out = Tensor::zeros(sv.0, sv.1);
        for e in 0..edges.len() {
            let (u, v) = (edges.src()[e], edges.dst()[e]);
            for h in 0..heads {
                let a = w.get(e, h);
                for c in h * hd..(h + 1) * hd {
                    let add = a * val.get(u, c);
                    let cur = out.get(v, c);
                    out.set(v, c, cur + add);
                }
            }
        }
        let rg = self.rg(weights) || self.rg(values);
        Ok(self.push(
            out,
            Op::EdgeAggregate {
                weights,
                values,
                edges: Arc::clone(edges),
                heads,
            },
            rg,
        ))
    }

    /// Row-wise layer normalisation with a learned `1×d` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let (sx, sg, sb) = (self.shape(x), self.shape(gain), self.shape(bias));
        if sg != (1, sx.1) || sb != (1, sx.1) {
            return Err(dim_err("layer_norm", sx, sg));
        }
        let d = sx.1 as f64;
        let xv = self.value(x);
        let mut xhat = Tensor::zeros(sx.0, sx.1);
        let mut inv_std = Vec::with_capacity(sx.0);
        for r in 0..sx.0 {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / d;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for (o, v) in xhat.row_mut(r).iter_mut().zip(row) {
                *o = (v - mean) * is;
            }
            inv_std.push(is);
        }
        let (gv, bv) = (self.value(gain).data(), self.value(bias).data());
        let mut out = xhat.clone();
        for r in 0..sx.0 {
            for ((o, g), b) in out.row_mut(r).iter_mut().zip(gv).zip(bv) {
                *o = *o * g + b;
            }
        }
        let rg = self.rg(x) || self.rg(gain) || self.rg(bias);
        Ok(self.push(
            out,
            Op::LayerNorm {
                input: x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            rg,
        ))
    }

    /// Mean negative log-likelihood of `labels` under row-wise softmax.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (b, c) = self.shape(logits);
        if labels.len() != b {
            return Err(dim_err("cross_entropy", (b, c), (labels.len(), 1)));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
            return Err(Error::Index {
                what: "class label",
                index: bad,
                bound: c,
            });
        }
        if b == 0 {
            return Err(Error::contract("cross_entropy over an empty batch"));
        }
        let lv = self.value(logits);
        let mut probs = Tensor::zeros(b, c);
        let mut loss = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            let row = lv.row(r);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|v| (v - m).exp()).sum();
            let lse = m + z.ln();
            loss += lse - row[y];
            for (p, v) in probs.row_mut(r).iter_mut().zip(row) {
                *p = (v - lse).exp();
            }
        }
        let out = Tensor::scalar(loss / b as f64);
        let rg = self.rg(logits);
        Ok(self.push(
            out,
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            rg,
        ))
    }

    /// Propagates d(loss)/d(·) to every trainable leaf reachable from `loss`,
    /// adding into any gradient already stored there.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            if let Op::Leaf = self.nodes[i].op {
                match &mut self.nodes[i].grad {
                    Some(acc) => acc.add_assign(&g),
                    slot @ None => *slot = Some(g),
                }
                continue;
            }
            self.propagate(i, &g, &mut grads);
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let mut acc = |v: Var, t: Tensor| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&t),
                slot @ None => *slot = Some(t),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.rg(*a) {
                    let mut da = Tensor::zeros(av.rows(), av.cols());
                    gemm_nt(g, bv, &mut da);
                    acc(*a, da);
                }
                if self.rg(*b) {
                    let mut db = Tensor::zeros(bv.rows(), bv.cols());
                    gemm_tn(av, g, &mut db);
                    acc(*b, db);
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::AddRowBroadcast(x, row) => {
                acc(*x, g.clone());
                if self.rg(*row) {
                    let mut dr = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, v) in dr.data_mut().iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    acc(*row, dr);
                }
            }
            Op::Relu(x) => {
                let mut dx = g.clone();
                for (d, y) in dx.data_mut().iter_mut().zip(node.value.data()) {
                    if *y <= 0.0 {
                        *d = 0.0;
                    }
                }
                acc(*x, dx);
            }
            Op::Scale(x, f) => {
                let mut dx = g.clone();
                for d in dx.data_mut() {
                    *d *= f;
                }
                acc(*x, dx);
            }
            Op::ConcatCols(parts) => {
                let mut c0 = 0;
                for &p in parts {
                    let (r, c) = self.shape(p);
                    if self.rg(p) {
                        let mut dp = Tensor::zeros(r, c);
                        for i in 0..r {
                            dp.row_mut(i).copy_from_slice(&g.row(i)[c0..c0 + c]);
                        }
                        acc(p, dp);
                    }
                    c0 += c;
                }
            }
            Op::ConcatRows(parts) => {
                let mut r0 = 0;
                for &p in parts {
                    let (r, c) = self.shape(p);
                    if self.rg(p) {
                        let data = g.data()[r0 * c..(r0 + r) * c].to_vec();
                        acc(p, Tensor::from_vec(r, c, data).expect("slice shape"));
                    }
                    r0 += r;
                }
            }
            Op::SliceRows { input, start } => {
                let (r, c) = self.shape(*input);
                let mut dx = Tensor::zeros(r, c);
                let n = g.rows();
                dx.data_mut()[start * c..(start + n) * c].copy_from_slice(g.data());
                acc(*input, dx);
            }
            Op::MeanPoolRows(x) => {
                let (r, c) = self.shape(*x);
                let inv = 1.0 / r as f64;
                let mut dx = Tensor::zeros(r, c);
                for i in 0..r {
                    for (o, v) in dx.row_mut(i).iter_mut().zip(g.data()) {
                        *o = v * inv;
                    }
                }
                acc(*x, dx);
            }
            Op::Sum(x) => {
                let (r, c) = self.shape(*x);
                acc(*x, Tensor::filled(r, c, g.data()[0]));
            }
            Op::Mask { input, mask } => {
                let mut dx = g.clone();
                for (d, m) in dx.data_mut().iter_mut().zip(mask) {
                    *d *= m;
                }
                acc(*input, dx);
            }
            Op::SparseAggregate { input, adj } => {
                let (r, c) = self.shape(*input);
                let mut dx = Tensor::zeros(r, c);
                let idx = adj.index();
                for e in 0..idx.len() {
                    let (u, v, w) = (idx.src()[e], idx.dst()[e], adj.weights()[e]);
                    let gv = g.row(v);
                    for (o, gg) in dx.row_mut(u).iter_mut().zip(gv) {
                        *o += w * gg;
                    }
                }
                acc(*input, dx);
            }
            Op::EdgeScores {
                q,
                k,
                edges,
                heads,
                scale,
            } => {
                let (qv, kv) = (self.value(*q), self.value(*k));
                let (n, d) = qv.shape();
                let hd = d / heads;
                let mut dq = Tensor::zeros(n, d);
                let mut dk = Tensor::zeros(n, d);
                for e in 0..edges.len() {
                    let (u, v) = (edges.src()[e], edges.dst()[e]);
                    for h in 0..*heads {
                        let ge = g.get(e, h) * scale;
                        if ge == 0.0 {
                            continue;
                        }
                        for c in h * hd..(h + 1) * hd {
                            let t = dq.get(v, c) + ge * kv.get(u, c);
                            dq.set(v, c, t);
                            let t = dk.get(u, c) + ge * qv.get(v, c);
                            dk.set(u, c, t);
                        }
                    }
                }
                acc(*q, dq);
                acc(*k, dk);
            }
            Op::SegmentSoftmax { scores, edges } => {
                let y = &node.value;
                let mut dx = Tensor::zeros(y.rows(), y.cols());
                for v in 0..edges.num_nodes() {
                    let range = edges.incoming(v);
                    for h in 0..y.cols() {
                        let dot: f64 = range.clone().map(|e| g.get(e, h) * y.get(e, h)).sum();
                        for e in range.clone() {
                            dx.set(e, h, y.get(e, h) * (g.get(e, h) - dot));
                        }
                    }
                }
                acc(*scores, dx);
            }
            Op::EdgeAggregate {
                weights,
                values,
                edges,
                heads,
            } => {
                let (wv, vv) = (self.value(*weights), self.value(*values));
                let (n, d) = vv.shape();
                let hd = d / heads;
                let mut dw = Tensor::zeros(wv.rows(), wv.cols());
                let mut dv = Tensor::zeros(n, d);
                for e in 0..edges.len() {
                    let (u, v) = (edges.src()[e], edges.dst()[e]);
                    for h in 0..*heads {
                        let a = wv.get(e, h);
                        let mut s = 0.0;
                        for c in h * hd..(h + 1) * hd {
                            let gc = g.get(v, c);
                            s += gc * vv.get(u, c);
                            let t = dv.get(u, c) + a * gc;
                            dv.set(u, c, t);
                        }
                        dw.set(e, h, s);
                    }
                }
                acc(*weights, dw);
                acc(*values, dv);
            }
            Op::LayerNorm {
                input,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let (r, c) = xhat.shape();
                let gv = self.value(*gain).data();
                let mut dgain = Tensor::zeros(1, c);
                let mut dbias = Tensor::zeros(1, c);
                let mut dx = Tensor::zeros(r, c);
                let d = c as f64;
                let mut dxhat = vec![0.0; c];
                for i in 0..r {
                    let gr = g.row(i);
                    let xr = xhat.row(i);
                    for j in 0..c {
                        dgain.data_mut()[j] += gr[j] * xr[j];
                        dbias.data_mut()[j] += gr[j];
                        dxhat[j] = gr[j] * gv[j];
                    }
                    let sum_d: f64 = dxhat.iter().sum();
                    let sum_dx: f64 = dxhat.iter().zip(xr).map(|(a, b)| a * b).sum();
                    let is = inv_std[i];
                    for (j, o) in dx.row_mut(i).iter_mut().enumerate() {
                        *o = is / d * (d * dxhat[j] - sum_d - xr[j] * sum_dx);
                    }
                }
                acc(*input, dx);
                acc(*gain, dgain);
                acc(*bias, dbias);
            }
            Op::CrossEntropy { logits, labels, probs } => {
                let b = labels.len() as f64;
                let up = g.data()[0];
                let mut dl = probs.clone();
                for (r, &y) in labels.iter().enumerate() {
                    let row = dl.row_mut(r);
                    row[y] -= 1.0;
                    for v in row.iter_mut() {
                        *v *= up / b;
                    }
                }
                acc(*logits, dl);
            }
        }
    }
}

pub fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::config(format!("dropout rate {rate} not in [0, 1)")));
    }
    Ok(())
}

fn aggregate_forward(adj: &SparseAdj, h: &Tensor) -> Tensor {
    let idx = adj.index();
    let mut out = Tensor::zeros(h.rows(), h.cols());
    for v in 0..idx.num_nodes() {
        let orow_range = idx.incoming(v);
        if orow_range.is_empty() {
            continue;
        }
        let mut acc = vec![0.0; h.cols()];
        for e in orow_range {
            let w = adj.weights()[e];
            for (a, x) in acc.iter_mut().zip(h.row(idx.src()[e])) {
                *a += w * x;
            }
        }
        out.row_mut(v).copy_from_slice(&acc);
    }
    out
}

fn softmax_in_place(xs: &mut [f64]) {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - m).exp();
        z += *x;
    }
    for x in xs.iter_mut() {
        *x /= z;
    }
}

/// Softmax of `scores` within each segment; `segment_of[e]` names the
/// segment of entry `e`. Entries are reduced in input order.
pub fn softmax_segments(scores: &[f64], segment_of: &[usize]) -> Result<Vec<f64>> {
    if scores.len() != segment_of.len() {
        return Err(dim_err("softmax_segments", (scores.len(), 1), (segment_of.len(), 1)));
    }
    if scores.is_empty() {
        return Ok(Vec::new());
    }
    let nseg = segment_of.iter().max().map_or(0, |m| m + 1);
    let mut max = vec![f64::NEG_INFINITY; nseg];
    for (&s, &seg) in scores.iter().zip(segment_of) {
        max[seg] = max[seg].max(s);
    }
    let mut out: Vec<f64> = scores
        .iter()
        .zip(segment_of)
        .map(|(&s, &seg)| (s - max[seg]).exp())
        .collect();
    let mut z = vec![0.0; nseg];
    for (&e, &seg) in out.iter().zip(segment_of) {
        z[seg] += e;
    }
    for (o, &seg) in out.iter_mut().zip(segment_of) {
        *o /= z[seg];
    }
    Ok(out)
}
