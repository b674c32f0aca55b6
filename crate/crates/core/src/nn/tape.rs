//! Tape-based reverse-mode differentiation over [`Tensor`]s.
//!
//! Every operation appends a node holding its value and the handles of its
//! inputs, so the node list is already in topological order. [`Tape::backward`]
//! sweeps it in reverse once. Gradients of leaves that require them are
//! accumulated across calls until [`Tape::zero_grad`].

use super::tensor::{matmul_acc, matmul_nt_acc, matmul_tn_acc, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    MulScalar(Var, Var),
    /// Keeps `sigmoid(x)` for the backward pass when a gradient is needed.
    Swish(Var, Vec<f64>),
    Square(Var),
    SoftmaxRows(Var),
    Sum(Var),
    Mean(Var),
    MeanRows(Var),
    Transpose(Var),
    GatherRows(Var, Vec<usize>),
    ConcatCols(Var, Var),
    AppendOnesCol(Var),
    OuterSub(Var, Var),
    PairContract(Var, Var, usize),
    SoftmaxCrossEntropy(Var, Vec<usize>),
    Reshape(Var),
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Default, Debug, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn swish(x: f64) -> f64 {
    x * sigmoid(x)
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::ShapeMismatch { op, lhs: a.shape().to_vec(), rhs: b.shape().to_vec() }
}

fn add_into(dst: &mut Option<Vec<f64>>, src: &[f64]) {
    match dst {
        Some(d) => d.iter_mut().zip(src).for_each(|(a, b)| *a += b),
        None => *dst = Some(src.to_vec()),
    }
}

fn buf(dst: &mut Option<Vec<f64>>, len: usize) -> &mut Vec<f64> {
    dst.get_or_insert_with(|| vec![0.0; len])
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
        self.nodes.push(Node { value, op, requires_grad });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Adds an input tensor.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of a leaf, if any has reached it.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    /// Drops every node recorded after the first `len`, so a tape holding
    /// bound parameters can be reused across inputs.
    pub fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
        self.grads.truncate(len);
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.cols() != tb.rows() {
            return Err(mismatch("matmul", ta, tb));
        }
        let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
        let mut out = vec![0.0; m * n];
        matmul_acc(ta.data(), tb.data(), &mut out, m, k, n);
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b), rg))
    }

    fn zip_same(&mut self, a: Var, b: Var, name: &'static str, f: fn(f64, f64) -> f64) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch(name, ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| f(*x, *y)).collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same(a, b, "add", |x, y| x + y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(t, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same(a, b, "sub", |x, y| x - y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(t, Op::Sub(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same(a, b, "mul", |x, y| x * y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(t, Op::Mul(a, b), rg))
    }

    /// Adds a row vector to every row of a matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (ta, tr) = (self.value(a), self.value(row));
        if tr.len() != ta.cols() {
            return Err(mismatch("add_row", ta, tr));
        }
        let n = ta.cols();
        let mut data = ta.data().to_vec();
        for chunk in data.chunks_mut(n) {
            chunk.iter_mut().zip(tr.data()).for_each(|(x, b)| *x += b);
        }
        let t = Tensor::new(ta.shape().to_vec(), data)?;
        let rg = self.rg(&[a, row]);
        Ok(self.push(t, Op::AddRow(a, row), rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let ta = self.value(a);
        let t = Tensor::new(ta.shape().to_vec(), ta.data().iter().map(|x| x * c).collect()).unwrap();
        let rg = self.rg(&[a]);
        self.push(t, Op::Scale(a, c), rg)
    }

    /// Multiplies every entry of `a` by the single-element tensor `s`.
    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Result<Var> {
        let (ta, ts) = (self.value(a), self.value(s));
        if ts.len() != 1 {
            return Err(mismatch("mul_scalar", ta, ts));
        }
        let c = ts.item();
        let t = Tensor::new(ta.shape().to_vec(), ta.data().iter().map(|x| x * c).collect())?;
        let rg = self.rg(&[a, s]);
        Ok(self.push(t, Op::MulScalar(a, s), rg))
    }

    /// `x · sigmoid(x)`
    pub fn swish(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let rg = self.rg(&[a]);
        let (t, sig) = if rg {
            let sig: Vec<f64> = ta.data().iter().map(|&x| sigmoid(x)).collect();
            let out = ta.data().iter().zip(&sig).map(|(x, s)| x * s).collect();
            (Tensor::new(ta.shape().to_vec(), out).unwrap(), sig)
        } else {
            (Tensor::new(ta.shape().to_vec(), ta.data().iter().map(|&x| swish(x)).collect()).unwrap(), Vec::new())
        };
        self.push(t, Op::Swish(a, sig), rg)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let t = Tensor::new(ta.shape().to_vec(), ta.data().iter().map(|x| x * x).collect()).unwrap();
        let rg = self.rg(&[a]);
        self.push(t, Op::Square(a), rg)
    }

    /// Numerically stable softmax of each row.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let n = ta.cols();
        let mut data = ta.data().to_vec();
        for row in data.chunks_mut(n) {
            softmax_in_place(row);
        }
        let t = Tensor::new(ta.shape().to_vec(), data).unwrap();
        let rg = self.rg(&[a]);
        self.push(t, Op::SoftmaxRows(a), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.rg(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let s = ta.data().iter().sum::<f64>() / ta.len() as f64;
        let rg = self.rg(&[a]);
        self.push(Tensor::scalar(s), Op::Mean(a), rg)
    }

    /// Column means: `[m, n] → [1, n]`.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let (m, n) = (ta.rows(), ta.cols());
        let mut out = vec![0.0; n];
        for row in ta.data().chunks(n) {
            out.iter_mut().zip(row).for_each(|(o, x)| *o += x);
        }
        out.iter_mut().for_each(|o| *o /= m as f64);
        let rg = self.rg(&[a]);
        self.push(Tensor::row(out), Op::MeanRows(a), rg)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let (m, n) = (ta.rows(), ta.cols());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = ta.data()[i * n + j];
            }
        }
        let rg = self.rg(&[a]);
        self.push(Tensor::new(vec![n, m], out).unwrap(), Op::Transpose(a), rg)
    }

    /// Selects rows by index; indices may repeat.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let ta = self.value(a);
        let (m, n) = (ta.rows(), ta.cols());
        let mut out = Vec::with_capacity(idx.len() * n);
        for &i in idx {
            if i >= m {
                return Err(Error::InvalidArgument(format!("gather index {i} out of {m} rows")));
            }
            out.extend_from_slice(&ta.data()[i * n..(i + 1) * n]);
        }
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::new(vec![idx.len(), n], out)?, Op::GatherRows(a, idx.to_vec()), rg))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rows() != tb.rows() {
            return Err(mismatch("concat_cols", ta, tb));
        }
        let (m, na, nb) = (ta.rows(), ta.cols(), tb.cols());
        let mut out = Vec::with_capacity(m * (na + nb));
        for i in 0..m {
            out.extend_from_slice(&ta.data()[i * na..(i + 1) * na]);
            out.extend_from_slice(&tb.data()[i * nb..(i + 1) * nb]);
        }
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::new(vec![m, na + nb], out)?, Op::ConcatCols(a, b), rg))
    }

    /// Appends a constant column of ones.
    pub fn append_ones_col(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let (m, n) = (ta.rows(), ta.cols());
        let mut out = Vec::with_capacity(m * (n + 1));
        for row in ta.data().chunks(n.max(1)).take(m) {
            out.extend_from_slice(&row[..n]);
            out.push(1.0);
        }
        let rg = self.rg(&[a]);
        self.push(Tensor::new(vec![m, n + 1], out).unwrap(), Op::AppendOnesCol(a), rg)
    }

    /// `out[i, j] = a[i] − b[j]` for flat vectors `a` (length m) and `b` (length n).
    pub fn outer_sub(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, n) = (ta.len(), tb.len());
        let mut out = Vec::with_capacity(m * n);
        for x in ta.data() {
            out.extend(tb.data().iter().map(|y| x - y));
        }
        let rg = self.rg(&[a, b]);
        self.push(Tensor::new(vec![m, n], out).unwrap(), Op::OuterSub(a, b), rg)
    }

    /// Averaged per-group outer products. With `k` of shape `[g·s, r]` and `f`
    /// of shape `[g·s, c]`, returns `[g, r·c]` with
    /// `out[n, j·c + i] = (1/s) Σ_t k[n·s + t, j] · f[n·s + t, i]`.
    pub fn pair_contract(&mut self, k: Var, f: Var, s: usize) -> Result<Var> {
        let (tk, tf) = (self.value(k), self.value(f));
        if s == 0 || tk.rows() != tf.rows() || tk.rows() % s != 0 {
            return Err(mismatch("pair_contract", tk, tf));
        }
        let (groups, r, c) = (tk.rows() / s, tk.cols(), tf.cols());
        let inv = 1.0 / s as f64;
        let mut out = vec![0.0; groups * r * c];
        for g in 0..groups {
            let o = &mut out[g * r * c..(g + 1) * r * c];
            for t in 0..s {
                let row = g * s + t;
                let kr = &tk.data()[row * r..(row + 1) * r];
                let fr = &tf.data()[row * c..(row + 1) * c];
                for (j, kj) in kr.iter().enumerate() {
                    let w = kj * inv;
                    for (oi, fi) in o[j * c..(j + 1) * c].iter_mut().zip(fr) {
                        *oi += w * fi;
                    }
                }
            }
        }
        let rg = self.rg(&[k, f]);
        Ok(self.push(Tensor::new(vec![groups, r * c], out)?, Op::PairContract(k, f, s), rg))
    }

    /// Mean cross-entropy of row-wise softmax against integer labels.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let tl = self.value(logits);
        let (m, n) = (tl.rows(), tl.cols());
        if labels.len() != m || labels.iter().any(|&l| l >= n) {
            return Err(Error::InvalidArgument(format!("{} labels for {m} rows of {n} classes", labels.len())));
        }
        let mut loss = 0.0;
        for (row, &l) in tl.data().chunks(n).zip(labels) {
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + row.iter().map(|x| (x - mx).exp()).sum::<f64>().ln();
            loss += lse - row[l];
        }
        let rg = self.rg(&[logits]);
        Ok(self.push(Tensor::scalar(loss / m as f64), Op::SoftmaxCrossEntropy(logits, labels.to_vec()), rg))
    }

    /// Same data under a new shape.
    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(a).clone().reshaped(shape)?;
        let rg = self.rg(&[a]);
        Ok(self.push(t, Op::Reshape(a), rg))
    }

    /// Back-propagates from a single-element `loss`, accumulating gradients.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::InvalidArgument(format!("backward needs a scalar loss, got shape {:?}", self.value(loss).shape())));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = adj[i].take() else { continue };
            if matches!(self.nodes[i].op, Op::Leaf) {
                add_into(&mut self.grads[i], &g);
            } else {
                self.propagate(i, &g, &mut adj);
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let val = |v: Var| &self.nodes[v.0].value;
        let wants = |v: Var| self.nodes[v.0].requires_grad;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                if wants(*a) {
                    matmul_nt_acc(g, tb.data(), buf(&mut adj[a.0], m * k), m, n, k);
                }
                if wants(*b) {
                    matmul_tn_acc(ta.data(), g, buf(&mut adj[b.0], k * n), m, k, n);
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if wants(*v) {
                        add_into(&mut adj[v.0], g);
                    }
                }
            }
            Op::Sub(a, b) => {
                if wants(*a) {
                    add_into(&mut adj[a.0], g);
                }
                if wants(*b) {
                    let d = buf(&mut adj[b.0], g.len());
                    d.iter_mut().zip(g).for_each(|(x, y)| *x -= y);
                }
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                if wants(*a) {
                    let d = buf(&mut adj[a.0], g.len());
                    for ((x, gi), bi) in d.iter_mut().zip(g).zip(tb.data()) {
                        *x += gi * bi;
                    }
                }
                if wants(*b) {
                    let d = buf(&mut adj[b.0], g.len());
                    for ((x, gi), ai) in d.iter_mut().zip(g).zip(ta.data()) {
                        *x += gi * ai;
                    }
                }
            }
            Op::AddRow(a, row) => {
                if wants(*a) {
                    add_into(&mut adj[a.0], g);
                }
                if wants(*row) {
                    let n = val(*row).len();
                    let d = buf(&mut adj[row.0], n);
                    for chunk in g.chunks(n) {
                        d.iter_mut().zip(chunk).for_each(|(x, y)| *x += y);
                    }
                }
            }
            Op::Scale(a, c) => {
                if wants(*a) {
                    let d = buf(&mut adj[a.0], g.len());
                    d.iter_mut().zip(g).for_each(|(x, y)| *x += c * y);
                }
            }
            Op::MulScalar(a, s) => {
                let (ta, ts) = (val(*a), val(*s));
                if wants(*a) {
                    let c = ts.item();
                    let d = buf(&mut adj[a.0], g.len());
                    d.iter_mut().zip(g).for_each(|(x, y)| *x += c * y);
                }
                if wants(*s) {
                    let ds: f64 = g.iter().zip(ta.data()).map(|(y, x)| y * x).sum();
                    buf(&mut adj[s.0], 1)[0] += ds;
                }
            }
            Op::Swish(a, sig) => {
                let d = buf(&mut adj[a.0], g.len());
                for (((x, gi), xi), s) in d.iter_mut().zip(g).zip(val(*a).data()).zip(sig) {
                    *x += gi * (s + xi * s * (1.0 - s));
                }
            }
            Op::Square(a) => {
                let d = buf(&mut adj[a.0], g.len());
                for ((x, gi), xi) in d.iter_mut().zip(g).zip(val(*a).data()) {
                    *x += 2.0 * gi * xi;
                }
            }
            Op::SoftmaxRows(a) => {
                let y = node.value.data();
                let n = node.value.cols();
                let d = buf(&mut adj[a.0], g.len());
                for ((drow, grow), yrow) in d.chunks_mut(n).zip(g.chunks(n)).zip(y.chunks(n)) {
                    let dot: f64 = grow.iter().zip(yrow).map(|(p, q)| p * q).sum();
                    for ((x, gi), yi) in drow.iter_mut().zip(grow).zip(yrow) {
                        *x += yi * (gi - dot);
                    }
                }
            }
            Op::Sum(a) => {
                let len = val(*a).len();
                buf(&mut adj[a.0], len).iter_mut().for_each(|x| *x += g[0]);
            }
            Op::Mean(a) => {
                let len = val(*a).len();
                let c = g[0] / len as f64;
                buf(&mut adj[a.0], len).iter_mut().for_each(|x| *x += c);
            }
            Op::MeanRows(a) => {
                let ta = val(*a);
                let (m, n) = (ta.rows(), ta.cols());
                let d = buf(&mut adj[a.0], m * n);
                for row in d.chunks_mut(n) {
                    row.iter_mut().zip(g).for_each(|(x, y)| *x += y / m as f64);
                }
            }
            Op::Transpose(a) => {
                let ta = val(*a);
                let (m, n) = (ta.rows(), ta.cols());
                let d = buf(&mut adj[a.0], m * n);
                for r in 0..m {
                    for c in 0..n {
                        d[r * n + c] += g[c * m + r];
                    }
                }
            }
            Op::GatherRows(a, idx) => {
                let ta = val(*a);
                let n = ta.cols();
                let d = buf(&mut adj[a.0], ta.len());
                for (row, &src) in idx.iter().enumerate() {
                    let gr = &g[row * n..(row + 1) * n];
                    d[src * n..(src + 1) * n].iter_mut().zip(gr).for_each(|(x, y)| *x += y);
                }
            }
            Op::ConcatCols(a, b) => {
                let (na, nb) = (val(*a).cols(), val(*b).cols());
                let m = val(*a).rows();
                if wants(*a) {
                    let d = buf(&mut adj[a.0], m * na);
                    for r in 0..m {
                        let src = &g[r * (na + nb)..r * (na + nb) + na];
                        d[r * na..(r + 1) * na].iter_mut().zip(src).for_each(|(x, y)| *x += y);
                    }
                }
                if wants(*b) {
                    let d = buf(&mut adj[b.0], m * nb);
                    for r in 0..m {
                        let src = &g[r * (na + nb) + na..(r + 1) * (na + nb)];
                        d[r * nb..(r + 1) * nb].iter_mut().zip(src).for_each(|(x, y)| *x += y);
                    }
                }
            }
            Op::AppendOnesCol(a) => {
                let ta = val(*a);
                let (m, n) = (ta.rows(), ta.cols());
                let d = buf(&mut adj[a.0], m * n);
                for r in 0..m {
                    let src = &g[r * (n + 1)..r * (n + 1) + n];
                    d[r * n..(r + 1) * n].iter_mut().zip(src).for_each(|(x, y)| *x += y);
                }
            }
            Op::OuterSub(a, b) => {
                let (m, n) = (val(*a).len(), val(*b).len());
                if wants(*a) {
                    let d = buf(&mut adj[a.0], m);
                    for (x, row) in d.iter_mut().zip(g.chunks(n)) {
                        *x += row.iter().sum::<f64>();
                    }
                }
                if wants(*b) {
                    let d = buf(&mut adj[b.0], n);
                    for row in g.chunks(n) {
                        d.iter_mut().zip(row).for_each(|(x, y)| *x -= y);
                    }
                }
            }
            Op::PairContract(k, f, s) => {
                let (tk, tf) = (val(*k), val(*f));
                let (groups, r, c) = (tk.rows() / s, tk.cols(), tf.cols());
                let inv = 1.0 / *s as f64;
                if wants(*k) {
                    let d = buf(&mut adj[k.0], tk.len());
                    for gi in 0..groups {
                        let go = &g[gi * r * c..(gi + 1) * r * c];
                        for t in 0..*s {
                            let row = gi * s + t;
                            let fr = &tf.data()[row * c..(row + 1) * c];
                            for j in 0..r {
                                let dot: f64 = go[j * c..(j + 1) * c].iter().zip(fr).map(|(p, q)| p * q).sum();
                                d[row * r + j] += inv * dot;
                            }
                        }
                    }
                }
                if wants(*f) {
                    let d = buf(&mut adj[f.0], tf.len());
                    for gi in 0..groups {
                        let go = &g[gi * r * c..(gi + 1) * r * c];
                        for t in 0..*s {
                            let row = gi * s + t;
                            let kr = &tk.data()[row * r..(row + 1) * r];
                            let dr = &mut d[row * c..(row + 1) * c];
                            for (j, kj) in kr.iter().enumerate() {
                                let w = kj * inv;
                                for (x, gv) in dr.iter_mut().zip(&go[j * c..(j + 1) * c]) {
                                    *x += w * gv;
                                }
                            }
                        }
                    }
                }
            }
            Op::SoftmaxCrossEntropy(logits, labels) => {
                let tl = val(*logits);
                let (m, n) = (tl.rows(), tl.cols());
                let d = buf(&mut adj[logits.0], m * n);
                let c = g[0] / m as f64;
                for ((drow, row), &l) in d.chunks_mut(n).zip(tl.data().chunks(n)).zip(labels) {
                    let mut p = row.to_vec();
                    softmax_in_place(&mut p);
                    p[l] -= 1.0;
                    drow.iter_mut().zip(&p).for_each(|(x, y)| *x += c * y);
                }
            }
            Op::Reshape(a) => add_into(&mut adj[a.0], g),
        }
    }
}

pub fn softmax_in_place(row: &mut [f64]) {
    let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in row.iter_mut() {
        *x = (*x - mx).exp();
        total += *x;
    }
    row.iter_mut().for_each(|x| *x /= total);
}
