//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every operation appends a node whose inputs are earlier nodes, so the tape
//! is topologically ordered by construction and the backward pass is a single
//! reverse sweep.

use std::sync::Arc;

use rand::Rng;

use super::tensor::{Scalar, Tensor};
use super::NumericsError;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Additive-mask surrogate for minus infinity.
pub const MASK_NEG: f64 = -1e9;
pub const LAYER_NORM_EPS: f64 = 1e-5;

enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    BatchMatMul { a: Var, b: Var, trans_b: bool },
    Add(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Scale(Var, T),
    Relu(Var),
    Sum(Var),
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Vec<T>, rstd: Vec<T> },
    Softmax(Var),
    CrossEntropy { logits: Var, probs: Vec<T>, targets: Vec<u32>, include: Vec<bool>, count: usize },
    Gather { table: Var, ids: Vec<u32> },
    SplitHeads { x: Var, batch: usize, heads: usize },
    MergeHeads { x: Var, batch: usize },
    Dropout { x: Var, mask: Vec<T> },
}

impl<T> Op<T> {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Mul(a, b) | Op::AddBias(a, b) => vec![*a, *b],
            Op::BatchMatMul { a, b, .. } => vec![*a, *b],
            Op::Scale(x, _) | Op::Relu(x) | Op::Sum(x) | Op::Softmax(x) => vec![*x],
            Op::LayerNorm { x, gain, bias, .. } => vec![*x, *gain, *bias],
            Op::CrossEntropy { logits, .. } => vec![*logits],
            Op::Gather { table, .. } => vec![*table],
            Op::SplitHeads { x, .. } | Op::MergeHeads { x, .. } | Op::Dropout { x, .. } => vec![*x],
        }
    }
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Tape::new()
    }
}

/// Gradients produced by [`Tape::backward`], indexed by variable.
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of the loss with respect to `v`; zero when `v` does not reach the loss.
    pub fn wrt(&self, v: Var) -> Tensor<T> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(self.shapes[v.0].clone()),
        }
    }

    pub fn take(&mut self, v: Var) -> Tensor<T> {
        self.grads[v.0]
            .take()
            .unwrap_or_else(|| Tensor::zeros(self.shapes[v.0].clone()))
    }
}

fn shape_err(op: &'static str, a: &[usize], b: &[usize]) -> NumericsError {
    NumericsError::ShapeMismatch {
        op,
        left: a.to_vec(),
        right: b.to_vec(),
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Tape<T> {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        let needs_grad = op.inputs().iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    /// A differentiable input.
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// A non-differentiable input.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (av, bv) = (self.value(a), self.value(b));
        let (sa, sb) = (av.shape(), bv.shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(shape_err("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = Tensor::zeros(vec![m, n]);
        T::gemm(
            m, k, n, T::one(), av.data(), k as isize, 1, bv.data(), n as isize, 1, T::zero(),
            out.data_mut(), n as isize, 1,
        );
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    /// Per-batch product of `a [B,m,k]` with `b [B,k,n]`, or with `b [B,n,k]`
    /// transposed when `trans_b` is set.
    pub fn batch_matmul(&mut self, a: Var, b: Var, trans_b: bool) -> Result<Var, NumericsError> {
        let (av, bv) = (self.value(a), self.value(b));
        let (sa, sb) = (av.shape(), bv.shape());
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] {
            return Err(shape_err("batch_matmul", sa, sb));
        }
        let (batch, m, k) = (sa[0], sa[1], sa[2]);
        let (kb, n) = if trans_b { (sb[2], sb[1]) } else { (sb[1], sb[2]) };
        if kb != k {
            return Err(shape_err("batch_matmul", sa, sb));
        }
        let mut out = Tensor::zeros(vec![batch, m, n]);
        let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
        for i in 0..batch {
            T::gemm(
                m,
                k,
                n,
                T::one(),
                &av.data()[i * m * k..(i + 1) * m * k],
                k as isize,
                1,
                &bv.data()[i * k * n..(i + 1) * k * n],
                rsb,
                csb,
                T::zero(),
                &mut out.data_mut()[i * m * n..(i + 1) * m * n],
                n as isize,
                1,
            );
        }
        Ok(self.push(out, Op::BatchMatMul { a, b, trans_b }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err("add", av.shape(), bv.shape()));
        }
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| x + y).collect();
        let out = Tensor::new(av.shape().to_vec(), data);
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err("mul", av.shape(), bv.shape()));
        }
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| x * y).collect();
        let out = Tensor::new(av.shape().to_vec(), data);
        Ok(self.push(out, Op::Mul(a, b)))
    }

    /// Adds a vector to every row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var, NumericsError> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.shape().len() != 1 || bv.len() != xv.cols() {
            return Err(shape_err("add_bias", xv.shape(), bv.shape()));
        }
        let c = xv.cols();
        let data = xv.data().iter().enumerate().map(|(i, &v)| v + bv.data()[i % c]).collect();
        let out = Tensor::new(xv.shape().to_vec(), data);
        Ok(self.push(out, Op::AddBias(x, bias)))
    }

    pub fn scale(&mut self, x: Var, s: T) -> Var {
        let out = self.value(x).map(|v| v * s);
        self.push(out, Op::Scale(x, s))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| if v > T::zero() { v } else { T::zero() });
        self.push(out, Op::Relu(x))
    }

    /// Whether each ReLU input is positive, over every ReLU node in
    /// recording order.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu(x) => Some(x),
                _ => None,
            })
            .flat_map(|x| self.value(x).data().iter().map(|&v| v > T::zero()))
            .collect()
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().copied().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// Normalizes each row to zero mean and unit variance, then applies
    /// `gain` and `bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var, NumericsError> {
        let xv = self.value(x);
        let d = xv.cols();
        if d < 2 || self.value(gain).shape() != [d] || self.value(bias).shape() != [d] {
            return Err(shape_err("layer_norm", xv.shape(), self.value(gain).shape()));
        }
        let (g, b) = (self.value(gain).data(), self.value(bias).data());
        let rows = xv.rows();
        let dn = T::of(d as f64);
        let eps = T::of(LAYER_NORM_EPS);
        let mut xhat = vec![T::zero(); xv.len()];
        let mut rstd = vec![T::zero(); rows];
        let mut out = vec![T::zero(); xv.len()];
        for r in 0..rows {
            let row = xv.row(r);
            let mean = row.iter().copied().sum::<T>() / dn;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / dn;
            let rs = T::one() / (var + eps).sqrt();
            rstd[r] = rs;
            for j in 0..d {
                let h = (row[j] - mean) * rs;
                xhat[r * d + j] = h;
                out[r * d + j] = h * g[j] + b[j];
            }
        }
        let out = Tensor::new(xv.shape().to_vec(), out);
        Ok(self.push(out, Op::LayerNorm { x, gain, bias, xhat, rstd }))
    }

    /// Row-wise softmax over the last axis. `mask` marks allowed entries; it
    /// has either one flag per element of `x` or one per column (shared by all
    /// rows). Disallowed entries receive the additive `MASK_NEG` surrogate.
    pub fn softmax_rows(&mut self, x: Var, mask: Option<Arc<[bool]>>) -> Result<Var, NumericsError> {
        let xv = self.value(x);
        let (rows, cols) = (xv.rows(), xv.cols());
        if let Some(m) = &mask {
            if m.len() != xv.len() && m.len() != cols {
                return Err(shape_err("softmax_rows", xv.shape(), &[m.len()]));
            }
        }
        let neg = T::of(MASK_NEG);
        let mut out = vec![T::zero(); xv.len()];
        for r in 0..rows {
            let row = xv.row(r);
            let allowed = |j: usize| match &mask {
                None => true,
                Some(m) if m.len() == cols => m[j],
                Some(m) => m[r * cols + j],
            };
            if !(0..cols).any(allowed) {
                return Err(NumericsError::FullyMaskedRow { row: r });
            }
            let o = &mut out[r * cols..(r + 1) * cols];
            for j in 0..cols {
                o[j] = if allowed(j) { row[j] } else { row[j] + neg };
            }
            let max = o.iter().copied().fold(T::neg_infinity(), T::max);
            let mut total = T::zero();
            for v in o.iter_mut() {
                *v = (*v - max).exp();
                total = total + *v;
            }
            for v in o.iter_mut() {
                *v = *v / total;
            }
        }
        let out = Tensor::new(xv.shape().to_vec(), out);
        Ok(self.push(out, Op::Softmax(x)))
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax of
    /// `logits`, over rows where `include` is set.
    pub fn cross_entropy(
        &mut self,
        logits: Var,
        targets: &[u32],
        include: &[bool],
    ) -> Result<Var, NumericsError> {
        let lv = self.value(logits);
        let (rows, v) = (lv.rows(), lv.cols());
        if lv.shape().len() != 2 || targets.len() != rows || include.len() != rows {
            return Err(shape_err("cross_entropy", lv.shape(), &[targets.len()]));
        }
        let count = include.iter().filter(|&&b| b).count();
        if count == 0 {
            return Err(NumericsError::NoTargets);
        }
        let mut probs = vec![T::zero(); lv.len()];
        let mut total = 0.0f64;
        for r in 0..rows {
            if !include[r] {
                continue;
            }
            let t = targets[r] as usize;
            if t >= v {
                return Err(NumericsError::TargetOutOfRange { target: targets[r], classes: v });
            }
            let row = lv.row(r);
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let p = &mut probs[r * v..(r + 1) * v];
            let mut z = T::zero();
            for (pj, &x) in p.iter_mut().zip(row) {
                *pj = (x - max).exp();
                z = z + *pj;
            }
            for pj in p.iter_mut() {
                *pj = *pj / z;
            }
            total += (max + z.ln() - row[t]).to_f64().unwrap();
        }
        let loss = Tensor::scalar(T::of(total / count as f64));
        Ok(self.push(
            loss,
            Op::CrossEntropy {
                logits,
                probs,
                targets: targets.to_vec(),
                include: include.to_vec(),
                count,
            },
        ))
    }

    /// Rows of `table [V, d]` selected by `ids`, giving `[ids.len(), d]`.
    pub fn gather(&mut self, table: Var, ids: &[u32]) -> Result<Var, NumericsError> {
        let tv = self.value(table);
        if tv.shape().len() != 2 {
            return Err(shape_err("gather", tv.shape(), &[ids.len()]));
        }
        let (vocab, d) = (tv.shape()[0], tv.shape()[1]);
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id as usize >= vocab {
                return Err(NumericsError::TargetOutOfRange { target: id, classes: vocab });
            }
            data.extend_from_slice(tv.row(id as usize));
        }
        let out = Tensor::new(vec![ids.len(), d], data);
        Ok(self.push(out, Op::Gather { table, ids: ids.to_vec() }))
    }

    /// `[B*T, H*dh]` to `[B*H, T, dh]`.
    pub fn split_heads(&mut self, x: Var, batch: usize, heads: usize) -> Result<Var, NumericsError> {
        let xv = self.value(x);
        let (rows, d) = (xv.rows(), xv.cols());
        if xv.shape().len() != 2 || batch == 0 || rows % batch != 0 || d % heads != 0 {
            return Err(shape_err("split_heads", xv.shape(), &[batch, heads]));
        }
        let (t, dh) = (rows / batch, d / heads);
        let src = xv.data();
        let mut out = vec![T::zero(); xv.len()];
        for b in 0..batch {
            for h in 0..heads {
                for p in 0..t {
                    let dst = ((b * heads + h) * t + p) * dh;
                    let from = (b * t + p) * d + h * dh;
                    out[dst..dst + dh].copy_from_slice(&src[from..from + dh]);
                }
            }
        }
        let out = Tensor::new(vec![batch * heads, t, dh], out);
        Ok(self.push(out, Op::SplitHeads { x, batch, heads }))
    }

    /// `[B*H, T, dh]` to `[B*T, H*dh]`.
    pub fn merge_heads(&mut self, x: Var, batch: usize) -> Result<Var, NumericsError> {
        let xv = self.value(x);
        let s = xv.shape();
        if s.len() != 3 || batch == 0 || !s[0].is_multiple_of(batch) {
            return Err(shape_err("merge_heads", s, &[batch]));
        }
        let (heads, t, dh) = (s[0] / batch, s[1], s[2]);
        let d = heads * dh;
        let src = xv.data();
        let mut out = vec![T::zero(); xv.len()];
        for b in 0..batch {
            for h in 0..heads {
                for p in 0..t {
                    let from = ((b * heads + h) * t + p) * dh;
                    let dst = (b * t + p) * d + h * dh;
                    out[dst..dst + dh].copy_from_slice(&src[from..from + dh]);
                }
            }
        }
        let out = Tensor::new(vec![batch * t, d], out);
        Ok(self.push(out, Op::MergeHeads { x, batch }))
    }

    /// Inverted dropout; a no-op when `p == 0`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, rng: &mut R) -> Var {
        if p <= 0.0 {
            return x;
        }
        let keep = T::of(1.0 / (1.0 - p));
        let xv = self.value(x);
        let mask: Vec<T> = (0..xv.len())
            .map(|_| if rng.random::<f64>() < p { T::zero() } else { keep })
            .collect();
        let data = xv.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        let out = Tensor::new(xv.shape().to_vec(), data);
        self.push(out, Op::Dropout { x, mask })
    }

    /// Back-propagate from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>, NumericsError> {
        if loss.0 >= self.nodes.len() {
            return Err(NumericsError::MalformedTape { node: loss.0 });
        }
        if self.nodes[loss.0].value.len() != 1 {
            return Err(NumericsError::NotScalar {
                shape: self.nodes[loss.0].value.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.nodes[loss.0].value.shape().to_vec(), T::one()));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            for input in node.op.inputs() {
                if input.0 >= i {
                    return Err(NumericsError::MalformedTape { node: i });
                }
            }
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(g);
                continue;
            }
            self.backprop(node, &g, &mut grads);
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn slot<'g>(&self, grads: &'g mut [Option<Tensor<T>>], v: Var) -> Option<&'g mut Tensor<T>> {
        if !self.nodes[v.0].needs_grad {
            return None;
        }
        let shape = self.nodes[v.0].value.shape();
        Some(grads[v.0].get_or_insert_with(|| Tensor::zeros(shape.to_vec())))
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, f: impl Fn(usize) -> T) {
        if let Some(s) = self.slot(grads, v) {
            for (i, x) in s.data_mut().iter_mut().enumerate() {
                *x = *x + f(i);
            }
        }
    }

    fn backprop(&self, node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                if let Some(s) = self.slot(grads, *a) {
                    // dA = dC · Bᵀ
                    T::gemm(m, n, k, T::one(), gd, n as isize, 1, bv.data(), 1, n as isize, T::one(),
                        s.data_mut(), k as isize, 1);
                }
                if let Some(s) = self.slot(grads, *b) {
                    // dB = Aᵀ · dC
                    T::gemm(k, m, n, T::one(), av.data(), 1, k as isize, gd, n as isize, 1, T::one(),
                        s.data_mut(), n as isize, 1);
                }
            }
            Op::BatchMatMul { a, b, trans_b } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (batch, m, k) = (av.shape()[0], av.shape()[1], av.shape()[2]);
                let n = node.value.shape()[2];
                if let Some(s) = self.slot(grads, *a) {
                    for i in 0..batch {
                        let gi = &gd[i * m * n..(i + 1) * m * n];
                        let bi = &bv.data()[i * k * n..(i + 1) * k * n];
                        let si = &mut s.data_mut()[i * m * k..(i + 1) * m * k];
                        if *trans_b {
                            // B stored [n,k]: dA = dC · B
                            T::gemm(m, n, k, T::one(), gi, n as isize, 1, bi, k as isize, 1, T::one(),
                                si, k as isize, 1);
                        } else {
                            // dA = dC · Bᵀ
                            T::gemm(m, n, k, T::one(), gi, n as isize, 1, bi, 1, n as isize, T::one(),
                                si, k as isize, 1);
                        }
                    }
                }
                if let Some(s) = self.slot(grads, *b) {
                    for i in 0..batch {
                        let gi = &gd[i * m * n..(i + 1) * m * n];
                        let ai = &av.data()[i * m * k..(i + 1) * m * k];
                        let si = &mut s.data_mut()[i * k * n..(i + 1) * k * n];
                        if *trans_b {
                            // dB [n,k] = dCᵀ · A
                            T::gemm(n, m, k, T::one(), gi, 1, n as isize, ai, k as isize, 1, T::one(),
                                si, k as isize, 1);
                        } else {
                            // dB [k,n] = Aᵀ · dC
                            T::gemm(k, m, n, T::one(), ai, 1, k as isize, gi, n as isize, 1, T::one(),
                                si, n as isize, 1);
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, |i| gd[i]);
                self.accumulate(grads, *b, |i| gd[i]);
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate(grads, *a, |i| gd[i] * bv[i]);
                self.accumulate(grads, *b, |i| gd[i] * av[i]);
            }
            Op::AddBias(x, bias) => {
                self.accumulate(grads, *x, |i| gd[i]);
                if let Some(s) = self.slot(grads, *bias) {
                    let c = s.len();
                    for (i, &v) in gd.iter().enumerate() {
                        s.data_mut()[i % c] = s.data()[i % c] + v;
                    }
                }
            }
            Op::Scale(x, k) => self.accumulate(grads, *x, |i| gd[i] * *k),
            Op::Relu(x) => {
                let xv = self.value(*x).data();
                self.accumulate(grads, *x, |i| if xv[i] > T::zero() { gd[i] } else { T::zero() });
            }
            Op::Sum(x) => self.accumulate(grads, *x, |_| gd[0]),
            Op::LayerNorm { x, gain, bias, xhat, rstd } => {
                let d = node.value.cols();
                let rows = node.value.rows();
                let gv = self.value(*gain).data();
                if let Some(s) = self.slot(grads, *gain) {
                    for r in 0..rows {
                        for j in 0..d {
                            s.data_mut()[j] = s.data()[j] + gd[r * d + j] * xhat[r * d + j];
                        }
                    }
                }
                if let Some(s) = self.slot(grads, *bias) {
                    for r in 0..rows {
                        for j in 0..d {
                            s.data_mut()[j] = s.data()[j] + gd[r * d + j];
                        }
                    }
                }
                if let Some(s) = self.slot(grads, *x) {
                    let dn = T::of(d as f64);
                    for r in 0..rows {
                        let o = r * d;
                        let mut mean_dh = T::zero();
                        let mut mean_dh_h = T::zero();
                        for j in 0..d {
                            let dh = gd[o + j] * gv[j];
                            mean_dh = mean_dh + dh;
                            mean_dh_h = mean_dh_h + dh * xhat[o + j];
                        }
                        mean_dh = mean_dh / dn;
                        mean_dh_h = mean_dh_h / dn;
                        for j in 0..d {
                            let dh = gd[o + j] * gv[j];
                            let dx = rstd[r] * (dh - mean_dh - xhat[o + j] * mean_dh_h);
                            s.data_mut()[o + j] = s.data()[o + j] + dx;
                        }
                    }
                }
            }
            Op::Softmax(x) => {
                let y = node.value.data();
                let cols = node.value.cols();
                if let Some(s) = self.slot(grads, *x) {
                    for r in 0..node.value.rows() {
                        let o = r * cols;
                        let dot: T = (0..cols).map(|j| gd[o + j] * y[o + j]).sum();
                        for j in 0..cols {
                            s.data_mut()[o + j] = s.data()[o + j] + y[o + j] * (gd[o + j] - dot);
                        }
                    }
                }
            }
            Op::CrossEntropy { logits, probs, targets, include, count } => {
                let v = self.value(*logits).cols();
                let scale = gd[0] / T::of(*count as f64);
                if let Some(s) = self.slot(grads, *logits) {
                    for (r, (&t, &inc)) in targets.iter().zip(include).enumerate() {
                        if !inc {
                            continue;
                        }
                        for j in 0..v {
                            let onehot = if j == t as usize { T::one() } else { T::zero() };
                            let idx = r * v + j;
                            s.data_mut()[idx] = s.data()[idx] + (probs[idx] - onehot) * scale;
                        }
                    }
                }
            }
            Op::Gather { table, ids } => {
                if let Some(s) = self.slot(grads, *table) {
                    let d = s.cols();
                    for (r, &id) in ids.iter().enumerate() {
                        let dst = id as usize * d;
                        for j in 0..d {
                            s.data_mut()[dst + j] = s.data()[dst + j] + gd[r * d + j];
                        }
                    }
                }
            }
            Op::SplitHeads { x, batch, heads } => {
                let s3 = node.value.shape();
                let (t, dh) = (s3[1], s3[2]);
                let d = heads * dh;
                if let Some(s) = self.slot(grads, *x) {
                    for b in 0..*batch {
                        for h in 0..*heads {
                            for p in 0..t {
                                let from = ((b * heads + h) * t + p) * dh;
                                let dst = (b * t + p) * d + h * dh;
                                for j in 0..dh {
                                    s.data_mut()[dst + j] = s.data()[dst + j] + gd[from + j];
                                }
                            }
                        }
                    }
                }
            }
            Op::MergeHeads { x, batch } => {
                let xs = self.value(*x).shape();
                let (heads, t, dh) = (xs[0] / batch, xs[1], xs[2]);
                let d = heads * dh;
                if let Some(s) = self.slot(grads, *x) {
                    for b in 0..*batch {
                        for h in 0..heads {
                            for p in 0..t {
                                let dst = ((b * heads + h) * t + p) * dh;
                                let from = (b * t + p) * d + h * dh;
                                for j in 0..dh {
                                    s.data_mut()[dst + j] = s.data()[dst + j] + gd[from + j];
                                }
                            }
                        }
                    }
                }
            }
            Op::Dropout { x, mask } => self.accumulate(grads, *x, |i| gd[i] * mask[i]),
        }
    }
}
