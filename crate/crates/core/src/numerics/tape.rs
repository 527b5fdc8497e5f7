//! Reverse-mode gradient tape.
//!
//! Values are computed eagerly when an operation is recorded. `backward`
//! walks the tape once in reverse and produces a gradient for every node that
//! depends on a parameter leaf.

use std::sync::Arc;

use super::kernels::{self, dot, layer_norm_parts};
use super::Tensor;
use crate::graph::Csr;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Relu(Var),
    Scale(Var, f64),
    SoftmaxRows(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    BlockMatMulNt(Var, Var, usize),
    BlockMatMul(Var, Var, usize),
    Reshape(Var),
    ConcatRows(Var, Var),
    SpMM(Arc<Csr>, Var),
    HopReadout { h: Var, alpha: Var, block: usize, scores: Vec<f64> },
    MeanRows(Var),
    SumAll(Var),
    CrossEntropy { logits: Var, probs: Vec<f64>, targets: Vec<usize>, weights: Vec<f64> },
    SquaredRelError { pred: Var, targets: Vec<f64> },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, or zeros shaped like `like` when `v` did not reach the loss.
    pub fn take_or_zeros(&mut self, v: Var, like: &Tensor) -> Tensor {
        self.grads.get_mut(v.0).and_then(|g| g.take()).unwrap_or_else(|| Tensor::zeros(like.shape()))
    }
}

fn dims(t: &Tensor) -> (usize, usize) {
    t.dims2()
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, value: Tensor, op: Op, parents: &[Var]) -> Var {
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    /// A constant input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad: false });
        Var(self.nodes.len() - 1)
    }

    /// A trainable input.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad: true });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = kernels::matmul(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b), &[a, b]))
    }

    /// Adds the row vector `bias` to every row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (_, c) = dims(self.value(x));
        let b = self.value(bias);
        if b.len() != c {
            return Err(Error::shape(format!("add_bias: width {c}, bias {}", b.len())));
        }
        let mut out = self.value(x).clone();
        for row in out.data_mut().chunks_mut(c) {
            for (o, bv) in row.iter_mut().zip(b.data()) {
                *o += bv;
            }
        }
        Ok(self.push(out, Op::AddBias(x, bias), &[x, bias]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = kernels::add(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::Add(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = kernels::mul(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::Mul(a, b), &[a, b]))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = kernels::relu(self.value(x));
        self.push(v, Op::Relu(x), &[x])
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let v = kernels::scale(self.value(x), s);
        self.push(v, Op::Scale(x, s), &[x])
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let v = kernels::softmax_rows(self.value(x));
        self.push(v, Op::SoftmaxRows(x), &[x])
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let out = kernels::layer_norm(self.value(x), self.value(gamma), self.value(beta), eps)?;
        let (xhat, inv_std) = layer_norm_parts(self.value(x), eps);
        Ok(self.push(out, Op::LayerNorm { x, gamma, beta, xhat, inv_std }, &[x, gamma, beta]))
    }

    pub fn block_matmul_nt(&mut self, a: Var, b: Var, block: usize) -> Result<Var> {
        let v = kernels::block_matmul_nt(self.value(a), self.value(b), block)?;
        Ok(self.push(v, Op::BlockMatMulNt(a, b, block), &[a, b]))
    }

    pub fn block_matmul(&mut self, s: Var, v: Var, block: usize) -> Result<Var> {
        let out = kernels::block_matmul(self.value(s), self.value(v), block)?;
        Ok(self.push(out, Op::BlockMatMul(s, v, block), &[s, v]))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let v = self.value(x).clone().reshape(shape)?;
        Ok(self.push(v, Op::Reshape(x), &[x]))
    }

    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = kernels::concat_rows(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::ConcatRows(a, b), &[a, b]))
    }

    /// `adj · x` for a constant sparse matrix.
    pub fn spmm(&mut self, adj: Arc<Csr>, x: Var) -> Result<Var> {
        let (r, c) = dims(self.value(x));
        if adj.n_cols() != r {
            return Err(Error::shape(format!("spmm: {}x{} · {r}x{c}", adj.n_rows(), adj.n_cols())));
        }
        let v = Tensor::new(vec![adj.n_rows(), c], adj.spmm(self.value(x).data(), c))?;
        Ok(self.push(v, Op::SpMM(adj, x), &[x]))
    }

    /// Attentive hop readout over stacked `(B·(K+1))×d` hop rows and
    /// `alpha` of length `2d`:
    ///
    /// `c_k = softmax_{k=1..K}(αᵀ(h₀ ‖ h_k))`, `y = h₀ + Σ_k c_k h_k`.
    ///
    /// Returns `y` (`B×d`); the scores are available from
    /// [`Tape::readout_scores`]. With `K = 0` the readout is `y = h₀` and
    /// there are no scores.
    pub fn hop_readout(&mut self, h: Var, alpha: Var, block: usize) -> Result<Var> {
        let hv = self.value(h);
        let (rows, d) = dims(hv);
        if block == 0 || rows % block != 0 {
            return Err(Error::shape(format!("hop_readout: {rows} rows in blocks of {block}")));
        }
        if self.value(alpha).len() != 2 * d {
            return Err(Error::shape(format!("hop_readout: alpha has {} entries, need {}", self.value(alpha).len(), 2 * d)));
        }
        let a = self.value(alpha).data();
        let (a0, a1) = a.split_at(d);
        let nb = rows / block;
        let k = block - 1;
        let hd = hv.data();
        let mut y = vec![0.0; nb * d];
        let mut scores = vec![0.0; nb * k];
        for b in 0..nb {
            let base = b * block;
            let h0 = &hd[base * d..(base + 1) * d];
            let dst = &mut y[b * d..(b + 1) * d];
            dst.copy_from_slice(h0);
            if k == 0 {
                continue;
            }
            let head = dot(a0, h0);
            let c = &mut scores[b * k..(b + 1) * k];
            for (j, cj) in c.iter_mut().enumerate() {
                *cj = head + dot(a1, &hd[(base + 1 + j) * d..(base + 2 + j) * d]);
            }
            let max = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for cj in c.iter_mut() {
                *cj = (*cj - max).exp();
                total += *cj;
            }
            for cj in c.iter_mut() {
                *cj /= total;
            }
            for (j, &cj) in c.iter().enumerate() {
                for (o, &x) in dst.iter_mut().zip(&hd[(base + 1 + j) * d..(base + 2 + j) * d]) {
                    *o += cj * x;
                }
            }
        }
        let v = Tensor::new(vec![nb, d], y)?;
        Ok(self.push(v, Op::HopReadout { h, alpha, block, scores }, &[h, alpha]))
    }

    /// Readout scores recorded by [`Tape::hop_readout`], `B×K` row-major.
    pub fn readout_scores(&self, v: Var) -> Option<&[f64]> {
        match &self.nodes[v.0].op {
            Op::HopReadout { scores, .. } => Some(scores),
            _ => None,
        }
    }

    /// Column means, `1×d`.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let (r, c) = dims(self.value(x));
        let mut out = vec![0.0; c];
        for row in self.value(x).data().chunks(c) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        for o in &mut out {
            *o /= r as f64;
        }
        let v = Tensor::new(vec![1, c], out).expect("mean shape");
        self.push(v, Op::MeanRows(x), &[x])
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        self.push(Tensor::filled(&[1], s), Op::SumAll(x), &[x])
    }

    /// Weighted sum over rows of `−log softmax(logits)[target]`. `weights`
    /// holds one weight per class; divide by the total weight for a mean.
    pub fn cross_entropy_sum(&mut self, logits: Var, targets: &[usize], weights: &[f64]) -> Result<Var> {
        let lv = self.value(logits);
        let (r, c) = dims(lv);
        if targets.len() != r {
            return Err(Error::shape(format!("cross_entropy: {} targets for {r} rows", targets.len())));
        }
        if weights.len() != c {
            return Err(Error::shape(format!("cross_entropy: {} class weights for {c} classes", weights.len())));
        }
        if let Some(t) = targets.iter().find(|&&t| t >= c) {
            return Err(Error::InvalidArgument(format!("class {t} outside 0..{c}")));
        }
        let probs = kernels::softmax_rows(lv).into_data();
        let mut loss = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            let row = &lv.data()[i * c..(i + 1) * c];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += weights[t] * (lse - row[t]);
        }
        let op = Op::CrossEntropy { logits, probs, targets: targets.to_vec(), weights: weights.to_vec() };
        Ok(self.push(Tensor::filled(&[1], loss), op, &[logits]))
    }

    /// Sum over rows of `((pred − target) / target)²` for a `B×1` prediction.
    pub fn squared_rel_error_sum(&mut self, pred: Var, targets: &[f64]) -> Result<Var> {
        let p = self.value(pred);
        if p.len() != targets.len() {
            return Err(Error::shape(format!("{} predictions for {} targets", p.len(), targets.len())));
        }
        if targets.iter().any(|&t| t == 0.0) {
            return Err(Error::InvalidArgument("relative error needs nonzero targets".into()));
        }
        let loss = p.data().iter().zip(targets).map(|(y, t)| ((y - t) / t).powi(2)).sum();
        Ok(self.push(Tensor::filled(&[1], loss), Op::SquaredRelError { pred, targets: targets.to_vec() }, &[pred]))
    }

    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::shape(format!("loss must be scalar, got shape {:?}", self.value(loss).shape())));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::filled(self.value(loss).shape(), 1.0));
        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            self.propagate(node, &g, &mut grads)?;
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let mut acc = |v: Var, t: Tensor| {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&t),
                slot @ None => *slot = Some(t),
            }
        };
        match &node.op {
            Op::Leaf => {}
            &Op::MatMul(a, b) => {
                if self.wants(a) {
                    acc(a, kernels::matmul_nt(g, self.value(b))?.reshape(self.value(a).shape())?);
                }
                if self.wants(b) {
                    acc(b, kernels::matmul_tn(self.value(a), g)?.reshape(self.value(b).shape())?);
                }
            }
            &Op::AddBias(x, bias) => {
                if self.wants(x) {
                    acc(x, g.clone());
                }
                if self.wants(bias) {
                    let c = self.value(bias).len();
                    let mut gb = vec![0.0; c];
                    for row in g.data().chunks(c) {
                        for (o, v) in gb.iter_mut().zip(row) {
                            *o += v;
                        }
                    }
                    acc(bias, Tensor::new(self.value(bias).shape().to_vec(), gb)?);
                }
            }
            &Op::Add(a, b) => {
                if self.wants(a) {
                    acc(a, g.clone());
                }
                if self.wants(b) {
                    acc(b, g.clone());
                }
            }
            &Op::Mul(a, b) => {
                if self.wants(a) {
                    acc(a, kernels::mul(g, self.value(b))?);
                }
                if self.wants(b) {
                    acc(b, kernels::mul(g, self.value(a))?);
                }
            }
            &Op::Relu(x) => {
                let mut gx = g.clone();
                for (o, &xv) in gx.data_mut().iter_mut().zip(self.value(x).data()) {
                    if xv <= 0.0 {
                        *o = 0.0;
                    }
                }
                acc(x, gx);
            }
            &Op::Scale(x, s) => acc(x, kernels::scale(g, s)),
            &Op::SoftmaxRows(x) => {
                let y = &node.value;
                let (_, c) = dims(y);
                let mut gx = g.clone();
                for (gr, yr) in gx.data_mut().chunks_mut(c).zip(y.data().chunks(c)) {
                    let inner = dot(gr, yr);
                    for (gv, &yv) in gr.iter_mut().zip(yr) {
                        *gv = yv * (*gv - inner);
                    }
                }
                acc(x, gx);
            }
            Op::LayerNorm { x, gamma, beta, xhat, inv_std } => {
                let (x, gamma, beta) = (*x, *gamma, *beta);
                let d = self.value(gamma).len();
                let gam = self.value(gamma).data();
                if self.wants(gamma) || self.wants(beta) {
                    let mut gg = vec![0.0; d];
                    let mut gbeta = vec![0.0; d];
                    for (gr, xr) in g.data().chunks(d).zip(xhat.chunks(d)) {
                        for j in 0..d {
                            gg[j] += gr[j] * xr[j];
                            gbeta[j] += gr[j];
                        }
                    }
                    if self.wants(gamma) {
                        acc(gamma, Tensor::new(self.value(gamma).shape().to_vec(), gg)?);
                    }
                    if self.wants(beta) {
                        acc(beta, Tensor::new(self.value(beta).shape().to_vec(), gbeta)?);
                    }
                }
                if self.wants(x) {
                    let mut gx = vec![0.0; g.len()];
                    let n = d as f64;
                    for (i, ((gr, xr), out)) in g.data().chunks(d).zip(xhat.chunks(d)).zip(gx.chunks_mut(d)).enumerate() {
                        let mut mean_gh = 0.0;
                        let mut mean_ghx = 0.0;
                        for j in 0..d {
                            let gh = gr[j] * gam[j];
                            mean_gh += gh;
                            mean_ghx += gh * xr[j];
                        }
                        mean_gh /= n;
                        mean_ghx /= n;
                        for j in 0..d {
                            out[j] = inv_std[i] * (gr[j] * gam[j] - mean_gh - xr[j] * mean_ghx);
                        }
                    }
                    acc(x, Tensor::new(self.value(x).shape().to_vec(), gx)?);
                }
            }
            &Op::BlockMatMulNt(a, b, block) => {
                // out = a bᵀ per block: da = g b, db = gᵀ a.
                if self.wants(a) {
                    acc(a, kernels::block_matmul(g, self.value(b), block)?);
                }
                if self.wants(b) {
                    acc(b, kernels::block_matmul(&block_transpose(g, block), self.value(a), block)?);
                }
            }
            &Op::BlockMatMul(s, v, block) => {
                // out = s v per block: ds = g vᵀ, dv = sᵀ g.
                if self.wants(s) {
                    acc(s, kernels::block_matmul_nt(g, self.value(v), block)?);
                }
                if self.wants(v) {
                    acc(v, kernels::block_matmul(&block_transpose(self.value(s), block), g, block)?);
                }
            }
            &Op::Reshape(x) => acc(x, g.clone().reshape(self.value(x).shape())?),
            &Op::ConcatRows(a, b) => {
                let (r, ca) = dims(self.value(a));
                let (_, cb) = dims(self.value(b));
                let mut ga = Vec::with_capacity(r * ca);
                let mut gb = Vec::with_capacity(r * cb);
                for row in g.data().chunks(ca + cb) {
                    ga.extend_from_slice(&row[..ca]);
                    gb.extend_from_slice(&row[ca..]);
                }
                if self.wants(a) {
                    acc(a, Tensor::new(self.value(a).shape().to_vec(), ga)?);
                }
                if self.wants(b) {
                    acc(b, Tensor::new(self.value(b).shape().to_vec(), gb)?);
                }
            }
            Op::SpMM(adj, x) => {
                let (_, c) = dims(g);
                acc(*x, Tensor::new(self.value(*x).shape().to_vec(), adj.spmm_transposed(g.data(), c))?);
            }
            Op::HopReadout { h, alpha, block, scores } => {
                let (h, alpha, block) = (*h, *alpha, *block);
                let hv = self.value(h).data();
                let a = self.value(alpha).data();
                let d = a.len() / 2;
                let (a0, a1) = a.split_at(d);
                let k = block - 1;
                let nb = g.len() / d;
                let mut gh = vec![0.0; hv.len()];
                let mut ga = vec![0.0; 2 * d];
                for b in 0..nb {
                    let base = b * block;
                    let gy = &g.data()[b * d..(b + 1) * d];
                    for (o, v) in gh[base * d..(base + 1) * d].iter_mut().zip(gy) {
                        *o += v;
                    }
                    if k == 0 {
                        continue;
                    }
                    let c = &scores[b * k..(b + 1) * k];
                    let dc: Vec<f64> = (0..k).map(|j| dot(gy, &hv[(base + 1 + j) * d..(base + 2 + j) * d])).collect();
                    let inner: f64 = c.iter().zip(&dc).map(|(x, y)| x * y).sum();
                    let de: Vec<f64> = c.iter().zip(&dc).map(|(cj, dcj)| cj * (dcj - inner)).collect();
                    let de_total: f64 = de.iter().sum();
                    let h0 = &hv[base * d..(base + 1) * d];
                    for t in 0..d {
                        ga[t] += de_total * h0[t];
                        gh[base * d + t] += de_total * a0[t];
                    }
                    for j in 0..k {
                        let row = base + 1 + j;
                        let hk = &hv[row * d..(row + 1) * d];
                        for t in 0..d {
                            ga[d + t] += de[j] * hk[t];
                            gh[row * d + t] += c[j] * gy[t] + de[j] * a1[t];
                        }
                    }
                }
                if self.wants(h) {
                    acc(h, Tensor::new(self.value(h).shape().to_vec(), gh)?);
                }
                if self.wants(alpha) {
                    acc(alpha, Tensor::new(self.value(alpha).shape().to_vec(), ga)?);
                }
            }
            &Op::MeanRows(x) => {
                let (r, c) = dims(self.value(x));
                let mut gx = Vec::with_capacity(r * c);
                for _ in 0..r {
                    gx.extend(g.data().iter().map(|v| v / r as f64));
                }
                acc(x, Tensor::new(self.value(x).shape().to_vec(), gx)?);
            }
            &Op::SumAll(x) => acc(x, Tensor::filled(self.value(x).shape(), g.data()[0])),
            Op::CrossEntropy { logits, probs, targets, weights } => {
                let c = weights.len();
                let up = g.data()[0];
                let mut gl = probs.clone();
                for (i, &t) in targets.iter().enumerate() {
                    let w = weights[t] * up;
                    let row = &mut gl[i * c..(i + 1) * c];
                    row[t] -= 1.0;
                    for v in row.iter_mut() {
                        *v *= w;
                    }
                }
                acc(*logits, Tensor::new(self.value(*logits).shape().to_vec(), gl)?);
            }
            Op::SquaredRelError { pred, targets } => {
                let up = g.data()[0];
                let gp = self
                    .value(*pred)
                    .data()
                    .iter()
                    .zip(targets)
                    .map(|(y, t)| up * 2.0 * (y - t) / (t * t))
                    .collect();
                acc(*pred, Tensor::new(self.value(*pred).shape().to_vec(), gp)?);
            }
        }
        Ok(())
    }
}

/// Transposes each `r×r` block of a `(B·r)×r` matrix.
fn block_transpose(s: &Tensor, block: usize) -> Tensor {
    let mut out = s.clone();
    let sd = s.data();
    let od = out.data_mut();
    for blk in 0..sd.len() / (block * block) {
        let base = blk * block * block;
        for i in 0..block {
            for j in 0..block {
                od[base + j * block + i] = sd[base + i * block + j];
            }
        }
    }
    out
}
