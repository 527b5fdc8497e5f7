//! Gated self-attention over hop rows.
//!
//! For one node with hop rows `H` ((K+1) × d after the input projection):
//!
//! ```text
//! Q = H W_Q   Kₘ = H W_K   U = H W_U   V = H W_V
//! S = softmax_rows(Q Kₘᵀ)
//! Ĥ = ReLU(LayerNorm(U ⊙ (S V)))
//! c_k = softmax_{k=1..K}(αᵀ(Ĥ₀ ‖ Ĥ_k))
//! y = Ĥ₀ + Σ_{k=1..K} c_k Ĥ_k
//! ```
//!
//! A batch is processed as one stacked `(B·(K+1)) × d` matrix; the attention
//! products work block by block, so no value ever mixes two nodes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NodeModel, ParamList};
use crate::hop::HopTensor;
use crate::numerics::{Tape, Tensor, Var, LAYER_NORM_EPS};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    Classifier { classes: usize },
    Regressor,
}

impl Head {
    pub fn outputs(self) -> usize {
        match self {
            Head::Classifier { classes } => classes,
            Head::Regressor => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HogaConfig {
    /// Width of the precomputed hop features (d₀).
    pub input_dim: usize,
    /// Hidden width d.
    pub hidden_dim: usize,
    /// Number of hops K; each node has K + 1 rows.
    pub hops: usize,
    /// Stacked gated self-attention layers.
    pub layers: usize,
    pub head: Head,
    /// Divide attention logits by √d.
    pub scaled_attention: bool,
    /// Ablation switches; the default model uses both.
    pub layer_norm: bool,
    pub relu: bool,
}

impl HogaConfig {
    pub fn new(input_dim: usize, hidden_dim: usize, hops: usize, head: Head) -> Self {
        HogaConfig {
            input_dim,
            hidden_dim,
            hops,
            layers: 1,
            head,
            scaled_attention: false,
            layer_norm: true,
            relu: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.layers == 0 || self.head.outputs() == 0 {
            return Err(Error::InvalidArgument(format!("degenerate HOGA config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HogaModel {
    pub config: HogaConfig,
    pub params: ParamList,
}

/// Per-node readout scores and, optionally, the self-attention matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionReport {
    pub hops: usize,
    /// `B × K` row-major readout scores `c_1..c_K`.
    pub scores: Vec<f64>,
    /// Per layer, `B × (K+1) × (K+1)` row-major attention matrices.
    pub attention: Vec<Vec<f64>>,
}

impl AttentionReport {
    pub fn num_nodes(&self) -> usize {
        self.scores.len().checked_div(self.hops).unwrap_or(0)
    }

    pub fn node_scores(&self, node: usize) -> &[f64] {
        &self.scores[node * self.hops..(node + 1) * self.hops]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HogaOutput {
    /// `B × outputs` logits (classifier) or predictions (regressor).
    pub outputs: Tensor,
    pub report: AttentionReport,
}

/// Stacked `(B·(K+1)) × d` input and output of one attention layer, with its
/// `(B·(K+1)) × (K+1)` attention matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerTrace {
    pub input: Tensor,
    pub attention: Tensor,
    pub output: Tensor,
}

/// Variables of one forward pass.
pub(crate) struct HogaVars {
    pub params: Vec<Var>,
    pub embedding: Var,
    pub readout: Var,
    pub attention: Vec<Var>,
    pub layer_io: Vec<(Var, Var)>,
}

impl HogaModel {
    /// Glorot-uniform weights, unit LayerNorm scale, zero LayerNorm bias,
    /// zero readout vector, zero head bias. Deterministic per seed.
    pub fn init(config: HogaConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.hidden_dim;
        let mut p = ParamList::new();
        p.push_glorot("w_in", config.input_dim, d, &mut rng);
        for l in 0..config.layers {
            for w in ["w_q", "w_k", "w_u", "w_v"] {
                p.push_glorot(format!("layer{l}.{w}"), d, d, &mut rng);
            }
            p.push(format!("layer{l}.ln_scale"), Tensor::filled(&[d], 1.0));
            p.push(format!("layer{l}.ln_bias"), Tensor::zeros(&[d]));
        }
        p.push("alpha", Tensor::zeros(&[2 * d]));
        let c = config.head.outputs();
        p.push_glorot("head.w", d, c, &mut rng);
        p.push("head.b", Tensor::zeros(&[c]));
        Ok(HogaModel { config, params: p })
    }

    fn check_batch(&self, batch: &HopTensor) -> Result<()> {
        if batch.dim() != self.config.input_dim || batch.hops() != self.config.hops {
            return Err(Error::shape(format!(
                "batch has K={} d0={}, model expects K={} d0={}",
                batch.hops(),
                batch.dim(),
                self.config.hops,
                self.config.input_dim
            )));
        }
        Ok(())
    }

    /// Records the embedding part (everything before the head).
    pub(crate) fn embed_tape(&self, tape: &mut Tape, batch: &HopTensor) -> Result<HogaVars> {
        self.check_batch(batch)?;
        let cfg = &self.config;
        let block = cfg.hops + 1;
        let rows = batch.num_nodes() * block;
        let vars: Vec<Var> = self.params.tensors().iter().map(|t| tape.param(t.clone())).collect();
        let x = tape.constant(Tensor::new(vec![rows, cfg.input_dim], batch.data().to_vec())?);
        let mut h = tape.matmul(x, vars[0])?;
        let mut attention = Vec::with_capacity(cfg.layers);
        let mut layer_io = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let input = h;
            let base = 1 + 6 * l;
            let q = tape.matmul(h, vars[base])?;
            let k = tape.matmul(h, vars[base + 1])?;
            let u = tape.matmul(h, vars[base + 2])?;
            let v = tape.matmul(h, vars[base + 3])?;
            let mut logits = tape.block_matmul_nt(q, k, block)?;
            if cfg.scaled_attention {
                logits = tape.scale(logits, 1.0 / (cfg.hidden_dim as f64).sqrt());
            }
            let s = tape.softmax_rows(logits);
            attention.push(s);
            let sv = tape.block_matmul(s, v, block)?;
            let mut out = tape.mul(u, sv)?;
            if cfg.layer_norm {
                out = tape.layer_norm(out, vars[base + 4], vars[base + 5], LAYER_NORM_EPS)?;
            }
            if cfg.relu {
                out = tape.relu(out);
            }
            layer_io.push((input, out));
            h = out;
        }
        let alpha = vars[1 + 6 * cfg.layers];
        let readout = tape.hop_readout(h, alpha, block)?;
        Ok(HogaVars { params: vars, embedding: readout, readout, attention, layer_io })
    }

    pub(crate) fn head_tape(&self, tape: &mut Tape, vars: &[Var], embedding: Var) -> Result<Var> {
        let n = vars.len();
        let z = tape.matmul(embedding, vars[n - 2])?;
        tape.add_bias(z, vars[n - 1])
    }

    /// Inference with the attention report. Set `with_attention` to keep the
    /// full self-attention matrices.
    pub fn forward(&self, batch: &HopTensor, with_attention: bool) -> Result<HogaOutput> {
        const CHUNK: usize = 1024;
        let n = batch.num_nodes();
        let c = self.config.head.outputs();
        let mut outputs = Vec::with_capacity(n * c);
        let mut scores = Vec::with_capacity(n * self.config.hops);
        let mut attention = vec![Vec::new(); if with_attention { self.config.layers } else { 0 }];
        let ids: Vec<usize> = (0..n).collect();
        for chunk in ids.chunks(CHUNK.max(1)) {
            let part = batch.shard(chunk)?;
            let mut tape = Tape::new();
            let vars = self.embed_tape(&mut tape, &part)?;
            let y = self.head_tape(&mut tape, &vars.params, vars.embedding)?;
            outputs.extend_from_slice(tape.value(y).data());
            scores.extend_from_slice(tape.readout_scores(vars.readout).expect("readout node"));
            for (acc, s) in attention.iter_mut().zip(&vars.attention) {
                acc.extend_from_slice(tape.value(*s).data());
            }
        }
        Ok(HogaOutput {
            outputs: Tensor::new(vec![n, c], outputs)?,
            report: AttentionReport { hops: self.config.hops, scores, attention },
        })
    }
}

impl HogaModel {
    /// Intermediate values of every attention layer for `batch`.
    pub fn trace(&self, batch: &HopTensor) -> Result<Vec<LayerTrace>> {
        let mut tape = Tape::new();
        let vars = self.embed_tape(&mut tape, batch)?;
        Ok(vars
            .layer_io
            .iter()
            .zip(&vars.attention)
            .map(|(&(i, o), &s)| LayerTrace {
                input: tape.value(i).clone(),
                attention: tape.value(s).clone(),
                output: tape.value(o).clone(),
            })
            .collect())
    }
}

impl NodeModel for HogaModel {
    fn params(&self) -> &ParamList {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamList {
        &mut self.params
    }

    fn forward_tape(&self, tape: &mut Tape, batch: &HopTensor) -> Result<(Vec<Var>, Var)> {
        let vars = self.embed_tape(tape, batch)?;
        let y = self.head_tape(tape, &vars.params, vars.embedding)?;
        Ok((vars.params, y))
    }

    fn output_dim(&self) -> usize {
        self.config.head.outputs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(hops: usize, d: usize, seed: u64) -> HogaModel {
        HogaModel::init(HogaConfig::new(3, d, hops, Head::Classifier { classes: 4 }), seed).unwrap()
    }

    fn random_hops(n: usize, hops: usize, seed: u64) -> HopTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = Tensor::uniform(&[n * (hops + 1), 3], 1.0, &mut rng);
        HopTensor::new(n, hops, 3, t.into_data()).unwrap()
    }

    #[test]
    fn init_is_deterministic_and_alpha_zero() {
        let a = model(3, 8, 1);
        assert_eq!(a, model(3, 8, 1));
        assert_ne!(a.params, model(3, 8, 2).params);
        assert!(a.params.get("alpha").unwrap().data().iter().all(|&v| v == 0.0));
        assert_eq!(a.params.get("layer0.ln_scale").unwrap().data(), &[1.0; 8]);
        let out = a.forward(&random_hops(4, 3, 9), false).unwrap();
        for i in 0..4 {
            for &c in out.report.node_scores(i) {
                assert!((c - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn glorot_variance() {
        let m = HogaModel::init(HogaConfig::new(7, 256, 2, Head::Classifier { classes: 4 }), 3).unwrap();
        let w = m.params.get("layer0.w_q").unwrap();
        let mean = w.sum() / w.len() as f64;
        let var = w.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64;
        let expected = 2.0 / 512.0;
        assert!((var - expected).abs() / expected < 0.2, "variance {var} vs {expected}");
    }

    #[test]
    fn batch_independence_bitwise() {
        let m = model(4, 16, 5);
        let hops = random_hops(100, 4, 6);
        let all = m.forward(&hops, false).unwrap();
        let single = m.forward(&hops.shard(&[37]).unwrap(), false).unwrap();
        assert_eq!(single.outputs.row(0), all.outputs.row(37));
        assert_eq!(single.report.node_scores(0), all.report.node_scores(37));
    }

    #[test]
    fn zero_hops_give_bias_only_output() {
        let mut m = model(2, 8, 7);
        m.params.get_mut("head.b").unwrap().data_mut().copy_from_slice(&[0.1, -0.2, 0.3, 0.0]);
        let zeros = HopTensor::new(3, 2, 3, vec![0.0; 3 * 3 * 3]).unwrap();
        let out = m.forward(&zeros, false).unwrap();
        for i in 0..3 {
            assert_eq!(out.outputs.row(i), &[0.1, -0.2, 0.3, 0.0]);
        }
    }

    #[test]
    fn k0_has_no_scores() {
        let m = model(0, 8, 8);
        let out = m.forward(&random_hops(2, 0, 1), true).unwrap();
        assert!(out.report.scores.is_empty());
        assert_eq!(out.report.attention[0], vec![1.0, 1.0]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let m = model(2, 8, 1);
        assert!(m.forward(&random_hops(2, 3, 1), false).is_err());
    }
}
