use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NodeModel, ParamList};
use crate::graph::{Csr, NodeFeatures};
use crate::hop::HopTensor;
use crate::numerics::{Tape, Tensor, Var};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopMlpConfig {
    pub input_dim: usize,
    pub hops: usize,
    pub hidden_dim: usize,
    pub classes: usize,
}

/// Flattened hop rows → dense → ReLU → dense → ReLU → head.
#[derive(Clone, Debug, PartialEq)]
pub struct HopMlpModel {
    pub config: HopMlpConfig,
    pub params: ParamList,
}

impl HopMlpModel {
    pub fn init(config: HopMlpConfig, seed: u64) -> Result<Self> {
        let HopMlpConfig { input_dim, hops, hidden_dim, classes } = config;
        if input_dim == 0 || hidden_dim == 0 || classes == 0 {
            return Err(Error::InvalidArgument(format!("degenerate hop-MLP config {config:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let flat = (hops + 1) * input_dim;
        let mut p = ParamList::new();
        p.push_glorot("mlp.w1", flat, hidden_dim, &mut rng);
        p.push("mlp.b1", Tensor::zeros(&[hidden_dim]));
        p.push_glorot("mlp.w2", hidden_dim, hidden_dim, &mut rng);
        p.push("mlp.b2", Tensor::zeros(&[hidden_dim]));
        p.push_glorot("head.w", hidden_dim, classes, &mut rng);
        p.push("head.b", Tensor::zeros(&[classes]));
        Ok(HopMlpModel { config, params: p })
    }
}

impl NodeModel for HopMlpModel {
    fn params(&self) -> &ParamList {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamList {
        &mut self.params
    }

    fn forward_tape(&self, tape: &mut Tape, batch: &HopTensor) -> Result<(Vec<Var>, Var)> {
        let c = &self.config;
        if batch.hops() != c.hops || batch.dim() != c.input_dim {
            return Err(Error::shape(format!(
                "batch has K={} d0={}, hop-MLP expects K={} d0={}",
                batch.hops(),
                batch.dim(),
                c.hops,
                c.input_dim
            )));
        }
        let vars: Vec<Var> = self.params.tensors().iter().map(|t| tape.param(t.clone())).collect();
        let flat = (c.hops + 1) * c.input_dim;
        let x = tape.constant(Tensor::new(vec![batch.num_nodes(), flat], batch.data().to_vec())?);
        let mut h = x;
        for pair in vars[..4].chunks(2) {
            let z = tape.matmul(h, pair[0])?;
            let z = tape.add_bias(z, pair[1])?;
            h = tape.relu(z);
        }
        let z = tape.matmul(h, vars[4])?;
        let y = tape.add_bias(z, vars[5])?;
        Ok((vars, y))
    }

    fn output_dim(&self) -> usize {
        self.config.classes
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GcnConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    pub classes: usize,
}

impl GcnConfig {
    pub fn new(input_dim: usize, hidden_dim: usize, classes: usize) -> Self {
        GcnConfig { input_dim, hidden_dim, layers: 5, classes }
    }
}

/// Message-passing baseline: `x⁽ˡ⁾ = ReLU(Â x⁽ˡ⁻¹⁾ W⁽ˡ⁾ + b⁽ˡ⁾)`, then a
/// linear head. Unlike the hop models it needs the whole graph per step.
#[derive(Clone, Debug, PartialEq)]
pub struct GcnModel {
    pub config: GcnConfig,
    pub params: ParamList,
}

impl GcnModel {
    pub fn init(config: GcnConfig, seed: u64) -> Result<Self> {
        if config.input_dim == 0 || config.hidden_dim == 0 || config.classes == 0 {
            return Err(Error::InvalidArgument(format!("degenerate GCN config {config:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamList::new();
        for l in 0..config.layers {
            let fan_in = if l == 0 { config.input_dim } else { config.hidden_dim };
            p.push_glorot(format!("gcn{l}.w"), fan_in, config.hidden_dim, &mut rng);
            p.push(format!("gcn{l}.b"), Tensor::zeros(&[config.hidden_dim]));
        }
        let head_in = if config.layers == 0 { config.input_dim } else { config.hidden_dim };
        p.push_glorot("head.w", head_in, config.classes, &mut rng);
        p.push("head.b", Tensor::zeros(&[config.classes]));
        Ok(GcnModel { config, params: p })
    }

    /// Records the full-graph forward pass; returns parameter variables and
    /// the `n × classes` logits.
    pub fn forward_tape(&self, tape: &mut Tape, adj: &Arc<Csr>, x: &NodeFeatures) -> Result<(Vec<Var>, Var)> {
        if x.dim() != self.config.input_dim || adj.n_rows() != x.num_nodes() {
            return Err(Error::shape(format!(
                "GCN expects d0={} and {}-node adjacency, got d0={} for {} nodes",
                self.config.input_dim,
                adj.n_rows(),
                x.dim(),
                x.num_nodes()
            )));
        }
        let vars: Vec<Var> = self.params.tensors().iter().map(|t| tape.param(t.clone())).collect();
        let mut h = tape.constant(Tensor::new(vec![x.num_nodes(), x.dim()], x.data().to_vec())?);
        for l in 0..self.config.layers {
            let agg = tape.spmm(Arc::clone(adj), h)?;
            let z = tape.matmul(agg, vars[2 * l])?;
            let z = tape.add_bias(z, vars[2 * l + 1])?;
            h = tape.relu(z);
        }
        let n = vars.len();
        let z = tape.matmul(h, vars[n - 2])?;
        let y = tape.add_bias(z, vars[n - 1])?;
        Ok((vars, y))
    }

    pub fn predict(&self, adj: &Arc<Csr>, x: &NodeFeatures) -> Result<Tensor> {
        let mut tape = Tape::new();
        let (_, y) = self.forward_tape(&mut tape, adj, x)?;
        Ok(tape.value(y).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize_adjacency, AdjacencyMode, CircuitGraph, Edge, NodeKind};

    #[test]
    fn hop_mlp_zero_input_is_bias_only() {
        let mut m = HopMlpModel::init(HopMlpConfig { input_dim: 2, hops: 3, hidden_dim: 5, classes: 4 }, 1).unwrap();
        m.params.get_mut("head.b").unwrap().data_mut().copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        let out = m.predict(&HopTensor::new(2, 3, 2, vec![0.0; 16]).unwrap()).unwrap();
        assert_eq!(out.data(), &[1.0, 2.0, 3.0, 4.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn gcn_path_swap() {
        let g = CircuitGraph::new(vec![NodeKind::Plain; 2], vec![Edge::new(0, 1, false)]).unwrap();
        let adj = Arc::new(normalize_adjacency(&g, AdjacencyMode::SymmetricUndirected).csr().clone());
        let mut m = GcnModel::init(GcnConfig { input_dim: 2, hidden_dim: 2, layers: 1, classes: 2 }, 0).unwrap();
        m.params.get_mut("gcn0.w").unwrap().data_mut().copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        m.params.get_mut("head.w").unwrap().data_mut().copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        let x = NodeFeatures::new(vec![3.0, -1.0, 2.0, 5.0], 2, 2, vec!["a".into(), "b".into()]);
        let out = m.predict(&adj, &x).unwrap();
        assert_eq!(out.data(), &[2.0, 5.0, 3.0, 0.0]);
    }

    #[test]
    fn gcn_isolated_node_uses_biases_only() {
        let g = CircuitGraph::new(vec![NodeKind::Plain], vec![]).unwrap();
        let adj = Arc::new(normalize_adjacency(&g, AdjacencyMode::SymmetricUndirected).csr().clone());
        let m = GcnModel::init(GcnConfig::new(3, 4, 4), 2).unwrap();
        let a = m.predict(&adj, &NodeFeatures::new(vec![1.0, 2.0, 3.0], 1, 3, vec![String::new(); 3])).unwrap();
        let b = m.predict(&adj, &NodeFeatures::new(vec![-7.0, 0.5, 9.0], 1, 3, vec![String::new(); 3])).unwrap();
        assert_eq!(a, b);
    }
}
