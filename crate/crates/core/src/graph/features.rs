//! Initial node features: one-hot node kind followed by a one-hot count of
//! complemented fan-in edges (clamped to 2).

use super::{CircuitGraph, NodeKind};

pub const FEATURE_SCHEMA: [&str; 7] = [
    "kind_pi",
    "kind_po",
    "kind_and",
    "kind_plain",
    "inv_fanin_0",
    "inv_fanin_1",
    "inv_fanin_2",
];

/// Row-major `n × d0` feature matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeFeatures {
    data: Vec<f64>,
    num_nodes: usize,
    dim: usize,
    schema: Vec<String>,
}

impl NodeFeatures {
    pub fn new(data: Vec<f64>, num_nodes: usize, dim: usize, schema: Vec<String>) -> Self {
        assert_eq!(data.len(), num_nodes * dim, "feature matrix size");
        assert_eq!(schema.len(), dim, "schema width");
        NodeFeatures { data, num_nodes, dim, schema }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

pub fn build_node_features(g: &CircuitGraph) -> NodeFeatures {
    let d = FEATURE_SCHEMA.len();
    let mut data = vec![0.0; g.num_nodes() * d];
    for (i, row) in data.chunks_mut(d).enumerate() {
        row[g.kind(i).index()] = 1.0;
        let inverted = g.fanins(i).filter(|e| e.complemented).count().min(2);
        row[NodeKind::ALL.len() + inverted] = 1.0;
    }
    NodeFeatures::new(data, g.num_nodes(), d, FEATURE_SCHEMA.iter().map(|s| s.to_string()).collect())
}
