//! Circuit graph data model, file formats, adjacency normalization and
//! initial node features.

mod adjacency;
mod aiger;
mod csr;
mod edgelist;
mod features;

pub use adjacency::{normalize_adjacency, normalize_adjacency_with, AdjacencyMode, AdjacencyOptions, NormalizedAdjacency};
pub use aiger::{parse_aiger_ascii, write_aiger_ascii};
pub use csr::Csr;
pub use edgelist::{parse_edge_list, write_edge_list};
pub use features::{build_node_features, NodeFeatures, FEATURE_SCHEMA};

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    PrimaryInput,
    PrimaryOutput,
    AndGate,
    Plain,
}

impl NodeKind {
    pub const ALL: [NodeKind; 4] = [NodeKind::PrimaryInput, NodeKind::PrimaryOutput, NodeKind::AndGate, NodeKind::Plain];

    pub fn index(self) -> usize {
        match self {
            NodeKind::PrimaryInput => 0,
            NodeKind::PrimaryOutput => 1,
            NodeKind::AndGate => 2,
            NodeKind::Plain => 3,
        }
    }
}

/// A directed edge `src → dst`. `complemented` marks an inverted AIG edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub complemented: bool,
}

impl Edge {
    pub fn new(src: usize, dst: usize, complemented: bool) -> Self {
        Edge { src, dst, complemented }
    }
}

/// A directed circuit netlist. Immutable once built.
///
/// Node ids are `0..num_nodes`. Edges keep their insertion order, which is
/// the order every serializer writes them in.
#[derive(Clone, Debug)]
pub struct CircuitGraph {
    kinds: Vec<NodeKind>,
    edges: Vec<Edge>,
    /// Fan-out adjacency, `csr[src][dst] = 1`.
    csr: Csr,
    fanin_offsets: Vec<usize>,
    fanin_edges: Vec<usize>,
}

impl PartialEq for CircuitGraph {
    fn eq(&self, other: &Self) -> bool {
        self.kinds == other.kinds && self.edges == other.edges
    }
}

impl CircuitGraph {
    /// Validates ids, self-loops and duplicate `(src, dst)` pairs.
    pub fn new(kinds: Vec<NodeKind>, edges: Vec<Edge>) -> Result<Self> {
        let n = kinds.len();
        let mut seen = HashSet::with_capacity(edges.len());
        for (k, e) in edges.iter().enumerate() {
            if e.src >= n || e.dst >= n {
                return Err(Error::Graph(format!("edge {k} ({} -> {}) references a node outside 0..{n}", e.src, e.dst)));
            }
            if e.src == e.dst {
                return Err(Error::Graph(format!("edge {k} is a self-loop on node {}", e.src)));
            }
            if !seen.insert((e.src, e.dst)) {
                return Err(Error::Graph(format!("duplicate edge {} -> {}", e.src, e.dst)));
            }
        }
        let csr = Csr::from_triplets(n, n, edges.iter().map(|e| (e.src, e.dst, 1.0)).collect());
        let mut fanin_offsets = vec![0usize; n + 1];
        for e in &edges {
            fanin_offsets[e.dst + 1] += 1;
        }
        for i in 0..n {
            fanin_offsets[i + 1] += fanin_offsets[i];
        }
        let mut cursor = fanin_offsets.clone();
        let mut fanin_edges = vec![0usize; edges.len()];
        for (k, e) in edges.iter().enumerate() {
            fanin_edges[cursor[e.dst]] = k;
            cursor[e.dst] += 1;
        }
        Ok(CircuitGraph { kinds, edges, csr, fanin_offsets, fanin_edges })
    }

    /// Builds a graph whose node kinds are inferred from structure: no fan-in
    /// with fan-out is a primary input, two fan-ins an AND gate, one fan-in and
    /// no fan-out a primary output, anything else `Plain`.
    pub fn from_edges_inferred(num_nodes: usize, edges: Vec<Edge>) -> Result<Self> {
        let mut indeg = vec![0usize; num_nodes];
        let mut outdeg = vec![0usize; num_nodes];
        for e in &edges {
            if e.src < num_nodes && e.dst < num_nodes {
                outdeg[e.src] += 1;
                indeg[e.dst] += 1;
            }
        }
        let kinds = (0..num_nodes)
            .map(|i| match (indeg[i], outdeg[i]) {
                (0, o) if o > 0 => NodeKind::PrimaryInput,
                (2, _) => NodeKind::AndGate,
                (1, 0) => NodeKind::PrimaryOutput,
                _ => NodeKind::Plain,
            })
            .collect();
        CircuitGraph::new(kinds, edges)
    }

    pub fn num_nodes(&self) -> usize {
        self.kinds.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        self.kinds[node]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Fan-out adjacency in CSR form.
    pub fn csr(&self) -> &Csr {
        &self.csr
    }

    /// Fan-in edges of `node`, in insertion order.
    pub fn fanins(&self, node: usize) -> impl Iterator<Item = &Edge> + '_ {
        self.fanin_edges[self.fanin_offsets[node]..self.fanin_offsets[node + 1]]
            .iter()
            .map(move |&k| &self.edges[k])
    }

    pub fn fanin_count(&self, node: usize) -> usize {
        self.fanin_offsets[node + 1] - self.fanin_offsets[node]
    }

    pub fn fanouts(&self, node: usize) -> &[usize] {
        self.csr.row(node).0
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&i| self.kinds[i] == kind).collect()
    }

    /// Kahn topological order; fails on a combinational cycle.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let n = self.num_nodes();
        let mut indeg: Vec<usize> = (0..n).map(|i| self.fanin_count(i)).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &v in self.fanouts(u) {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    queue.push_back(v);
                }
            }
        }
        if order.len() != n {
            return Err(Error::Graph(format!("combinational cycle through {} nodes", n - order.len())));
        }
        Ok(order)
    }

    /// Renames node `i` to `perm[i]`. Edge order is preserved.
    pub fn relabel(&self, perm: &[usize]) -> Result<CircuitGraph> {
        let n = self.num_nodes();
        if perm.len() != n {
            return Err(Error::InvalidArgument(format!("permutation has {} entries for {n} nodes", perm.len())));
        }
        let mut kinds = vec![NodeKind::Plain; n];
        let mut hit = vec![false; n];
        for (i, &p) in perm.iter().enumerate() {
            if p >= n || hit[p] {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
            hit[p] = true;
            kinds[p] = self.kinds[i];
        }
        let edges = self.edges.iter().map(|e| Edge::new(perm[e.src], perm[e.dst], e.complemented)).collect();
        CircuitGraph::new(kinds, edges)
    }

    /// SHA-256 over node count, kinds and the ordered edge list.
    pub fn checksum(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.num_nodes() as u64).to_le_bytes());
        for k in &self.kinds {
            h.update([k.index() as u8]);
        }
        for e in &self.edges {
            h.update((e.src as u64).to_le_bytes());
            h.update((e.dst as u64).to_le_bytes());
            h.update([e.complemented as u8]);
        }
        h.finalize().into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_self_loop_and_duplicates() {
        let kinds = vec![NodeKind::Plain; 3];
        assert!(CircuitGraph::new(kinds.clone(), vec![Edge::new(1, 1, false)]).is_err());
        assert!(CircuitGraph::new(kinds.clone(), vec![Edge::new(0, 1, false), Edge::new(0, 1, true)]).is_err());
        assert!(CircuitGraph::new(kinds, vec![Edge::new(0, 5, false)]).is_err());
    }

    #[test]
    fn fanins_keep_insertion_order() {
        let g = CircuitGraph::from_edges_inferred(3, vec![Edge::new(1, 2, true), Edge::new(0, 2, false)]).unwrap();
        let srcs: Vec<_> = g.fanins(2).map(|e| e.src).collect();
        assert_eq!(srcs, vec![1, 0]);
        assert_eq!(g.kind(2), NodeKind::AndGate);
        assert_eq!(g.kind(0), NodeKind::PrimaryInput);
    }

    #[test]
    fn cycle_detected() {
        let g = CircuitGraph::new(vec![NodeKind::Plain; 2], vec![Edge::new(0, 1, false), Edge::new(1, 0, false)]).unwrap();
        assert!(g.topological_order().is_err());
    }

    #[test]
    fn relabel_moves_kinds_and_edges() {
        let g = CircuitGraph::from_edges_inferred(3, vec![Edge::new(0, 2, false), Edge::new(1, 2, true)]).unwrap();
        let h = g.relabel(&[2, 0, 1]).unwrap();
        assert_eq!(h.kind(1), NodeKind::AndGate);
        assert_eq!(h.edges()[1], Edge::new(0, 1, true));
        assert!(g.relabel(&[0, 0, 1]).is_err());
    }
}
