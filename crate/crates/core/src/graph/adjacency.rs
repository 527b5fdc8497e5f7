//! Normalized adjacency `Â` used for hop propagation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{CircuitGraph, Csr};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdjacencyMode {
    /// `D^{-1/2} A D^{-1/2}` on the symmetrized edge set.
    #[default]
    SymmetricUndirected,
    /// `D_in^{-1} Aᵀ`: row `i` averages over the fan-ins of `i`.
    DirectedFanin,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AdjacencyOptions {
    /// Use `A + I` instead of `A`. Off by default: hop 0 already carries
    /// each node's own features.
    pub self_loops: bool,
}

/// Edge direction is used only by [`AdjacencyMode::DirectedFanin`];
/// complemented flags never affect `Â`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency {
    csr: Csr,
    mode: AdjacencyMode,
}

impl NormalizedAdjacency {
    pub fn csr(&self) -> &Csr {
        &self.csr
    }

    pub fn mode(&self) -> AdjacencyMode {
        self.mode
    }

    pub fn num_nodes(&self) -> usize {
        self.csr.n_rows()
    }
}

pub fn normalize_adjacency(g: &CircuitGraph, mode: AdjacencyMode) -> NormalizedAdjacency {
    normalize_adjacency_with(g, mode, AdjacencyOptions::default())
}

pub fn normalize_adjacency_with(g: &CircuitGraph, mode: AdjacencyMode, opts: AdjacencyOptions) -> NormalizedAdjacency {
    let n = g.num_nodes();
    let csr = match mode {
        AdjacencyMode::SymmetricUndirected => {
            let mut pairs = BTreeSet::new();
            for e in g.edges() {
                pairs.insert((e.src, e.dst));
                pairs.insert((e.dst, e.src));
            }
            if opts.self_loops {
                pairs.extend((0..n).map(|i| (i, i)));
            }
            let mut degree = vec![0usize; n];
            for &(i, _) in &pairs {
                degree[i] += 1;
            }
            let triplets = pairs
                .into_iter()
                .map(|(i, j)| (i, j, 1.0 / ((degree[i] * degree[j]) as f64).sqrt()))
                .collect();
            Csr::from_triplets(n, n, triplets)
        }
        AdjacencyMode::DirectedFanin => {
            let mut srcs: Vec<Vec<usize>> = vec![Vec::new(); n];
            for e in g.edges() {
                srcs[e.dst].push(e.src);
            }
            if opts.self_loops {
                for (i, s) in srcs.iter_mut().enumerate() {
                    s.push(i);
                }
            }
            let triplets = srcs
                .iter()
                .enumerate()
                .flat_map(|(i, s)| {
                    let w = 1.0 / s.len() as f64;
                    s.iter().map(move |&j| (i, j, w))
                })
                .collect();
            Csr::from_triplets(n, n, triplets)
        }
    };
    NormalizedAdjacency { csr, mode }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{parse_edge_list, Edge};

    #[test]
    fn path_symmetric() {
        let g = parse_edge_list("0 1").unwrap();
        let a = normalize_adjacency(&g, AdjacencyMode::SymmetricUndirected);
        assert_eq!(a.csr().to_dense(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn triangle_symmetric_halves() {
        let g = parse_edge_list("0 1\n1 2\n0 2").unwrap();
        let a = normalize_adjacency(&g, AdjacencyMode::SymmetricUndirected).csr().to_dense();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a[i][j], if i == j { 0.0 } else { 0.5 });
            }
        }
    }

    #[test]
    fn fanin_rows_average() {
        let g = parse_edge_list("0 2\n1 2 1\n2 3").unwrap();
        let a = normalize_adjacency(&g, AdjacencyMode::DirectedFanin).csr().to_dense();
        assert_eq!(a[2], vec![0.5, 0.5, 0.0, 0.0]);
        assert_eq!(a[3], vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(a[0], vec![0.0; 4]);
    }

    #[test]
    fn reverse_edges_merge_in_symmetric_mode() {
        let g = CircuitGraph::from_edges_inferred(2, vec![Edge::new(0, 1, false), Edge::new(1, 0, false)]).unwrap();
        let a = normalize_adjacency(&g, AdjacencyMode::SymmetricUndirected);
        assert_eq!(a.csr().nnz(), 2);
        assert_eq!(a.csr().get(0, 1), 1.0);
    }

    #[test]
    fn self_loops_flag() {
        let g = parse_edge_list("0 1").unwrap();
        let a = normalize_adjacency_with(&g, AdjacencyMode::SymmetricUndirected, AdjacencyOptions { self_loops: true });
        assert_eq!(a.csr().to_dense(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
    }
}
