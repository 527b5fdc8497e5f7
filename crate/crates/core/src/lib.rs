//! Hop-wise gated attention (HOGA) for circuit graphs.
//!
//! The pipeline has two phases. The first builds a circuit graph (parsed from
//! an edge list or ASCII AIGER, or generated as a carry-save array multiplier),
//! normalizes its adjacency and precomputes the hop-wise feature stack
//! `X, ÂX, Â²X, ..., ÂᴷX` once. The second trains a gated self-attention model
//! that looks only at each node's own hop stack, so nodes are independent and
//! training shards freely across workers.
//!
//! ```
//! use hoga::circuit::gen_csa_multiplier;
//! use hoga::graph::{build_node_features, normalize_adjacency, AdjacencyMode};
//! use hoga::hop::generate_hop_features;
//!
//! let circuit = gen_csa_multiplier(4).unwrap();
//! let adj = normalize_adjacency(&circuit.graph, AdjacencyMode::SymmetricUndirected);
//! let x = build_node_features(&circuit.graph);
//! let hops = generate_hop_features(&adj, &x, 3).unwrap();
//! assert_eq!(hops.num_nodes(), circuit.graph.num_nodes());
//! ```

pub mod circuit;
pub mod error;
pub mod graph;
pub mod hop;
pub mod model;
pub mod numerics;
pub mod train;

pub use error::{Error, Result};
