//! Random combinational AIGs.

use rand::Rng;

use crate::graph::{CircuitGraph, Edge, NodeKind};
use crate::{Error, Result};

/// Random AIG laid out as inputs, gates, outputs. Each gate draws two
/// distinct earlier nodes with random polarity; each output taps a random
/// gate.
pub fn random_aig<R: Rng>(inputs: usize, gates: usize, outputs: usize, rng: &mut R) -> Result<CircuitGraph> {
    if inputs < 2 || gates == 0 {
        return Err(Error::InvalidArgument("random AIG needs at least 2 inputs and 1 gate".into()));
    }
    let mut kinds = vec![NodeKind::PrimaryInput; inputs];
    let mut edges = Vec::with_capacity(2 * gates + outputs);
    for g in 0..gates {
        let id = inputs + g;
        let a = rng.gen_range(0..id);
        let mut b = rng.gen_range(0..id - 1);
        if b >= a {
            b += 1;
        }
        edges.push(Edge::new(a, id, rng.gen_bool(0.5)));
        edges.push(Edge::new(b, id, rng.gen_bool(0.5)));
        kinds.push(NodeKind::AndGate);
    }
    for o in 0..outputs {
        let src = inputs + rng.gen_range(0..gates);
        edges.push(Edge::new(src, inputs + gates + o, rng.gen_bool(0.5)));
        kinds.push(NodeKind::PrimaryOutput);
    }
    CircuitGraph::new(kinds, edges)
}

/// Number of AND gates in the transitive fan-in of the primary outputs,
/// i.e. the gate count left after dead-logic removal.
pub fn live_gate_count(g: &CircuitGraph) -> usize {
    let mut live = vec![false; g.num_nodes()];
    let mut stack = g.nodes_of_kind(NodeKind::PrimaryOutput);
    while let Some(u) = stack.pop() {
        if live[u] {
            continue;
        }
        live[u] = true;
        stack.extend(g.fanins(u).map(|e| e.src));
    }
    (0..g.num_nodes()).filter(|&i| live[i] && g.kind(i) == NodeKind::AndGate).count()
}
