//! Bit-parallel logic simulation.
//!
//! Inputs take their assigned value. Every other node is the conjunction of
//! its fan-ins with per-edge complementation, so an output node forwards its
//! single driver. A `Plain` node without fan-in is the constant 0.

use crate::graph::{CircuitGraph, NodeKind};
use crate::{Error, Result};

/// Simulates 64 patterns at once. `inputs[k]` holds the patterns of the k-th
/// primary input in node order; returns one word per node.
pub(crate) fn simulate_nodes(g: &CircuitGraph, inputs: &[u64]) -> Result<Vec<u64>> {
    let pis = g.nodes_of_kind(NodeKind::PrimaryInput);
    if inputs.len() != pis.len() {
        return Err(Error::InvalidArgument(format!("{} input words for {} primary inputs", inputs.len(), pis.len())));
    }
    let order = g.topological_order()?;
    let mut value = vec![0u64; g.num_nodes()];
    for (&p, &w) in pis.iter().zip(inputs) {
        value[p] = w;
    }
    for u in order {
        if g.kind(u) == NodeKind::PrimaryInput {
            continue;
        }
        if g.fanin_count(u) == 0 {
            value[u] = 0;
            continue;
        }
        value[u] = g
            .fanins(u)
            .fold(!0u64, |acc, e| acc & if e.complemented { !value[e.src] } else { value[e.src] });
    }
    Ok(value)
}

/// 64-pattern simulation; returns one word per primary output in node order.
pub fn simulate_words(g: &CircuitGraph, inputs: &[u64]) -> Result<Vec<u64>> {
    let value = simulate_nodes(g, inputs)?;
    Ok(g.nodes_of_kind(NodeKind::PrimaryOutput).into_iter().map(|o| value[o]).collect())
}

pub(crate) fn simulate_all(g: &CircuitGraph, inputs: &[bool]) -> Result<Vec<bool>> {
    let words: Vec<u64> = inputs.iter().map(|&b| if b { 1 } else { 0 }).collect();
    Ok(simulate_nodes(g, &words)?.into_iter().map(|w| w & 1 == 1).collect())
}

/// Single-pattern simulation. `inputs` follows primary-input node order;
/// the result follows primary-output node order.
pub fn simulate(g: &CircuitGraph, inputs: &[bool]) -> Result<Vec<bool>> {
    let words: Vec<u64> = inputs.iter().map(|&b| b as u64).collect();
    Ok(simulate_words(g, &words)?.into_iter().map(|w| w & 1 == 1).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{parse_aiger_ascii, Edge};

    #[test]
    fn and_with_inverted_input() {
        // o = a · ¬b
        let g = parse_aiger_ascii("aag 3 2 0 1 1\n2\n4\n6\n6 2 5\n").unwrap();
        assert_eq!(simulate(&g, &[true, false]).unwrap(), vec![true]);
        assert_eq!(simulate(&g, &[true, true]).unwrap(), vec![false]);
        assert_eq!(simulate_words(&g, &[0b1100, 0b1010]).unwrap(), vec![0b0100]);
    }

    #[test]
    fn cycle_is_an_error() {
        let g = CircuitGraph::new(
            vec![NodeKind::PrimaryInput, NodeKind::AndGate, NodeKind::AndGate],
            vec![Edge::new(0, 1, false), Edge::new(2, 1, false), Edge::new(1, 2, false), Edge::new(0, 2, false)],
        )
        .unwrap();
        assert!(simulate(&g, &[true]).is_err());
    }

    #[test]
    fn input_count_checked() {
        let g = parse_aiger_ascii("aag 1 1 0 1 0\n2\n2\n").unwrap();
        assert!(simulate(&g, &[]).is_err());
    }
}
