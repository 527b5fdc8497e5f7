//! Truth-table oracle for functional labels.
//!
//! A recorded cut is checked by exhaustively simulating the cone between its
//! leaves and its root. Labels are matched up to input and output polarity:
//! AIG adders routinely hand carries around on complemented edges, so a carry
//! root may compute `¬MAJ` of complemented leaves and still be a carry.

use std::collections::HashSet;

use serde::Serialize;

use super::{Label, LabeledCircuit};
use crate::graph::{CircuitGraph, NodeKind};
use crate::{Error, Result};

/// Cones larger than this are rejected.
pub const CONE_LIMIT: usize = 64;

const PROJECTIONS: [u64; 3] = [0xAA, 0xCC, 0xF0];

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CutFunction {
    pub root: usize,
    pub leaves: Vec<usize>,
    /// Bit `p` is the root value under leaf assignment `p` (leaf `k` is bit
    /// `k` of `p`).
    pub truth_table: u8,
    /// Nodes strictly between the leaves and the root, plus the root.
    pub cone: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LabelMismatch {
    pub node: usize,
    pub label: Label,
    pub reason: String,
}

pub fn cone_truth_table(g: &CircuitGraph, root: usize, leaves: &[usize]) -> Result<CutFunction> {
    if leaves.is_empty() || leaves.len() > 3 {
        return Err(Error::Circuit(format!("cut of node {root} has {} leaves; 1..=3 supported", leaves.len())));
    }
    if root >= g.num_nodes() || leaves.iter().any(|&l| l >= g.num_nodes()) {
        return Err(Error::Circuit(format!("cut of node {root} references a node outside the graph")));
    }
    let leaf_set: HashSet<usize> = leaves.iter().copied().collect();
    let mut cone = Vec::new();
    let mut reached = HashSet::new();
    let mut seen = HashSet::new();
    let mut stack = vec![root];
    while let Some(u) = stack.pop() {
        if leaf_set.contains(&u) {
            reached.insert(u);
            continue;
        }
        if !seen.insert(u) {
            continue;
        }
        if g.fanin_count(u) == 0 {
            return Err(Error::Circuit(format!("cone of node {root} escapes its cut at node {u}")));
        }
        cone.push(u);
        if cone.len() > CONE_LIMIT {
            return Err(Error::Circuit(format!("cone of node {root} exceeds {CONE_LIMIT} nodes")));
        }
        stack.extend(g.fanins(u).map(|e| e.src));
    }
    if let Some(l) = leaves.iter().find(|l| !reached.contains(l)) {
        return Err(Error::Circuit(format!("leaf {l} is unreachable from node {root}")));
    }

    // Evaluate the cone in topological order restricted to cone nodes.
    let order = g.topological_order()?;
    let in_cone: HashSet<usize> = cone.iter().copied().collect();
    let mut value = std::collections::HashMap::new();
    for (k, &l) in leaves.iter().enumerate() {
        value.insert(l, PROJECTIONS[k]);
    }
    for u in order.into_iter().filter(|u| in_cone.contains(u)) {
        let w = g.fanins(u).fold(!0u64, |acc, e| {
            let v = value[&e.src];
            acc & if e.complemented { !v } else { v }
        });
        value.insert(u, w);
    }
    let mask = (1u64 << (1 << leaves.len())) - 1;
    let truth_table = (value[&root] & mask) as u8;
    cone.reverse();
    Ok(CutFunction { root, leaves: leaves.to_vec(), truth_table, cone })
}

fn parity_table(n: usize) -> u8 {
    (0..1u8 << n).filter(|p| p.count_ones() % 2 == 1).fold(0, |t, p| t | 1 << p)
}

/// Table of `f(x ⊕ flip)`.
fn flip_inputs(table: u8, n: usize, flip: u8) -> u8 {
    (0..1u8 << n).fold(0, |t, p| t | (((table >> (p ^ flip)) & 1) << p))
}

pub(crate) fn is_xor_class(table: u8, n: usize) -> bool {
    let full = ((1u16 << (1 << n)) - 1) as u8;
    let x = parity_table(n);
    n >= 2 && (table == x || table == !x & full)
}

/// Majority of three up to input/output polarity. On two leaves this is
/// `MAJ(a, b, const)`, the AND/OR family.
pub(crate) fn is_maj_class(table: u8, n: usize) -> bool {
    match n {
        2 => matches!((table & 0xF).count_ones(), 1 | 3),
        3 => {
            let maj = (0..8u8).filter(|p| p.count_ones() >= 2).fold(0u8, |t, p| t | 1 << p);
            (0..8).any(|flip| {
                let f = flip_inputs(maj, 3, flip);
                table == f || table == !f
            })
        }
        _ => false,
    }
}

/// Checks every non-`Plain` label against its recorded cuts. An empty
/// result means every label is functionally justified.
pub fn verify_labels(c: &LabeledCircuit) -> Result<Vec<LabelMismatch>> {
    let g = &c.graph;
    if c.labels.len() != g.num_nodes() {
        return Err(Error::Circuit(format!("{} labels for {} nodes", c.labels.len(), g.num_nodes())));
    }
    let mut mismatches = Vec::new();
    let mut miss = |node: usize, label: Label, reason: String| mismatches.push(LabelMismatch { node, label, reason });
    for (node, &label) in c.labels.iter().enumerate() {
        if label == Label::Plain {
            continue;
        }
        if g.kind(node) != NodeKind::AndGate {
            miss(node, label, format!("{:?} node carries a functional label", g.kind(node)));
            continue;
        }
        let Some(cuts) = c.cuts.get(&node) else {
            miss(node, label, "no recorded cut".into());
            continue;
        };
        let own = &cuts[0];
        if own.root != node {
            miss(node, label, format!("first recorded cut is rooted at {}", own.root));
            continue;
        }
        let f = cone_truth_table(g, node, &own.leaves)?;
        let n = f.leaves.len();
        match label {
            Label::Xor if !is_xor_class(f.truth_table, n) => {
                miss(node, label, format!("truth table {:#06b} is not XOR-{n}", f.truth_table))
            }
            Label::Maj if !is_maj_class(f.truth_table, n) => {
                miss(node, label, format!("truth table {:#010b} is not MAJ-{n}", f.truth_table))
            }
            Label::Shared => {
                if !is_xor_class(f.truth_table, n) {
                    miss(node, label, format!("truth table {:#06b} is not XOR-{n}", f.truth_table));
                } else if let Some(carry) = cuts.get(1) {
                    let m = cone_truth_table(g, carry.root, &carry.leaves)?;
                    if !is_maj_class(m.truth_table, m.leaves.len()) {
                        miss(node, label, format!("carry cut at {} is not MAJ", carry.root));
                    } else if !m.cone.contains(&node) {
                        miss(node, label, format!("not inside the carry cone of {}", carry.root));
                    }
                } else {
                    miss(node, label, "shared node lacks a carry cut".into());
                }
            }
            _ => {}
        }
    }
    Ok(mismatches)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::circuit::{gen_csa_multiplier, RecordedCut};
    use crate::graph::parse_aiger_ascii;

    fn xor2(label: Label) -> LabeledCircuit {
        // n1 = a·b, n2 = ¬a·¬b, x = ¬n1·¬n2
        let g = parse_aiger_ascii("aag 5 2 0 1 3\n2\n4\n10\n6 2 4\n8 3 5\n10 7 9\n").unwrap();
        let mut labels = vec![Label::Plain; g.num_nodes()];
        labels[4] = label;
        let mut cuts = BTreeMap::new();
        cuts.insert(4, vec![RecordedCut { root: 4, leaves: vec![0, 1] }]);
        LabeledCircuit { graph: g, labels, bitwidth: 0, output_map: vec![5], input_a: vec![0], input_b: vec![1], cuts }
    }

    #[test]
    fn xor2_verified() {
        let c = xor2(Label::Xor);
        assert_eq!(cone_truth_table(&c.graph, 4, &[0, 1]).unwrap().truth_table, 0b0110);
        assert!(verify_labels(&c).unwrap().is_empty());
    }

    #[test]
    fn xor2_mislabeled_maj() {
        let m = verify_labels(&xor2(Label::Maj)).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].node, 4);
    }

    #[test]
    fn unreachable_leaf_and_escape() {
        let c = xor2(Label::Xor);
        assert!(cone_truth_table(&c.graph, 2, &[0, 1, 3]).is_err());
        assert!(cone_truth_table(&c.graph, 4, &[0]).is_err());
    }

    #[test]
    fn classes() {
        assert!(is_xor_class(0b0110, 2));
        assert!(is_xor_class(0b1001, 2));
        assert!(is_xor_class(0x96, 3));
        assert!(is_maj_class(0xE8, 3));
        assert!(is_maj_class(!0xE8, 3));
        assert!(!is_maj_class(0x96, 3));
        assert!(is_maj_class(0b1000, 2));
    }

    #[test]
    fn four_bit_multiplier_verifies() {
        let c = gen_csa_multiplier(4).unwrap();
        assert_eq!(verify_labels(&c).unwrap(), vec![]);
    }
}
