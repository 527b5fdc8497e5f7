//! Labeled multiplier circuits, simulation and the functional label oracle.

mod multiplier;
mod random;
mod simulate;
mod verify;

pub use multiplier::{gen_csa_multiplier, MAX_BITWIDTH};
pub use random::{live_gate_count, random_aig};
pub use simulate::{simulate, simulate_words};
pub use verify::{cone_truth_table, verify_labels, CutFunction, LabelMismatch};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::graph::CircuitGraph;
use crate::{Error, Result};

/// Functional role of a node in an adder-based circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    /// Root of a majority (carry-out) function.
    Maj,
    /// Root of an exclusive-or (sum) function.
    Xor,
    /// XOR root that also sits inside a carry cone.
    Shared,
    Plain,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::Maj, Label::Xor, Label::Shared, Label::Plain];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        match self {
            Label::Maj => 0,
            Label::Xor => 1,
            Label::Shared => 2,
            Label::Plain => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Maj => "maj",
            Label::Xor => "xor",
            Label::Shared => "shared",
            Label::Plain => "plain",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "maj" | "0" => Ok(Label::Maj),
            "xor" | "1" => Ok(Label::Xor),
            "shared" | "2" => Ok(Label::Shared),
            "plain" | "3" => Ok(Label::Plain),
            other => Err(Error::InvalidArgument(format!("unknown label `{other}`"))),
        }
    }
}

/// A cut recorded by a circuit constructor: `root` computes a function of
/// `leaves` only.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedCut {
    pub root: usize,
    pub leaves: Vec<usize>,
}

/// A circuit together with per-node functional labels and the cuts that
/// justify them.
///
/// For an `Xor` or `Maj` node the single recorded cut is rooted at the node.
/// A `Shared` node records its own XOR cut followed by the carry cut whose
/// cone contains it.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledCircuit {
    pub graph: CircuitGraph,
    pub labels: Vec<Label>,
    pub bitwidth: usize,
    /// Product bit index → primary output node.
    pub output_map: Vec<usize>,
    /// Operand bit index → primary input node, for operands `a` and `b`.
    pub input_a: Vec<usize>,
    pub input_b: Vec<usize>,
    pub cuts: BTreeMap<usize, Vec<RecordedCut>>,
}

impl LabeledCircuit {
    pub fn label_counts(&self) -> [usize; Label::COUNT] {
        let mut counts = [0; Label::COUNT];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }

    pub fn label_indices(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.index()).collect()
    }

    /// Evaluates the circuit on operands `a`, `b` and reassembles the product.
    pub fn multiply(&self, a: u64, b: u64) -> Result<u128> {
        let mut assignment = vec![false; self.graph.num_nodes()];
        for (j, &node) in self.input_a.iter().enumerate() {
            assignment[node] = (a >> j) & 1 == 1;
        }
        for (j, &node) in self.input_b.iter().enumerate() {
            assignment[node] = (b >> j) & 1 == 1;
        }
        let pis = self.graph.nodes_of_kind(crate::graph::NodeKind::PrimaryInput);
        let inputs: Vec<bool> = pis.iter().map(|&p| assignment[p]).collect();
        let values = simulate::simulate_all(&self.graph, &inputs)?;
        Ok(self
            .output_map
            .iter()
            .enumerate()
            .fold(0u128, |acc, (bit, &po)| acc | ((values[po] as u128) << bit)))
    }

    /// `node_id,label` CSV.
    pub fn labels_csv(&self) -> String {
        let mut out = String::from("node_id,label\n");
        for (i, l) in self.labels.iter().enumerate() {
            out.push_str(&format!("{i},{l}\n"));
        }
        out
    }
}

/// Parses a `node_id,label` CSV into a dense label vector of length `n`.
pub fn parse_labels_csv(text: &str, n: usize) -> Result<Vec<Label>> {
    let mut labels = vec![None; n];
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (idx == 0 && line.starts_with("node_id")) {
            continue;
        }
        let (id, label) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(idx + 1, "expected `node_id,label`"))?;
        let id: usize = id.trim().parse().map_err(|_| Error::parse(idx + 1, format!("bad node id `{id}`")))?;
        if id >= n {
            return Err(Error::parse(idx + 1, format!("node {id} outside graph of {n} nodes")));
        }
        labels[id] = Some(label.parse::<Label>().map_err(|e| Error::parse(idx + 1, e.to_string()))?);
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| Error::Format(format!("no label for node {i}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_csv_round_trip() {
        let c = gen_csa_multiplier(3).unwrap();
        let parsed = parse_labels_csv(&c.labels_csv(), c.graph.num_nodes()).unwrap();
        assert_eq!(parsed, c.labels);
        assert!(parse_labels_csv("node_id,label\n0,xor\n", 2).is_err());
        assert!(parse_labels_csv("0,nope\n", 1).is_err());
    }
}
