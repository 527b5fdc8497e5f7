//! Unsigned carry-save array multipliers as AIGs.
//!
//! Partial products `a_j · b_i` are reduced row by row with carry-save
//! adders (carries move to the next column of the next row), and the last
//! sum/carry vectors are merged by a ripple-carry adder.
//!
//! Full adders use a fixed 9-AND decomposition:
//!
//! ```text
//!   n1 = a·b    n2 = ¬a·¬b    x  = ¬n1·¬n2      x  = a ⊕ b    (Shared)
//!   m1 = x·c    m2 = ¬x·¬c    s  = ¬m1·¬m2      s  = x ⊕ c    (Xor)
//!   t1 = a·b    t2 = x·c      co = ¬t1·¬t2      ¬co = MAJ(a,b,c) (Maj)
//! ```
//!
//! The carry leaves the adder on a complemented edge. Half adders reuse the
//! first three gates: `x` is the sum (Xor) and `n1` the carry (Maj).

use std::collections::BTreeMap;

use super::{Label, LabeledCircuit, RecordedCut};
use crate::graph::{CircuitGraph, Edge, NodeKind};
use crate::{Error, Result};

pub const MAX_BITWIDTH: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Lit {
    node: usize,
    inv: bool,
}

impl Lit {
    fn pos(node: usize) -> Lit {
        Lit { node, inv: false }
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit { node: self.node, inv: !self.inv }
    }
}

#[derive(Default)]
struct Builder {
    kinds: Vec<NodeKind>,
    labels: Vec<Label>,
    edges: Vec<Edge>,
    cuts: BTreeMap<usize, Vec<RecordedCut>>,
}

impl Builder {
    fn node(&mut self, kind: NodeKind) -> usize {
        self.kinds.push(kind);
        self.labels.push(Label::Plain);
        self.kinds.len() - 1
    }

    fn and(&mut self, a: Lit, b: Lit) -> usize {
        let g = self.node(NodeKind::AndGate);
        self.edges.push(Edge::new(a.node, g, a.inv));
        self.edges.push(Edge::new(b.node, g, b.inv));
        g
    }

    fn mark(&mut self, node: usize, label: Label, cuts: Vec<RecordedCut>) {
        self.labels[node] = label;
        self.cuts.insert(node, cuts);
    }

    /// Three-gate XOR; returns `(n1, x)` where `n1 = a·b`.
    fn xor(&mut self, a: Lit, b: Lit) -> (usize, usize) {
        let n1 = self.and(a, b);
        let n2 = self.and(!a, !b);
        let x = self.and(Lit { node: n1, inv: true }, Lit { node: n2, inv: true });
        (n1, x)
    }

    fn half_adder(&mut self, a: Lit, b: Lit) -> (Lit, Lit) {
        let (n1, x) = self.xor(a, b);
        let leaves = vec![a.node, b.node];
        self.mark(x, Label::Xor, vec![RecordedCut { root: x, leaves: leaves.clone() }]);
        self.mark(n1, Label::Maj, vec![RecordedCut { root: n1, leaves }]);
        (Lit::pos(x), Lit::pos(n1))
    }

    /// Sum-only half adder for the top product bit, whose carry is always 0.
    fn xor_only(&mut self, a: Lit, b: Lit) -> Lit {
        let (_, x) = self.xor(a, b);
        self.mark(x, Label::Xor, vec![RecordedCut { root: x, leaves: vec![a.node, b.node] }]);
        Lit::pos(x)
    }

    fn full_adder(&mut self, a: Lit, b: Lit, c: Lit) -> (Lit, Lit) {
        let (_, x) = self.xor(a, b);
        let xl = Lit::pos(x);
        let (_, s) = self.xor(xl, c);
        let t1 = self.and(a, b);
        let t2 = self.and(xl, c);
        let co = self.and(Lit { node: t1, inv: true }, Lit { node: t2, inv: true });
        let ab = vec![a.node, b.node];
        let abc = vec![a.node, b.node, c.node];
        self.mark(x, Label::Shared, vec![
            RecordedCut { root: x, leaves: ab },
            RecordedCut { root: co, leaves: abc.clone() },
        ]);
        self.mark(s, Label::Xor, vec![RecordedCut { root: s, leaves: vec![x, c.node] }]);
        self.mark(co, Label::Maj, vec![RecordedCut { root: co, leaves: abc }]);
        (Lit::pos(s), Lit { node: co, inv: true })
    }

    /// Reduces the operands of one column; returns the column sum and the
    /// carry into the next column, if any. `keep_carry = false` drops the
    /// carry of a two-operand column.
    fn reduce(&mut self, ops: &[Lit], keep_carry: bool) -> (Lit, Option<Lit>) {
        match *ops {
            [a] => (a, None),
            [a, b] if keep_carry => {
                let (s, c) = self.half_adder(a, b);
                (s, Some(c))
            }
            [a, b] => (self.xor_only(a, b), None),
            [a, b, c] => {
                let (s, co) = self.full_adder(a, b, c);
                (s, Some(co))
            }
            _ => unreachable!("columns hold one to three operands"),
        }
    }
}

/// Builds a `bitwidth × bitwidth` unsigned CSA array multiplier.
///
/// Node layout: inputs `a_0..a_{w-1}, b_0..b_{w-1}`, then gates in creation
/// order, then one output per product bit. A 1-bit multiplier has the single
/// output `a_0 · b_0`; wider ones have `2w` outputs.
pub fn gen_csa_multiplier(bitwidth: usize) -> Result<LabeledCircuit> {
    if bitwidth == 0 || bitwidth > MAX_BITWIDTH {
        return Err(Error::InvalidArgument(format!("bitwidth must be in 1..={MAX_BITWIDTH}, got {bitwidth}")));
    }
    let w = bitwidth;
    let mut b = Builder::default();
    let input_a: Vec<usize> = (0..w).map(|_| b.node(NodeKind::PrimaryInput)).collect();
    let input_b: Vec<usize> = (0..w).map(|_| b.node(NodeKind::PrimaryInput)).collect();

    let mut product: Vec<Lit> = Vec::with_capacity(2 * w);
    // Row 0: partial products a_j·b_0 at positions j.
    let mut sums: BTreeMap<usize, Lit> = BTreeMap::new();
    let mut carries: BTreeMap<usize, Lit> = BTreeMap::new();
    for j in 0..w {
        let pp = b.and(Lit::pos(input_a[j]), Lit::pos(input_b[0]));
        sums.insert(j, Lit::pos(pp));
    }
    product.push(sums.remove(&0).expect("position 0"));

    for i in 1..w {
        let mut next_sums = BTreeMap::new();
        let mut next_carries = BTreeMap::new();
        for j in 0..w {
            let pos = i + j;
            let pp = b.and(Lit::pos(input_a[j]), Lit::pos(input_b[i]));
            let mut ops = vec![Lit::pos(pp)];
            ops.extend(sums.remove(&pos));
            ops.extend(carries.remove(&pos));
            let (s, c) = b.reduce(&ops, true);
            next_sums.insert(pos, s);
            if let Some(c) = c {
                next_carries.insert(pos + 1, c);
            }
        }
        debug_assert!(sums.is_empty() && carries.is_empty());
        product.push(next_sums.remove(&i).expect("lowest column of the row"));
        sums = next_sums;
        carries = next_carries;
    }

    if w > 1 {
        // Ripple-carry merge of the remaining columns w..2w-1.
        let mut ripple: Option<Lit> = None;
        for pos in w..2 * w {
            let mut ops = Vec::with_capacity(3);
            ops.extend(sums.remove(&pos));
            ops.extend(carries.remove(&pos));
            ops.extend(ripple.take());
            let (s, c) = b.reduce(&ops, pos + 1 < 2 * w);
            product.push(s);
            ripple = c;
        }
    }

    let mut output_map = Vec::with_capacity(product.len());
    for lit in &product {
        let po = b.node(NodeKind::PrimaryOutput);
        b.edges.push(Edge::new(lit.node, po, lit.inv));
        output_map.push(po);
    }

    let graph = CircuitGraph::new(b.kinds, b.edges)?;
    Ok(LabeledCircuit { graph, labels: b.labels, bitwidth, output_map, input_a, input_b, cuts: b.cuts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    fn bfs_depth(g: &CircuitGraph) -> usize {
        let mut depth = vec![0usize; g.num_nodes()];
        let mut queue: VecDeque<usize> = (0..g.num_nodes()).filter(|&i| g.fanin_count(i) == 0).collect();
        let mut indeg: Vec<usize> = (0..g.num_nodes()).map(|i| g.fanin_count(i)).collect();
        while let Some(u) = queue.pop_front() {
            for &v in g.fanouts(u) {
                depth[v] = depth[v].max(depth[u] + 1);
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    queue.push_back(v);
                }
            }
        }
        depth.into_iter().max().unwrap_or(0)
    }

    #[test]
    fn one_bit_is_a_single_and() {
        let c = gen_csa_multiplier(1).unwrap();
        assert_eq!(c.graph.nodes_of_kind(NodeKind::AndGate).len(), 1);
        assert!(c.labels.iter().all(|&l| l == Label::Plain));
        assert_eq!(c.output_map.len(), 1);
        assert_eq!(c.multiply(1, 1).unwrap(), 1);
        assert_eq!(c.multiply(1, 0).unwrap(), 0);
    }

    #[test]
    fn bitwidth_range() {
        assert!(gen_csa_multiplier(0).is_err());
        assert!(gen_csa_multiplier(MAX_BITWIDTH + 1).is_err());
    }

    #[test]
    fn two_bit_exhaustive() {
        let c = gen_csa_multiplier(2).unwrap();
        assert_eq!(c.output_map.len(), 4);
        for a in 0..4u64 {
            for b in 0..4u64 {
                assert_eq!(c.multiply(a, b).unwrap(), (a * b) as u128, "{a}*{b}");
            }
        }
    }

    #[test]
    fn four_bit_example() {
        let c = gen_csa_multiplier(4).unwrap();
        assert_eq!(c.multiply(13, 11).unwrap(), 143);
    }

    #[test]
    fn labels_only_on_and_gates() {
        let c = gen_csa_multiplier(6).unwrap();
        for (i, &l) in c.labels.iter().enumerate() {
            if l != Label::Plain {
                assert_eq!(c.graph.kind(i), NodeKind::AndGate);
            }
        }
        let counts = c.label_counts();
        assert!(counts.iter().all(|&k| k > 0), "{counts:?}");
    }

    #[test]
    fn acyclic_and_depth_grows() {
        let small = gen_csa_multiplier(4).unwrap();
        let big = gen_csa_multiplier(8).unwrap();
        assert!(small.graph.topological_order().is_ok());
        assert!(bfs_depth(&big.graph) > bfs_depth(&small.graph));
    }
}
