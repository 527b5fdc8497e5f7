//! ASCII AIGER (`aag`) reader and writer for combinational circuits.
//!
//! Supported subset:
//!
//! ```text
//! aag M I L O A        header, L must be 0
//! <lit>                I input lines, even literals 2..=2M
//! <lit>                O output lines
//! <lhs> <rhs0> <rhs1>  A and-gate lines, lhs even
//! (i|o)<n> <name>      optional symbols, ignored
//! c                    optional comment section, ignored to end of file
//! ```
//!
//! Variable `v ≥ 1` becomes node `v - 1`; output `o` becomes node `M + o`.
//! A constant node (kind `Plain`) is appended only if literal 0 or 1 is
//! referenced. Edges are ordered gate by gate (`rhs0` then `rhs1`), followed
//! by one edge per output.

use std::fmt::Write as _;

use super::{CircuitGraph, Edge, NodeKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct Header {
    m: usize,
    i: usize,
    l: usize,
    o: usize,
    a: usize,
}

fn parse_header(line: &str) -> Result<Header> {
    let mut it = line.split_whitespace();
    if it.next() != Some("aag") {
        return Err(Error::parse(1, "expected `aag` header"));
    }
    let nums: Vec<usize> = it
        .map(|s| s.parse::<usize>().map_err(|_| Error::parse(1, format!("bad header field `{s}`"))))
        .collect::<Result<_>>()?;
    if nums.len() != 5 {
        return Err(Error::parse(1, format!("header needs 5 numbers `M I L O A`, got {}", nums.len())));
    }
    Ok(Header { m: nums[0], i: nums[1], l: nums[2], o: nums[3], a: nums[4] })
}

pub fn parse_aiger_ascii(text: &str) -> Result<CircuitGraph> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim()));
    let (_, first) = lines.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    let h = parse_header(first)?;
    if h.l != 0 {
        return Err(Error::parse(1, format!("{} latches declared; only combinational AIGs are supported", h.l)));
    }
    if h.m < h.i + h.a {
        return Err(Error::parse(1, format!("M = {} is smaller than I + A = {}", h.m, h.i + h.a)));
    }
    let max_lit = 2 * h.m + 1;

    let mut next_body = |what: &str| -> Result<(usize, Vec<usize>)> {
        let (no, line) = lines
            .next()
            .ok_or_else(|| Error::parse(0, format!("file ends before all {what} lines declared in the header")))?;
        if line.starts_with('c') || line.starts_with('i') || line.starts_with('o') {
            return Err(Error::parse(no, format!("expected {what} line, header count mismatch")));
        }
        let nums = line
            .split_whitespace()
            .map(|s| s.parse::<usize>().map_err(|_| Error::parse(no, format!("`{s}` is not a literal"))))
            .collect::<Result<Vec<_>>>()?;
        for &lit in &nums {
            if lit > max_lit {
                return Err(Error::parse(no, format!("literal {lit} out of range (max {max_lit})")));
            }
        }
        Ok((no, nums))
    };

    let mut defined = vec![false; h.m + 1];
    let mut kinds = vec![NodeKind::Plain; h.m + h.o];
    let mut define = |no: usize, lit: usize, kind: NodeKind, defined: &mut Vec<bool>| -> Result<()> {
        if lit < 2 || lit % 2 == 1 {
            return Err(Error::parse(no, format!("defining literal {lit} must be even and nonzero")));
        }
        let var = lit / 2;
        if defined[var] {
            return Err(Error::parse(no, format!("variable {var} defined twice")));
        }
        defined[var] = true;
        kinds[var - 1] = kind;
        Ok(())
    };

    for _ in 0..h.i {
        let (no, nums) = next_body("input")?;
        if nums.len() != 1 {
            return Err(Error::parse(no, "input line must hold one literal"));
        }
        define(no, nums[0], NodeKind::PrimaryInput, &mut defined)?;
    }
    let mut outputs = Vec::with_capacity(h.o);
    for _ in 0..h.o {
        let (no, nums) = next_body("output")?;
        if nums.len() != 1 {
            return Err(Error::parse(no, "output line must hold one literal"));
        }
        outputs.push((no, nums[0]));
    }
    let mut gates = Vec::with_capacity(h.a);
    for _ in 0..h.a {
        let (no, nums) = next_body("and")?;
        if nums.len() != 3 {
            return Err(Error::parse(no, "and line must hold `lhs rhs0 rhs1`"));
        }
        define(no, nums[0], NodeKind::AndGate, &mut defined)?;
        gates.push((no, nums[0], nums[1], nums[2]));
    }
    for (no, line) in lines {
        if line.is_empty() || line.starts_with('i') || line.starts_with('o') {
            continue;
        }
        if line.starts_with('c') {
            break;
        }
        return Err(Error::parse(no, "unexpected content after the declared body; header count mismatch"));
    }
    for k in 0..h.o {
        kinds[h.m + k] = NodeKind::PrimaryOutput;
    }

    let mut const_node: Option<usize> = None;
    let mut node_of = |no: usize, lit: usize, kinds: &mut Vec<NodeKind>| -> Result<usize> {
        let var = lit / 2;
        if var == 0 {
            return Ok(*const_node.get_or_insert_with(|| {
                kinds.push(NodeKind::Plain);
                kinds.len() - 1
            }));
        }
        if !defined[var] {
            return Err(Error::parse(no, format!("literal {lit} refers to undefined variable {var}")));
        }
        Ok(var - 1)
    };

    let mut edges = Vec::with_capacity(2 * h.a + h.o);
    for &(no, lhs, r0, r1) in &gates {
        let dst = lhs / 2 - 1;
        for r in [r0, r1] {
            let src = node_of(no, r, &mut kinds)?;
            edges.push(Edge::new(src, dst, r % 2 == 1));
        }
    }
    for (k, &(no, lit)) in outputs.iter().enumerate() {
        let src = node_of(no, lit, &mut kinds)?;
        edges.push(Edge::new(src, h.m + k, lit % 2 == 1));
    }
    CircuitGraph::new(kinds, edges)
}

/// Writes `g` as `aag`. Inputs are numbered in node order, then gates in
/// node order, so a graph laid out as inputs, gates, outputs round-trips
/// exactly. Gates must appear after all of their fan-ins in node order.
pub fn write_aiger_ascii(g: &CircuitGraph) -> Result<String> {
    let n = g.num_nodes();
    let mut var = vec![0usize; n];
    let inputs = g.nodes_of_kind(NodeKind::PrimaryInput);
    let gates = g.nodes_of_kind(NodeKind::AndGate);
    let outputs = g.nodes_of_kind(NodeKind::PrimaryOutput);
    if let Some(p) = g.nodes_of_kind(NodeKind::Plain).first() {
        return Err(Error::Format(format!("node {p} is Plain; AIGER holds only inputs, outputs and AND gates")));
    }
    for (k, &i) in inputs.iter().chain(&gates).enumerate() {
        var[i] = k + 1;
    }
    let lit = |e: &Edge| -> Result<usize> {
        match g.kind(e.src) {
            NodeKind::PrimaryInput | NodeKind::AndGate => Ok(2 * var[e.src] + e.complemented as usize),
            k => Err(Error::Format(format!("edge {} -> {} is driven by a {k:?} node", e.src, e.dst))),
        }
    };
    for &i in &inputs {
        if g.fanin_count(i) != 0 {
            return Err(Error::Format(format!("input node {i} has fan-in")));
        }
    }
    let m = inputs.len() + gates.len();
    let mut out = String::new();
    let _ = writeln!(out, "aag {m} {} 0 {} {}", inputs.len(), outputs.len(), gates.len());
    for &i in &inputs {
        let _ = writeln!(out, "{}", 2 * var[i]);
    }
    for &o in &outputs {
        let fanins: Vec<&Edge> = g.fanins(o).collect();
        if fanins.len() != 1 {
            return Err(Error::Format(format!("output node {o} has {} drivers", fanins.len())));
        }
        let _ = writeln!(out, "{}", lit(fanins[0])?);
    }
    for &a in &gates {
        let fanins: Vec<&Edge> = g.fanins(a).collect();
        if fanins.len() != 2 {
            return Err(Error::Format(format!("and node {a} has {} fan-ins", fanins.len())));
        }
        let _ = writeln!(out, "{} {} {}", 2 * var[a], lit(fanins[0])?, lit(fanins[1])?);
    }
    Ok(out)
}
