//! Plain-text edge lists.
//!
//! ```text
//! file    := line*
//! line    := ws* (edge)? ws* comment? "\n"
//! edge    := id ws+ id (ws+ flag)?
//! id      := [0-9]+
//! flag    := "0" | "1"          complemented edge, default 0
//! comment := "#" any*
//! ```
//!
//! The node count is `max id + 1`. Node kinds are not stored; they are
//! inferred from structure on load (see [`CircuitGraph::from_edges_inferred`]).

use std::fmt::Write as _;

use super::{CircuitGraph, Edge};
use crate::{Error, Result};

pub fn parse_edge_list(text: &str) -> Result<CircuitGraph> {
    let mut edges = Vec::new();
    let mut max_id: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::parse(line_no, format!("expected `src dst [c]`, got {} fields", fields.len())));
        }
        let id = |s: &str| s.parse::<usize>().map_err(|_| Error::parse(line_no, format!("`{s}` is not a node id")));
        let src = id(fields[0])?;
        let dst = id(fields[1])?;
        let complemented = match fields.get(2) {
            None | Some(&"0") => false,
            Some(&"1") => true,
            Some(other) => return Err(Error::parse(line_no, format!("complement flag must be 0 or 1, got `{other}`"))),
        };
        if src == dst {
            return Err(Error::parse(line_no, format!("self-loop on node {src}")));
        }
        max_id = Some(max_id.map_or(src.max(dst), |m| m.max(src).max(dst)));
        edges.push((line_no, Edge::new(src, dst, complemented)));
    }
    let mut seen = std::collections::HashSet::new();
    for (line_no, e) in &edges {
        if !seen.insert((e.src, e.dst)) {
            return Err(Error::parse(*line_no, format!("duplicate edge {} -> {}", e.src, e.dst)));
        }
    }
    let n = max_id.map_or(0, |m| m + 1);
    CircuitGraph::from_edges_inferred(n, edges.into_iter().map(|(_, e)| e).collect())
}

pub fn write_edge_list(g: &CircuitGraph) -> String {
    let mut out = String::with_capacity(g.num_edges() * 12);
    let _ = writeln!(out, "# {} nodes, {} edges; columns: src dst complemented", g.num_nodes(), g.num_edges());
    for e in g.edges() {
        let _ = writeln!(out, "{} {} {}", e.src, e.dst, e.complemented as u8);
    }
    out
}
