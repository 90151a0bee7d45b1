//! Plain-text topology snapshots.
//!
//! Edges are written one per line as `a b` with `a < b`, sorted
//! lexicographically; the degree histogram is a `degree,count` CSV.

use std::fmt::Write as _;

use super::Topology;
use crate::error::{Error, Result};
use crate::ids::NodeId;

pub fn edge_list(t: &Topology) -> String {
    let mut out = String::with_capacity(t.edge_count() * 12);
    for (a, b) in t.edges() {
        let _ = writeln!(out, "{a} {b}");
    }
    out
}

/// Parses an edge list. Blank lines and lines starting with `#` are skipped.
pub fn parse_edge_list(text: &str) -> Result<Topology> {
    let mut edges = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse(format!("line {}: expected two node ids", i + 1)));
        };
        let parse = |s: &str| {
            s.parse::<u32>()
                .map(NodeId)
                .map_err(|e| Error::Parse(format!("line {}: {s:?}: {e}", i + 1)))
        };
        let (a, b) = (parse(a)?, parse(b)?);
        if a == b {
            return Err(Error::Parse(format!("line {}: self-loop on {a}", i + 1)));
        }
        edges.push((a, b));
    }
    Ok(Topology::from_edges(edges))
}

pub fn degree_histogram_csv(t: &Topology) -> String {
    let mut out = String::from("degree,count\n");
    for (d, c) in super::check_invariant(t).degree_histogram {
        let _ = writeln!(out, "{d},{c}");
    }
    out
}
