use std::collections::BTreeSet;

use rand::Rng;

use super::{flatten_region, locally_valid, Topology};
use crate::error::{Error, Result};
use crate::ids::NodeId;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RepairOutcome {
    /// The hole left by `failed` was closed by adding chords between its former
    /// neighbors.
    Triangulated {
        failed: NodeId,
        agent: NodeId,
        chords: Vec<(NodeId, NodeId)>,
    },
    /// The hole could not be triangulated; `replacement` left its own position
    /// (whose hole was closed with `chords`) and took over the failed node's
    /// former adjacency.
    Relocated {
        failed: NodeId,
        agent: NodeId,
        replacement: NodeId,
        chords: Vec<(NodeId, NodeId)>,
        walker_steps: usize,
    },
}

/// Step budget of the relocation walker: four times the estimated diameter,
/// with the diameter estimated as `2·sqrt(n)`.
pub fn relocation_ttl(alive: usize) -> usize {
    4 * (2.0 * (alive as f64).sqrt()).ceil() as usize
}

/// Repairs the hole left by a failed node.
///
/// The lowest-id alive former neighbor acts as repair agent. If every former
/// neighbor had degree five or more, the hole cycle is triangulated greedily
/// (ears ordered by combined endpoint degree, then by id pair). When a former
/// neighbor had degree four, or no valid triangulation is found, the tentative
/// chords are rolled back and a random walker looks for a replacement node whose
/// own hole is repairable; that node is moved into the failed node's place.
///
/// On [`Error::RepairExhausted`] the failed node stays in the graph as a dead,
/// flagged hole.
pub fn repair_failure<R: Rng + ?Sized>(t: &mut Topology, failed: NodeId, rng: &mut R) -> Result<RepairOutcome> {
    if !t.contains(failed) {
        return Err(Error::UnknownNode(failed));
    }
    if t.is_alive(failed) {
        return Err(Error::InvalidArgument(format!("node {failed} is not marked dead")));
    }
    let link = link_cycle(t, failed).ok_or_else(|| {
        Error::InvalidArgument(format!("neighbors of {failed} do not form a cycle"))
    })?;
    let Some(agent) = link.iter().copied().filter(|&n| t.is_alive(n)).min() else {
        t.flag_hole(failed);
        return Err(Error::RepairExhausted { failed });
    };

    // degrees are still measured with the failed node attached
    let has_degree_four = link.iter().any(|&n| t.degree(n) <= 4);
    if !has_degree_four {
        if let Ok(chords) = remove_and_triangulate(t, failed, &link) {
            t.remove_node(failed);
            flatten_region(t, &link, 1);
            return Ok(RepairOutcome::Triangulated { failed, agent, chords });
        }
    }

    relocate(t, failed, agent, &link, rng)
}

fn relocate<R: Rng + ?Sized>(
    t: &mut Topology,
    failed: NodeId,
    agent: NodeId,
    link: &[NodeId],
    rng: &mut R,
) -> Result<RepairOutcome> {
    let link_set: BTreeSet<NodeId> = link.iter().copied().collect();
    let ttl = relocation_ttl(t.alive_count());
    let mut pos = agent;
    let mut nbrs = Vec::new();
    for step in 1..=ttl {
        nbrs.clear();
        nbrs.extend(t.neighbors(pos).iter().copied().filter(|&m| t.is_alive(m)));
        if nbrs.is_empty() {
            break;
        }
        pos = nbrs[rng.random_range(0..nbrs.len())];
        if !is_replacement_candidate(t, pos, failed, &link_set) {
            continue;
        }
        let Some(old_link) = link_cycle(t, pos) else { continue };
        let Ok(chords) = remove_and_triangulate(t, pos, &old_link) else { continue };

        let former: Vec<NodeId> = t.neighbors(failed).to_vec();
        t.remove_node(failed);
        for u in former {
            t.add_edge(pos, u);
        }
        debug_assert!(locally_valid(t, link));
        flatten_region(t, &old_link, 1);
        flatten_region(t, link, 1);
        return Ok(RepairOutcome::Relocated {
            failed,
            agent,
            replacement: pos,
            chords,
            walker_steps: step,
        });
    }
    t.flag_hole(failed);
    Err(Error::RepairExhausted { failed })
}

/// A replacement must be at least three hops from the failed node, so that the
/// chords closing its own hole never touch the failed node's neighborhood, and
/// all of its neighbors must have degree five or more.
fn is_replacement_candidate(t: &Topology, c: NodeId, failed: NodeId, link: &BTreeSet<NodeId>) -> bool {
    if !t.is_alive(c) || c == failed || link.contains(&c) || t.flagged_holes().contains(&c) {
        return false;
    }
    t.neighbors(c)
        .iter()
        .all(|&m| m != failed && !link.contains(&m) && t.is_alive(m) && t.degree(m) >= 5)
}

/// Orders the neighbors of `v` as the cycle they form around it.
pub(crate) fn link_cycle(t: &Topology, v: NodeId) -> Option<Vec<NodeId>> {
    let nbrs = t.neighbors(v);
    if nbrs.len() < 3 {
        return None;
    }
    let in_link = |x: &NodeId| nbrs.binary_search(x).is_ok();
    let link_nbrs = |u: NodeId| -> Vec<NodeId> {
        t.neighbors(u).iter().copied().filter(|x| in_link(x)).collect()
    };
    let start = nbrs[0];
    let first = link_nbrs(start);
    if first.len() != 2 {
        return None;
    }
    let mut cycle = vec![start];
    let (mut prev, mut cur) = (start, first[0]);
    while cur != start {
        if cycle.len() > nbrs.len() {
            return None;
        }
        cycle.push(cur);
        let ln = link_nbrs(cur);
        if ln.len() != 2 {
            return None;
        }
        let next = if ln[0] == prev { ln[1] } else { ln[0] };
        prev = cur;
        cur = next;
    }
    (cycle.len() == nbrs.len()).then_some(cycle)
}

/// Detaches `v` and closes its hole; on failure everything is rolled back and
/// `v` keeps its edges.
fn remove_and_triangulate(t: &mut Topology, v: NodeId, link: &[NodeId]) -> std::result::Result<Vec<(NodeId, NodeId)>, ()> {
    let saved: Vec<NodeId> = t.neighbors(v).to_vec();
    for &u in &saved {
        t.remove_edge(v, u);
    }
    let mut chords = Vec::new();
    let ok = triangulate(t, link, &mut chords) && locally_valid(t, link);
    if ok {
        return Ok(chords);
    }
    for &(a, b) in &chords {
        t.remove_edge(a, b);
    }
    for &u in &saved {
        t.add_edge(v, u);
    }
    Err(())
}

/// Greedy ear cutting. An ear `(a, b, c)` is cut by the chord `(a, c)` when
/// both endpoints are alive, not yet adjacent, and share no neighbor outside the
/// hole. Among valid ears the one with the lowest `deg(a) + deg(c)` wins, then
/// the lowest id pair.
fn triangulate(t: &mut Topology, cycle: &[NodeId], chords: &mut Vec<(NodeId, NodeId)>) -> bool {
    let members: BTreeSet<NodeId> = cycle.iter().copied().collect();
    let mut poly = cycle.to_vec();
    while poly.len() > 3 {
        let len = poly.len();
        let mut best: Option<((usize, NodeId, NodeId), usize)> = None;
        for i in 0..len {
            let a = poly[(i + len - 1) % len];
            let c = poly[(i + 1) % len];
            if !t.is_alive(a) || !t.is_alive(c) || t.has_edge(a, c) {
                continue;
            }
            if t.common(a, c).iter().any(|x| !members.contains(x)) {
                continue;
            }
            let key = (t.degree(a) + t.degree(c), a.min(c), a.max(c));
            if best.is_none_or(|(k, _)| key < k) {
                best = Some((key, i));
            }
        }
        let Some(((_, a, c), i)) = best else {
            return false;
        };
        t.add_edge(a, c);
        chords.push((a, c));
        poly.remove(i);
    }
    true
}
