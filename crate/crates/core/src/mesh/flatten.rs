use std::collections::BTreeSet;

use super::Topology;
use crate::ids::NodeId;

/// Upper bound on sweeps of one flattening call.
pub const MAX_FLATTEN_PASSES: usize = 50;

/// One edge flip: edge `(x, m)` replaced by `(c1, c2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Flip {
    pub x: NodeId,
    pub m: NodeId,
    pub c1: NodeId,
    pub c2: NodeId,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FlattenStats {
    pub flips: Vec<Flip>,
    pub passes: usize,
}

/// Attempts the flattening flip at `x`.
///
/// `x` must have degree above six. Its highest-degree neighbor `m` (lowest id on
/// ties) is paired with it; `c1, c2` are their common neighbors. The edge is
/// flipped when `deg(x) + deg(m) > deg(c1) + deg(c2)` and `c1, c2` share only
/// `x` and `m`, so the new edge keeps exactly two common neighbors. `m` must keep
/// degree four or more.
pub fn try_flip(t: &mut Topology, x: NodeId) -> Option<Flip> {
    if !t.is_alive(x) || t.degree(x) <= 6 {
        return None;
    }
    let m = t
        .neighbors(x)
        .iter()
        .copied()
        .max_by(|a, b| t.degree(*a).cmp(&t.degree(*b)).then(b.cmp(a)))?;
    if !t.is_alive(m) || t.degree(m) <= 4 {
        return None;
    }
    let commons = t.common(x, m);
    let [c1, c2] = commons[..] else {
        return None;
    };
    if !t.is_alive(c1) || !t.is_alive(c2) || t.has_edge(c1, c2) {
        return None;
    }
    if t.degree(x) + t.degree(m) <= t.degree(c1) + t.degree(c2) {
        return None;
    }
    if t.common_count(c1, c2) != 2 {
        return None;
    }
    t.remove_edge(x, m);
    t.add_edge(c1, c2);
    Some(Flip { x, m, c1, c2 })
}

/// Flattens the 2-hop neighborhood of `n`, recomputed before every pass.
pub fn flatten_around(t: &mut Topology, n: NodeId) -> FlattenStats {
    flatten_region(t, &[n], 2)
}

/// Flattens every node within `radius` hops of any seed, sweeping in id order
/// until a pass makes no flip or [`MAX_FLATTEN_PASSES`] is reached.
pub fn flatten_region(t: &mut Topology, seeds: &[NodeId], radius: usize) -> FlattenStats {
    let mut stats = FlattenStats::default();
    for _ in 0..MAX_FLATTEN_PASSES {
        stats.passes += 1;
        let region = neighborhood(t, seeds, radius);
        let mut flipped = false;
        for x in region {
            if let Some(f) = try_flip(t, x) {
                stats.flips.push(f);
                flipped = true;
            }
        }
        if !flipped {
            break;
        }
    }
    stats
}

fn neighborhood(t: &Topology, seeds: &[NodeId], radius: usize) -> BTreeSet<NodeId> {
    let mut region: BTreeSet<NodeId> = seeds.iter().copied().filter(|&s| t.contains(s)).collect();
    let mut frontier: Vec<NodeId> = region.iter().copied().collect();
    for _ in 0..radius {
        let mut next = Vec::new();
        for u in frontier {
            for &v in t.neighbors(u) {
                if region.insert(v) {
                    next.push(v);
                }
            }
        }
        frontier = next;
    }
    region
}
