//! Breadth-first hop distances over alive nodes.
//!
//! Used as the reference the spiral walk is checked against, and wherever the
//! simulator needs plain graph distances (spacing metrics, test providers).

use std::collections::VecDeque;

use rustc_hash::FxHashMap as HashMap;

use crate::ids::NodeId;
use crate::mesh::Topology;

/// Every alive node within `radius` hops of `source`, with its distance, in
/// breadth-first order (neighbors expanded in id order).
pub fn ball(t: &Topology, source: NodeId, radius: u32) -> Vec<(NodeId, u32)> {
    if !t.is_alive(source) {
        return Vec::new();
    }
    let mut seen: HashMap<NodeId, u32> = [(source, 0)].into_iter().collect();
    let mut order = vec![(source, 0)];
    let mut queue = VecDeque::from([(source, 0)]);
    while let Some((u, d)) = queue.pop_front() {
        if d == radius {
            continue;
        }
        for &v in t.neighbors(u) {
            if t.is_alive(v) && !seen.contains_key(&v) {
                seen.insert(v, d + 1);
                order.push((v, d + 1));
                queue.push_back((v, d + 1));
            }
        }
    }
    order
}

/// Hop distance between two alive nodes, if connected.
pub fn distance(t: &Topology, a: NodeId, b: NodeId) -> Option<u32> {
    nearest_matching(t, a, u32::MAX, |n| n == b).map(|(_, d)| d).or((a == b && t.is_alive(a)).then_some(0))
}

/// The closest node other than `source` satisfying `pred`, within `radius`
/// hops; lowest id among equally close matches.
pub fn nearest_matching<F>(t: &Topology, source: NodeId, radius: u32, pred: F) -> Option<(NodeId, u32)>
where
    F: Fn(NodeId) -> bool,
{
    if !t.is_alive(source) {
        return None;
    }
    let mut seen: HashMap<NodeId, ()> = [(source, ())].into_iter().collect();
    let mut frontier = vec![source];
    let mut d = 0;
    while !frontier.is_empty() && d < radius {
        d += 1;
        let mut next = Vec::new();
        for u in frontier {
            for &v in t.neighbors(u) {
                if t.is_alive(v) && seen.insert(v, ()).is_none() {
                    next.push(v);
                }
            }
        }
        if let Some(&hit) = next.iter().filter(|&&v| pred(v)).min() {
            return Some((hit, d));
        }
        frontier = next;
    }
    None
}

/// Largest hop distance from `source` to any alive node it reaches.
pub fn eccentricity(t: &Topology, source: NodeId) -> u32 {
    ball(t, source, u32::MAX).last().map_or(0, |&(_, d)| d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{octahedron, seed_icosahedron};

    #[test]
    fn icosahedron_rings() {
        let t = seed_icosahedron();
        let b = ball(&t, NodeId(0), 3);
        let count = |k| b.iter().filter(|&&(_, d)| d == k).count();
        assert_eq!((count(0), count(1), count(2), count(3)), (1, 5, 5, 1));
        assert_eq!(eccentricity(&t, NodeId(0)), 3);
        assert_eq!(distance(&t, NodeId(0), NodeId(11)), Some(3));
        assert_eq!(distance(&t, NodeId(4), NodeId(4)), Some(0));
    }

    #[test]
    fn nearest_skips_source_and_breaks_ties_low() {
        let t = octahedron();
        assert_eq!(nearest_matching(&t, NodeId(0), 5, |_| true), Some((NodeId(1), 1)));
        assert_eq!(nearest_matching(&t, NodeId(0), 5, |n| n == NodeId(5)), Some((NodeId(5), 2)));
        assert_eq!(nearest_matching(&t, NodeId(0), 1, |n| n == NodeId(5)), None);
    }

    #[test]
    fn dead_nodes_are_not_crossed() {
        let mut t = octahedron();
        for n in 1..=4 {
            t.mark_dead(NodeId(n)).unwrap();
        }
        assert_eq!(ball(&t, NodeId(0), 9), vec![(NodeId(0), 0)]);
        assert_eq!(distance(&t, NodeId(0), NodeId(5)), None);
    }
}
