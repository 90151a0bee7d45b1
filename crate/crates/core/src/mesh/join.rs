use rand::Rng;

use super::{flatten_around, FlattenStats, Topology};
use crate::error::{Error, Result};
use crate::ids::NodeId;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JoinOutcome {
    pub node: NodeId,
    pub entry: NodeId,
    /// The entry's neighbor whose edge to the entry was split.
    pub split: NodeId,
    /// The two former common neighbors of `entry` and `split`.
    pub apexes: [NodeId; 2],
    pub flatten: FlattenStats,
}

/// Inserts `new` on the edge `(entry, n2)` without flattening.
///
/// The edge is removed and `new` is connected to both endpoints and to their two
/// common neighbors: one node and three edges are added, `new` has degree four.
pub fn insert_on_edge(t: &mut Topology, new: NodeId, entry: NodeId, n2: NodeId) -> Result<[NodeId; 2]> {
    if t.contains(new) {
        return Err(Error::InvalidArgument(format!("node {new} already joined")));
    }
    if !t.is_alive(entry) {
        return Err(Error::UnknownNode(entry));
    }
    if !t.has_edge(entry, n2) {
        return Err(Error::InvalidArgument(format!("{entry} and {n2} are not neighbors")));
    }
    let commons = t.common(entry, n2);
    let [c1, c2] = commons[..] else {
        return Err(Error::InvalidArgument(format!(
            "edge ({entry},{n2}) has {} common neighbors",
            commons.len()
        )));
    };
    t.add_node(new)?;
    t.remove_edge(entry, n2);
    for m in [entry, n2, c1, c2] {
        t.add_edge(new, m);
    }
    Ok([c1, c2])
}

/// Joins `new` through `entry`: a random alive neighbor of the entry is picked,
/// their edge is split by the new node, then the new node's 2-hop neighborhood
/// is flattened.
pub fn connect_node<R: Rng + ?Sized>(
    t: &mut Topology,
    new: NodeId,
    entry: NodeId,
    rng: &mut R,
) -> Result<JoinOutcome> {
    if !t.is_alive(entry) {
        return Err(Error::UnknownNode(entry));
    }
    let candidates: Vec<NodeId> = t
        .neighbors(entry)
        .iter()
        .copied()
        .filter(|&m| t.is_alive(m))
        .collect();
    if candidates.is_empty() {
        return Err(Error::InvalidArgument(format!("entry {entry} has no alive neighbor")));
    }
    let split = candidates[rng.random_range(0..candidates.len())];
    let apexes = insert_on_edge(t, new, entry, split)?;
    let flatten = flatten_around(t, new);
    Ok(JoinOutcome {
        node: new,
        entry,
        split,
        apexes,
        flatten,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{check_invariant, seed_icosahedron};
    use crate::rng_from_seed;

    #[test]
    fn single_join_on_icosahedron() {
        let mut t = seed_icosahedron();
        let mut rng = rng_from_seed(1);
        let before: Vec<usize> = (0..12).map(|i| t.degree(NodeId(i))).collect();
        let new = t.next_id();
        let mut raw = t.clone();
        // without flattening, to observe the bare connection step
        let entry = NodeId(0);
        let n2 = t.neighbors(entry)[0];
        let [c1, c2] = insert_on_edge(&mut raw, new, entry, n2).unwrap();
        assert_eq!(raw.node_count(), 13);
        assert_eq!(raw.edge_count(), 33);
        assert_eq!(raw.degree(new), 4);
        assert!(!raw.has_edge(entry, n2));
        assert_eq!(raw.degree(c1), before[c1.index()] + 1);
        assert_eq!(raw.degree(c2), before[c2.index()] + 1);
        assert_eq!(raw.degree(entry), before[entry.index()]);
        assert!(check_invariant(&raw).is_valid());

        let out = connect_node(&mut t, new, entry, &mut rng).unwrap();
        assert_eq!(t.node_count(), 13);
        assert_eq!(t.edge_count(), 33);
        // nothing on an icosahedron exceeds degree six yet, so no flip
        assert!(out.flatten.flips.is_empty());
        assert_eq!(t.degree(new), 4);
        assert!(check_invariant(&t).is_valid());
    }

    #[test]
    fn dead_entry_is_rejected() {
        let mut t = seed_icosahedron();
        t.mark_dead(NodeId(4)).unwrap();
        let new = t.next_id();
        assert!(matches!(
            connect_node(&mut t, new, NodeId(4), &mut rng_from_seed(0)),
            Err(Error::UnknownNode(NodeId(4)))
        ));
    }

    #[test]
    fn thousand_joins_keep_invariant_and_approach_degree_six() {
        let mut t = seed_icosahedron();
        let mut rng = rng_from_seed(7);
        for _ in 0..1000 {
            let alive: Vec<_> = t.alive_nodes().collect();
            let entry = alive[rng.random_range(0..alive.len())];
            let (v, e) = (t.node_count(), t.edge_count());
            let new = t.next_id();
            connect_node(&mut t, new, entry, &mut rng).unwrap();
            assert_eq!(t.node_count(), v + 1);
            assert_eq!(t.edge_count(), e + 3);
            let report = check_invariant(&t);
            assert!(report.is_valid());
            assert!(report.min_degree().unwrap() >= 4);
        }
        assert!((t.mean_degree() - 6.0).abs() <= 0.1, "{}", t.mean_degree());
    }
}
