//! The closed triangular-mesh overlay.
//!
//! Every edge of a valid mesh borders exactly two triangles, which in graph
//! terms means the endpoints of every edge share exactly two neighbors. All
//! maintenance operations (joins, repairs, flips) preserve that property.

mod flatten;
mod join;
mod repair;
pub mod snapshot;
mod topology;
mod views;

use std::collections::{BTreeMap, VecDeque};

pub use flatten::{flatten_around, flatten_region, try_flip, FlattenStats, Flip, MAX_FLATTEN_PASSES};
pub use join::{connect_node, insert_on_edge, JoinOutcome};
pub use repair::{relocation_ttl, repair_failure, RepairOutcome};
pub use topology::Topology;
pub use views::{ping_round, FailureReport, NeighborView, NeighborViews, DEFAULT_PING_TIMEOUT};

use crate::error::{Error, Result};
use crate::ids::NodeId;

/// The twenty faces of the icosahedron over vertices `0..12`: an apex, an upper
/// pentagon `1..=5`, a lower pentagon `6..=10` and the opposite apex `11`.
pub(crate) fn icosahedron_faces() -> Vec<[u32; 3]> {
    let up = |i: u32| 1 + (i % 5);
    let lo = |i: u32| 6 + (i % 5);
    let mut faces = Vec::with_capacity(20);
    for i in 0..5 {
        faces.push([0, up(i), up(i + 1)]);
        faces.push([up(i), lo(i), lo(i + 1)]);
        faces.push([up(i), up(i + 1), lo(i + 1)]);
        faces.push([11, lo(i + 1), lo(i)]);
    }
    faces
}

/// Builds a topology whose edges are the sides of the given triangles.
pub(crate) fn topology_from_faces(faces: &[[u32; 3]]) -> Topology {
    let edges = faces.iter().flat_map(|f| {
        [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])]
            .into_iter()
            .map(|(a, b)| (NodeId(a), NodeId(b)))
    });
    Topology::from_edges(edges)
}

/// The 12-node seed network: every node has degree five.
pub fn seed_icosahedron() -> Topology {
    topology_from_faces(&icosahedron_faces())
}

/// The 6-node octahedron, the smallest graph in which every node has degree four
/// and every edge has two common neighbors.
pub fn octahedron() -> Topology {
    // Poles 0 and 5 around the equator 1-2-3-4.
    let mut faces = Vec::new();
    for i in 0..4u32 {
        let a = 1 + i;
        let b = 1 + (i + 1) % 4;
        faces.push([0, a, b]);
        faces.push([5, b, a]);
    }
    topology_from_faces(&faces)
}

/// Nodes adjacent to both `a` and `b`.
pub fn common_neighbors(t: &Topology, a: NodeId, b: NodeId) -> Result<Vec<NodeId>> {
    if a == b {
        return Err(Error::InvalidArgument(format!(
            "common neighbors of {a} with itself"
        )));
    }
    for n in [a, b] {
        if !t.is_alive(n) {
            return Err(Error::UnknownNode(n));
        }
    }
    Ok(t.common(a, b))
}

/// Result of a full invariant scan.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InvariantReport {
    /// Edges `(a, b, common)` whose endpoints do not share exactly two neighbors.
    pub violations: Vec<(NodeId, NodeId, usize)>,
    /// Connected components of the alive subgraph, each sorted, largest first.
    /// A valid network has at most one.
    pub components: Vec<Vec<NodeId>>,
    pub degree_histogram: BTreeMap<usize, usize>,
}

impl InvariantReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty() && self.components.len() <= 1
    }

    pub fn min_degree(&self) -> Option<usize> {
        self.degree_histogram.keys().next().copied()
    }
}

/// Scans every edge for the two-common-neighbors property and reports
/// connectivity over alive nodes along with the degree histogram.
pub fn check_invariant(t: &Topology) -> InvariantReport {
    let mut report = InvariantReport::default();
    for (a, b) in t.edges() {
        let c = t.common_count(a, b);
        if c != 2 {
            report.violations.push((a, b, c));
        }
    }
    for n in t.nodes() {
        *report.degree_histogram.entry(t.degree(n)).or_default() += 1;
    }
    report.components = alive_components(t);
    report
}

pub(crate) fn alive_components(t: &Topology) -> Vec<Vec<NodeId>> {
    let mut seen = vec![false; t.next_id().index()];
    let mut components = Vec::new();
    for start in t.alive_nodes() {
        if seen[start.index()] {
            continue;
        }
        seen[start.index()] = true;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in t.neighbors(u) {
                if t.is_alive(v) && !seen[v.index()] {
                    seen[v.index()] = true;
                    comp.push(v);
                    queue.push_back(v);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    components
}

/// Checks the two-common-neighbors property on every edge touching `nodes`.
pub(crate) fn locally_valid(t: &Topology, nodes: &[NodeId]) -> bool {
    nodes.iter().all(|&a| {
        t.neighbors(a)
            .iter()
            .all(|&b| t.common_count(a, b) == 2)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosahedron_shape() {
        let t = seed_icosahedron();
        assert_eq!(t.node_count(), 12);
        assert_eq!(t.edge_count(), 30);
        assert!(t.nodes().all(|n| t.degree(n) == 5));
        let faces = icosahedron_faces().len() as i64;
        assert_eq!(12 - 30 + faces, 2);
    }

    #[test]
    fn icosahedron_every_edge_has_two_commons() {
        // exhaustive over all 30 edges
        let t = seed_icosahedron();
        let mut edges = 0;
        for (a, b) in t.edges() {
            assert_eq!(common_neighbors(&t, a, b).unwrap().len(), 2);
            edges += 1;
        }
        assert_eq!(edges, 30);
    }

    #[test]
    fn octahedron_antipodes_share_four() {
        let t = octahedron();
        assert!(t.nodes().all(|n| t.degree(n) == 4));
        assert!(!t.has_edge(NodeId(0), NodeId(5)));
        let c = common_neighbors(&t, NodeId(0), NodeId(5)).unwrap();
        assert_eq!(c, vec![NodeId(1), NodeId(2), NodeId(3), NodeId(4)]);
        assert!(check_invariant(&t).is_valid());
    }

    #[test]
    fn common_neighbors_rejects_bad_arguments() {
        let t = seed_icosahedron();
        assert!(matches!(
            common_neighbors(&t, NodeId(3), NodeId(3)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            common_neighbors(&t, NodeId(3), NodeId(99)),
            Err(Error::UnknownNode(NodeId(99)))
        ));
    }

    #[test]
    fn check_invariant_on_seed_and_empty() {
        let report = check_invariant(&seed_icosahedron());
        assert!(report.is_valid());
        assert_eq!(report.degree_histogram, BTreeMap::from([(5, 12)]));
        assert_eq!(check_invariant(&Topology::new()), InvariantReport::default());
    }

    #[test]
    fn extra_chord_is_reported() {
        let mut t = seed_icosahedron();
        // 1 and 3 are two apart on the upper pentagon; the chord gives the
        // edge (1, 2) a third common neighbor
        assert!(!t.has_edge(NodeId(1), NodeId(3)));
        t.add_edge(NodeId(1), NodeId(3));
        let report = check_invariant(&t);
        assert!(report
            .violations
            .iter()
            .any(|&(a, b, c)| (a, b, c) == (NodeId(1), NodeId(2), 3)));
    }

    #[test]
    fn disconnected_components_are_reported() {
        let mut t = seed_icosahedron();
        let other = octahedron();
        let base = t.next_id().0;
        for (a, b) in other.edges() {
            for x in [a, b] {
                let id = NodeId(base + x.0);
                if !t.contains(id) {
                    t.add_node(id).unwrap();
                }
            }
            t.add_edge(NodeId(base + a.0), NodeId(base + b.0));
        }
        let report = check_invariant(&t);
        assert!(report.violations.is_empty());
        assert_eq!(report.components.len(), 2);
        assert!(!report.is_valid());
    }
}
