use std::collections::{BTreeMap, BTreeSet};

use super::Topology;
use crate::ids::NodeId;

/// Ticks without a ping after which a neighbor is declared failed.
pub const DEFAULT_PING_TIMEOUT: u64 = 3;

/// What one node knows about its surroundings from ping messages: its
/// neighbors, their neighbors, and when each neighbor was last heard.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NeighborView {
    pub owner: NodeId,
    pub neighbors: Vec<NodeId>,
    pub second_hop: BTreeMap<NodeId, Vec<NodeId>>,
    pub last_ping: BTreeMap<NodeId, u64>,
}

/// A neighbor failure detected by the ping protocol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FailureReport {
    pub failed: NodeId,
    pub tick: u64,
    /// Alive former neighbors that noticed the silence, in id order.
    pub reporters: Vec<NodeId>,
    /// The failed node's neighbor list as last advertised to the reporters.
    pub former_neighbors: Vec<NodeId>,
}

#[derive(Clone, Debug)]
pub struct NeighborViews {
    views: BTreeMap<NodeId, NeighborView>,
    timeout: u64,
    reported: BTreeSet<NodeId>,
}

impl Default for NeighborViews {
    fn default() -> Self {
        Self::new(DEFAULT_PING_TIMEOUT)
    }
}

impl NeighborViews {
    pub fn new(timeout: u64) -> Self {
        NeighborViews {
            views: BTreeMap::new(),
            timeout,
            reported: BTreeSet::new(),
        }
    }

    pub fn timeout(&self) -> u64 {
        self.timeout
    }

    pub fn get(&self, n: NodeId) -> Option<&NeighborView> {
        self.views.get(&n)
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    /// Forgets a failure once its repair is settled, so a later failure with
    /// the same neighbors is not masked.
    pub fn clear_report(&mut self, n: NodeId) {
        self.reported.remove(&n);
    }
}

/// One ping period at tick `now`.
///
/// Every alive node hears from its alive neighbors, which refreshes their
/// last-ping stamp and the neighbor list they advertise. A dead neighbor keeps
/// its last advertised list and is reported once its silence exceeds the
/// timeout: a node that stops answering at tick `T` (last heard at `T - 1`) is
/// reported at `T + timeout`. Each failure is reported once, with reports
/// ordered by failed id so repairs run in a fixed sequence.
pub fn ping_round(t: &Topology, views: &mut NeighborViews, now: u64) -> Vec<FailureReport> {
    views.views.retain(|&owner, _| t.is_alive(owner));
    views.reported.retain(|&n| t.contains(n));

    let mut silent: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for owner in t.alive_nodes() {
        let view = views.views.entry(owner).or_insert_with(|| NeighborView {
            owner,
            ..NeighborView::default()
        });
        let nbrs = t.neighbors(owner);
        if view.neighbors != nbrs {
            view.neighbors.clear();
            view.neighbors.extend_from_slice(nbrs);
            view.second_hop.retain(|m, _| nbrs.binary_search(m).is_ok());
            view.last_ping.retain(|m, _| nbrs.binary_search(m).is_ok());
        }
        for &m in nbrs {
            if t.is_alive(m) {
                view.last_ping.insert(m, now);
                let list = view.second_hop.entry(m).or_default();
                if list.as_slice() != t.neighbors(m) {
                    list.clear();
                    list.extend_from_slice(t.neighbors(m));
                }
            } else {
                // first seen already dead: the silence starts now
                let last = *view.last_ping.entry(m).or_insert(now);
                view.second_hop.entry(m).or_insert_with(|| t.neighbors(m).to_vec());
                if now.saturating_sub(last) > views.timeout {
                    silent.entry(m).or_default().push(owner);
                }
            }
        }
    }

    let mut reports = Vec::new();
    for (failed, reporters) in silent {
        if views.reported.contains(&failed) || t.flagged_holes().contains(&failed) {
            continue;
        }
        views.reported.insert(failed);
        let former_neighbors = views.views[&reporters[0]].second_hop[&failed].clone();
        reports.push(FailureReport {
            failed,
            tick: now,
            reporters,
            former_neighbors,
        });
    }
    reports
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::build_geode;
    use crate::mesh::{check_invariant, repair_failure, seed_icosahedron};
    use crate::rng_from_seed;

    #[test]
    fn static_round_mirrors_adjacency() {
        let t = build_geode(1).unwrap();
        let mut views = NeighborViews::default();
        assert!(ping_round(&t, &mut views, 0).is_empty());
        assert_eq!(views.len(), t.node_count());
        for n in t.nodes() {
            let v = views.get(n).unwrap();
            assert_eq!(v.neighbors, t.neighbors(n));
            let keys: Vec<_> = v.second_hop.keys().copied().collect();
            assert_eq!(keys, t.neighbors(n));
            for (m, list) in &v.second_hop {
                assert_eq!(list.as_slice(), t.neighbors(*m));
            }
        }
    }

    #[test]
    fn failure_reported_after_timeout() {
        let mut t = seed_icosahedron();
        let mut views = NeighborViews::default();
        let death = 10;
        for now in 0..death {
            assert!(ping_round(&t, &mut views, now).is_empty());
        }
        let former = t.neighbors(NodeId(6)).to_vec();
        t.mark_dead(NodeId(6)).unwrap();
        for now in death..death + DEFAULT_PING_TIMEOUT {
            assert!(ping_round(&t, &mut views, now).is_empty(), "early report at {now}");
        }
        let reports = ping_round(&t, &mut views, death + DEFAULT_PING_TIMEOUT);
        assert_eq!(reports.len(), 1);
        let r = &reports[0];
        assert_eq!(r.failed, NodeId(6));
        assert_eq!(r.tick, death + 3);
        assert_eq!(r.reporters, former);
        assert_eq!(r.former_neighbors, former);
        // reported only once
        assert!(ping_round(&t, &mut views, death + 4).is_empty());
    }

    #[test]
    fn adjacent_failures_repaired_in_id_order() {
        let mut t = build_geode(3).unwrap();
        let mut views = NeighborViews::default();
        let mut rng = rng_from_seed(2);
        ping_round(&t, &mut views, 0);
        let a = NodeId(300);
        let b = t.neighbors(a)[2];
        t.mark_dead(a).unwrap();
        t.mark_dead(b).unwrap();
        let mut reports = Vec::new();
        for now in 1..=4 {
            reports.extend(ping_round(&t, &mut views, now));
        }
        let failed: Vec<_> = reports.iter().map(|r| r.failed).collect();
        assert_eq!(failed, vec![a.min(b), a.max(b)]);
        for r in &reports {
            repair_failure(&mut t, r.failed, &mut rng).unwrap();
        }
        assert_eq!(t.dead_nodes().count(), 0);
        let report = check_invariant(&t);
        assert!(report.is_valid(), "{report:?}");
    }
}
