use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;

use super::SuperLayer;
use crate::ids::{DataId, NodeId};
use crate::mesh::Topology;

/// Cap on the mesh walk an orphan performs to find a super-peer.
pub const MESH_WALK_LIMIT: u32 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Query {
    pub id: u64,
    pub origin: NodeId,
    pub target: DataId,
    /// Super-layer hops allowed after the first super-peer.
    pub ttl: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryOutcome {
    pub query: Query,
    /// Hosts named by the answering super-peer's index; empty when unanswered.
    pub hosts: BTreeSet<NodeId>,
    pub answered_by: Option<NodeId>,
    pub super_hops: u32,
    pub mesh_hops: u32,
}

impl QueryOutcome {
    pub fn answered(&self) -> bool {
        self.answered_by.is_some()
    }

    /// `queryId,target,answered,superHops,meshHops` row.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.query.id,
            self.query.target.0,
            self.answered() as u8,
            self.super_hops,
            self.mesh_hops
        )
    }
}

impl SuperLayer {
    /// Routes a query: the origin hands it to its super-peer (an orphan first
    /// walks the mesh at random until it meets a node that has one), which
    /// answers from its index or forwards it to a random super-layer neighbor,
    /// up to `ttl` forwards.
    pub fn route_query<R: Rng + ?Sized>(&self, t: &Topology, q: Query, rng: &mut R) -> QueryOutcome {
        let mut out = QueryOutcome {
            query: q,
            hosts: BTreeSet::new(),
            answered_by: None,
            super_hops: 0,
            mesh_hops: 0,
        };
        let mut at = q.origin;
        let mut cur = loop {
            if let Some(s) = self.super_of(at) {
                break s;
            }
            if out.mesh_hops >= MESH_WALK_LIMIT {
                return out;
            }
            let nbrs: Vec<NodeId> = t.neighbors(at).iter().copied().filter(|&m| t.is_alive(m)).collect();
            match nbrs.choose(rng) {
                Some(&m) => at = m,
                None => return out,
            }
            out.mesh_hops += 1;
        };
        loop {
            let info = self.info(cur).expect("routing through a super-peer");
            if let Some(hosts) = info.index.get(&q.target).filter(|h| !h.is_empty()) {
                out.hosts = hosts.clone();
                out.answered_by = Some(cur);
                return out;
            }
            if out.super_hops >= q.ttl {
                return out;
            }
            let nbrs: Vec<NodeId> = info.super_neighbors.iter().copied().collect();
            match nbrs.choose(rng) {
                Some(&m) => cur = m,
                None => return out,
            }
            out.super_hops += 1;
        }
    }
}
