use rand::seq::IndexedRandom;
use rand::Rng;

use super::{PeerRole, SuperLayer, LOW_SUPER_DEGREE};
use crate::error::Error;
use crate::ids::NodeId;
use crate::mesh::Topology;
use crate::replication::ReplicaStores;

/// Quota from which an overloaded super-peer promotes an equally capable
/// sub-peer before shedding.
const PEER_PROMOTION_QUOTA: usize = 100;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RegulationReport {
    pub merges: usize,
    pub moves: usize,
    pub promotions: usize,
    /// Overloaded super-peers left without an eligible sub-peer.
    pub impossible: usize,
    pub rehomed: usize,
    pub orphan_promotions: usize,
}

impl SuperLayer {
    /// Top-down step for `sn1`: pick a random super-layer neighbor `sn2` and
    /// absorb it when `|subs(sn1)| + |subs(sn2)| < capability(sn1)`. The
    /// absorbed super-peer becomes a sub-peer of `sn1` and hands over its
    /// super-layer links. Returns the absorbed node.
    pub fn regulate_top_down<R: Rng + ?Sized>(&mut self, sn1: NodeId, stores: &ReplicaStores, rng: &mut R) -> Option<NodeId> {
        let info = self.info(sn1)?;
        let nbrs: Vec<NodeId> = info.super_neighbors.iter().copied().collect();
        let &sn2 = nbrs.choose(rng)?;
        let total = self.load(sn1) + self.load(sn2);
        if total as u64 >= self.capability(sn1).0 as u64 {
            return None;
        }
        let Some(PeerRole::Super(absorbed)) = self.roles.get(&sn2).cloned() else { return None };
        self.unlink_all(sn2);
        // sn2 is now a plain peer; make it a sub of sn1 along with its subs
        self.roles.insert(sn2, PeerRole::Orphan);
        for &m in &absorbed.sub_peers {
            if m != sn2 {
                self.roles.insert(m, PeerRole::Orphan);
            }
        }
        for &m in &absorbed.sub_peers {
            self.attach(m, sn1, stores);
        }
        for &x in &absorbed.super_neighbors {
            if x != sn1 {
                self.link(sn1, x);
            }
        }
        if self.super_degree(sn1) < LOW_SUPER_DEGREE {
            if let Some(&via) = self.info(sn1).unwrap().super_neighbors.iter().collect::<Vec<_>>().choose(rng) {
                self.acquire_super_neighbors(sn1, *via, rng);
            }
        }
        Some(sn2)
    }

    /// Bottom-up step for sub-peer `n`: look at the super-peer `sn2` of a
    /// random mesh neighbor and move there when
    /// `(|subs(sn1)| - 1) / c1 > (|subs(sn2)| + 1) / c2`.
    pub fn rebalance_bottom_up<R: Rng + ?Sized>(&mut self, t: &Topology, n: NodeId, stores: &ReplicaStores, rng: &mut R) -> bool {
        let Some(PeerRole::Sub { super_peer: sn1 }) = self.roles.get(&n).cloned() else { return false };
        let nbrs: Vec<NodeId> = t.neighbors(n).iter().copied().filter(|&m| t.is_alive(m)).collect();
        let Some(&m) = nbrs.choose(rng) else { return false };
        let Some(sn2) = self.super_of(m) else { return false };
        if sn2 == sn1 {
            return false;
        }
        let (s1, c1) = (self.load(sn1) as u64, self.capability(sn1).0 as u64);
        let (s2, c2) = (self.load(sn2) as u64, self.capability(sn2).0 as u64);
        if (s1 - 1) * c2 > (s2 + 1) * c1 {
            self.attach(n, sn2, stores);
            true
        } else {
            false
        }
    }

    /// Moves sub-peers of an overloaded `s` to super-peers with spare quota
    /// across the mesh border, repeating while the border advances. Returns
    /// how many moved.
    pub(super) fn shed(&mut self, t: &Topology, s: NodeId, stores: &ReplicaStores) -> usize {
        let mut moved = 0;
        loop {
            let before = moved;
            let subs: Vec<NodeId> = self.info(s).unwrap().sub_peers.iter().copied().filter(|&x| x != s).collect();
            for x in subs {
                if self.load(s) <= self.quota_of(s) {
                    return moved;
                }
                let target = t
                    .neighbors(x)
                    .iter()
                    .filter(|&&m| t.is_alive(m))
                    .filter_map(|&m| self.super_of(m))
                    .filter(|&b| b != s && self.load(b) < self.quota_of(b))
                    .min_by_key(|&b| (self.load(b) * 1000 / self.quota_of(b), b));
                if let Some(b) = target {
                    self.attach(x, b, stores);
                    moved += 1;
                }
            }
            if moved == before {
                return moved;
            }
        }
    }

    fn quota_of(&self, s: NodeId) -> usize {
        self.info(s).map_or(0, |i| i.quota.max(1))
    }

    /// Promotes the eligible peer nearest to `s` from outside its sub-peers and
    /// hands it the nearest of `s`'s sub-peers.
    pub(super) fn promote_near<R: Rng + ?Sized>(&mut self, t: &Topology, s: NodeId, stores: &ReplicaStores, rng: &mut R) -> Option<NodeId> {
        let eligible =
            |v: NodeId, r: &PeerRole| matches!(r, PeerRole::Sub { super_peer } if *super_peer != s) && self.capability(v).quota() >= 2;
        let n2 = *self.nearest_with(t, s, 1, eligible).first()?;
        self.detach(n2, stores);
        self.make_super(n2);
        let quota = self.info(n2).unwrap().quota;
        let excess = self.load(s) - self.quota_of(s);
        let claim = self.nearest_with(t, n2, (quota - 1).min(excess), |_, r| *r == PeerRole::Sub { super_peer: s });
        for m in claim {
            self.attach(m, n2, stores);
        }
        self.acquire_super_neighbors(n2, s, rng);
        Some(n2)
    }

    /// Brings every super-peer within quota: shed sub-peers to neighbors with
    /// room, else promote its best sub-peer, else promote the nearest eligible
    /// outsider. Large super-peers holding an equal sub-peer promote it first. Super-peers for which all three fail stay
    /// overloaded. Returns (promotions, super-peers left overloaded).
    pub(super) fn resolve_overloads<R: Rng + ?Sized>(&mut self, t: &Topology, stores: &ReplicaStores, rng: &mut R) -> (usize, usize) {
        let mut promotions = 0;
        let mut stuck = std::collections::BTreeSet::new();
        loop {
            let over = self.supers().find(|&s| !stuck.contains(&s) && self.load(s) > self.quota_of(s));
            let Some(s) = over else { break };
            let promote_first = self.quota_of(s) >= PEER_PROMOTION_QUOTA
                && self.best_sub(s).is_some_and(|b| self.capability(b) >= self.capability(s));
            if !promote_first
                && self.shed(t, s, stores) > 0
                && self.load(s) <= self.quota_of(s)
            {
                continue;
            }
            match self.promote(t, s, stores, rng) {
                Ok(_) => promotions += 1,
                Err(Error::PromotionImpossible(_)) => {
                    if self.promote_near(t, s, stores, rng).is_some() {
                        promotions += 1;
                    } else {
                        stuck.insert(s);
                    }
                }
                Err(_) => break,
            }
        }
        (promotions, stuck.len())
    }

    /// One regulation tick: top-down merges, bottom-up moves, orphan
    /// re-homing, then promotions until quotas hold. Indexes are rebuilt last.
    pub fn regulation_tick<R: Rng + ?Sized>(&mut self, t: &Topology, stores: &ReplicaStores, rng: &mut R) -> RegulationReport {
        let mut report = RegulationReport::default();
        let supers: Vec<NodeId> = self.supers().collect();
        for s in supers {
            if self.is_super(s) && self.regulate_top_down(s, stores, rng).is_some() {
                report.merges += 1;
            }
        }
        let subs: Vec<NodeId> = self
            .roles
            .iter()
            .filter(|(_, r)| matches!(r, PeerRole::Sub { .. }))
            .map(|(&n, _)| n)
            .collect();
        for n in subs {
            if self.rebalance_bottom_up(t, n, stores, rng) {
                report.moves += 1;
            }
        }
        report.rehomed += self.rehome_orphans(t, stores);
        if report.rehomed == 0 && self.orphans().next().is_some() && self.promote_orphan(t, stores, rng).is_some() {
            report.orphan_promotions += 1;
        }
        let (p, i) = self.resolve_overloads(t, stores, rng);
        report.promotions = p;
        report.impossible = i;
        self.refresh_indexes(stores);
        report
    }
}
