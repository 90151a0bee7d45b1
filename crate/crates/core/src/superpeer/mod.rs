//! The super-peer search layer.
//!
//! Every node is either a sub-peer attached to one super-peer or a super-peer
//! itself. A super-peer indexes the items held by its sub-peers and forwards
//! queries at random over the super layer, a separate graph linking the
//! super-peers. Overloaded super-peers promote their best-provisioned sub-peer;
//! underloaded neighbors merge; sub-peers drift toward less loaded super-peers
//! of their mesh neighbors.

mod capability;
mod query;
mod regulation;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::Rng;

pub use capability::{Capability, CapabilityDistribution};
pub use query::{Query, QueryOutcome, MESH_WALK_LIMIT};
pub use regulation::RegulationReport;

use crate::error::{Error, Result};
use crate::ids::{DataId, NodeId};
use crate::mesh::Topology;
use crate::replication::ReplicaStores;
use crate::spiral::{SpiralWalk, UNLIMITED};

/// Super-layer degree below which a super-peer looks for more neighbors, and
/// the degree it tries to reach.
pub const LOW_SUPER_DEGREE: usize = 4;

/// Length of the random walk used to find new super-layer neighbors.
pub const ACQUIRE_WALK_STEPS: usize = 16;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SuperInfo {
    /// Managed peers, the super-peer itself included.
    pub sub_peers: BTreeSet<NodeId>,
    pub super_neighbors: BTreeSet<NodeId>,
    pub index: BTreeMap<DataId, BTreeSet<NodeId>>,
    pub quota: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PeerRole {
    Sub { super_peer: NodeId },
    Super(SuperInfo),
    /// Lost its super-peer and has not found a new one yet.
    Orphan,
}

#[derive(Clone, Debug, Default)]
pub struct SuperLayer {
    roles: BTreeMap<NodeId, PeerRole>,
    caps: BTreeMap<NodeId, Capability>,
}

impl SuperLayer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a layer over an existing network: the best-provisioned node
    /// (lowest id on ties) manages everyone, then promotions split the load
    /// until every super-peer is within quota or no promotion is possible.
    pub fn bootstrap<R: Rng + ?Sized>(
        t: &Topology,
        caps: &BTreeMap<NodeId, Capability>,
        stores: &ReplicaStores,
        rng: &mut R,
    ) -> Self {
        let mut layer = SuperLayer::new();
        let Some(first) = t
            .alive_nodes()
            .max_by(|a, b| caps.get(a).cmp(&caps.get(b)).then(b.cmp(a)))
        else {
            return layer;
        };
        for n in t.alive_nodes() {
            layer.caps.insert(n, caps.get(&n).copied().unwrap_or_default());
        }
        layer.make_super(first);
        for n in t.alive_nodes().filter(|&n| n != first) {
            layer.roles.insert(n, PeerRole::Orphan);
            layer.attach(n, first, stores);
        }
        layer.resolve_overloads(t, stores, rng);
        layer
    }

    pub fn role(&self, n: NodeId) -> Option<&PeerRole> {
        self.roles.get(&n)
    }

    pub fn roles(&self) -> impl Iterator<Item = (NodeId, &PeerRole)> {
        self.roles.iter().map(|(&n, r)| (n, r))
    }

    pub fn capability(&self, n: NodeId) -> Capability {
        self.caps.get(&n).copied().unwrap_or_default()
    }

    pub fn is_super(&self, n: NodeId) -> bool {
        matches!(self.roles.get(&n), Some(PeerRole::Super(_)))
    }

    pub fn info(&self, n: NodeId) -> Option<&SuperInfo> {
        match self.roles.get(&n) {
            Some(PeerRole::Super(info)) => Some(info),
            _ => None,
        }
    }

    fn info_mut(&mut self, n: NodeId) -> Option<&mut SuperInfo> {
        match self.roles.get_mut(&n) {
            Some(PeerRole::Super(info)) => Some(info),
            _ => None,
        }
    }

    /// The super-peer responsible for `n` (itself for a super-peer).
    pub fn super_of(&self, n: NodeId) -> Option<NodeId> {
        match self.roles.get(&n)? {
            PeerRole::Sub { super_peer } => Some(*super_peer),
            PeerRole::Super(_) => Some(n),
            PeerRole::Orphan => None,
        }
    }

    pub fn supers(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.roles
            .iter()
            .filter(|(_, r)| matches!(r, PeerRole::Super(_)))
            .map(|(&n, _)| n)
    }

    pub fn super_count(&self) -> usize {
        self.supers().count()
    }

    pub fn orphans(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.roles
            .iter()
            .filter(|(_, r)| matches!(r, PeerRole::Orphan))
            .map(|(&n, _)| n)
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn load(&self, s: NodeId) -> usize {
        self.info(s).map_or(0, |i| i.sub_peers.len())
    }

    pub fn super_degree(&self, s: NodeId) -> usize {
        self.info(s).map_or(0, |i| i.super_neighbors.len())
    }

    fn make_super(&mut self, n: NodeId) {
        let quota = self.capability(n).quota();
        self.roles.insert(
            n,
            PeerRole::Super(SuperInfo {
                sub_peers: BTreeSet::from([n]),
                quota,
                ..SuperInfo::default()
            }),
        );
    }

    /// Hands `n` (a sub-peer or orphan) to super-peer `s` and indexes its items.
    fn attach(&mut self, n: NodeId, s: NodeId, stores: &ReplicaStores) {
        self.detach(n, stores);
        self.roles.insert(n, PeerRole::Sub { super_peer: s });
        let items: Vec<DataId> = stores.get(n).map(|st| st.items.iter().copied().collect()).unwrap_or_default();
        let info = self.info_mut(s).expect("attach to a super-peer");
        info.sub_peers.insert(n);
        for d in items {
            info.index.entry(d).or_default().insert(n);
        }
    }

    /// Removes a sub-peer from its super-peer, leaving it orphaned.
    fn detach(&mut self, n: NodeId, stores: &ReplicaStores) {
        let Some(PeerRole::Sub { super_peer }) = self.roles.get(&n).cloned() else { return };
        self.roles.insert(n, PeerRole::Orphan);
        let items: Vec<DataId> = stores.get(n).map(|st| st.items.iter().copied().collect()).unwrap_or_default();
        if let Some(info) = self.info_mut(super_peer) {
            info.sub_peers.remove(&n);
            for d in items {
                if let Some(h) = info.index.get_mut(&d) {
                    h.remove(&n);
                    if h.is_empty() {
                        info.index.remove(&d);
                    }
                }
            }
        }
    }

    fn link(&mut self, a: NodeId, b: NodeId) {
        if a == b || !self.is_super(a) || !self.is_super(b) {
            return;
        }
        self.info_mut(a).unwrap().super_neighbors.insert(b);
        self.info_mut(b).unwrap().super_neighbors.insert(a);
    }

    fn unlink_all(&mut self, s: NodeId) -> Vec<NodeId> {
        let Some(info) = self.info_mut(s) else { return Vec::new() };
        let former: Vec<NodeId> = std::mem::take(&mut info.super_neighbors).into_iter().collect();
        for &m in &former {
            if let Some(i) = self.info_mut(m) {
                i.super_neighbors.remove(&s);
            }
        }
        former
    }

    /// Replaces `sub`'s entries in `super_peer`'s index with `items`.
    pub fn index_update(&mut self, super_peer: NodeId, sub: NodeId, items: &BTreeSet<DataId>) {
        let Some(info) = self.info_mut(super_peer) else { return };
        if !info.sub_peers.contains(&sub) {
            return;
        }
        info.index.retain(|d, hosts| {
            if !items.contains(d) {
                hosts.remove(&sub);
            }
            !hosts.is_empty()
        });
        for &d in items {
            info.index.entry(d).or_default().insert(sub);
        }
    }

    /// Rebuilds every index from the stores of the sub-peers.
    pub fn refresh_indexes(&mut self, stores: &ReplicaStores) {
        for role in self.roles.values_mut() {
            if let PeerRole::Super(info) = role {
                info.index.clear();
                for &n in &info.sub_peers {
                    if let Some(st) = stores.get(n) {
                        for &d in &st.items {
                            info.index.entry(d).or_default().insert(n);
                        }
                    }
                }
            }
        }
    }

    /// Admits a joining node through `entry`: it becomes a sub-peer of the
    /// entry's super-peer, which never refuses and promotes if overloaded.
    pub fn add_peer<R: Rng + ?Sized>(
        &mut self,
        t: &Topology,
        n: NodeId,
        cap: Capability,
        entry: NodeId,
        stores: &ReplicaStores,
        rng: &mut R,
    ) {
        self.caps.insert(n, cap);
        self.roles.insert(n, PeerRole::Orphan);
        if self.roles.len() == 1 {
            self.make_super(n);
            return;
        }
        if let Some(s) = self.super_of(entry) {
            self.attach(n, s, stores);
            if self.load(s) > self.info(s).unwrap().quota {
                let _ = self.promote(t, s, stores, rng);
            }
        }
    }

    /// Forgets a departed node. A failed super-peer orphans its sub-peers,
    /// which then re-home through borderline peers.
    pub fn remove_peer<R: Rng + ?Sized>(&mut self, t: &Topology, n: NodeId, stores: &ReplicaStores, rng: &mut R) {
        match self.roles.get(&n) {
            Some(PeerRole::Super(_)) => self.handle_super_failure(t, n, stores, rng),
            Some(_) => {
                self.detach(n, stores);
                self.roles.remove(&n);
            }
            None => {}
        }
        self.caps.remove(&n);
    }

    /// Promotes the best-provisioned sub-peer of an overloaded super-peer.
    ///
    /// Only sub-peers able to manage at least one peer besides themselves are
    /// eligible. The new super-peer claims its nearest non-super nodes in mesh
    /// order, found by a spiral walk, up to its quota, and acquires super-layer
    /// neighbors by a random walk through the promoting super-peer.
    pub fn promote<R: Rng + ?Sized>(
        &mut self,
        t: &Topology,
        overloaded: NodeId,
        stores: &ReplicaStores,
        rng: &mut R,
    ) -> Result<NodeId> {
        if !self.is_super(overloaded) {
            return Err(Error::UnknownNode(overloaded));
        }
        let n2 = self.best_sub(overloaded).ok_or(Error::PromotionImpossible(overloaded))?;
        self.detach(n2, stores);
        self.make_super(n2);
        let quota = self.info(n2).unwrap().quota;
        let claim = self.nearest_with(t, n2, quota - 1, |_, r| !matches!(r, PeerRole::Super(_)));
        for m in claim {
            self.attach(m, n2, stores);
        }
        self.acquire_super_neighbors(n2, overloaded, rng);
        Ok(n2)
    }

    /// The sub-peer a promotion would pick: highest capability, lowest id on
    /// ties, able to manage at least one peer besides itself.
    pub fn best_sub(&self, s: NodeId) -> Option<NodeId> {
        self.info(s)?
            .sub_peers
            .iter()
            .copied()
            .filter(|&m| m != s && self.capability(m).quota() >= 2)
            .max_by(|a, b| self.capability(*a).cmp(&self.capability(*b)).then(b.cmp(a)))
    }

    /// Up to `k` nearest nodes to `n` with a role accepted by `pred`, in
    /// spiral-walk order. Once something matched, the walk gives up after a
    /// ring without matches.
    fn nearest_with<F: Fn(NodeId, &PeerRole) -> bool>(&self, t: &Topology, n: NodeId, k: usize, pred: F) -> Vec<NodeId> {
        let mut out = Vec::new();
        if k == 0 {
            return out;
        }
        let Ok(mut walk) = SpiralWalk::new(t, n, UNLIMITED) else { return out };
        let mut none = |_| None;
        let mut offsets: Vec<usize> = Vec::new();
        walk.start(&mut none);
        loop {
            let more = walk.advance(&mut none);
            let mut fresh: Vec<(u32, NodeId)> = Vec::new();
            for (i, w) in walk.walkers().iter().enumerate() {
                if offsets.len() <= i {
                    offsets.push(0);
                }
                fresh.extend(w.visited[offsets[i]..].iter().map(|&v| (walk.distance(v).unwrap_or(u32::MAX), v)));
                offsets[i] = w.visited.len();
            }
            fresh.sort_unstable();
            fresh.dedup();
            let mut matched = false;
            for (_, v) in fresh {
                if v != n && self.roles.get(&v).is_some_and(|r| pred(v, r)) {
                    matched = true;
                    out.push(v);
                    if out.len() == k {
                        return out;
                    }
                }
            }
            if !more || (!matched && !out.is_empty()) {
                return out;
            }
        }
    }

    /// Sends a random walker over the super layer starting at `via`. Visited
    /// super-peers of low degree link to `s` until `s` reaches the target
    /// degree; if nobody links, `s` links to `via` itself.
    pub fn acquire_super_neighbors<R: Rng + ?Sized>(&mut self, s: NodeId, via: NodeId, rng: &mut R) {
        if !self.is_super(s) {
            return;
        }
        let mut cur = via;
        for _ in 0..ACQUIRE_WALK_STEPS {
            if self.super_degree(s) >= LOW_SUPER_DEGREE || !self.is_super(cur) {
                break;
            }
            if cur != s && self.super_degree(cur) < LOW_SUPER_DEGREE {
                self.link(cur, s);
            }
            let next: Vec<NodeId> = self.info(cur).unwrap().super_neighbors.iter().copied().filter(|&m| m != s).collect();
            match next.choose(rng) {
                Some(&m) => cur = m,
                None => break,
            }
        }
        if self.super_degree(s) == 0 && via != s {
            self.link(s, via);
        }
    }

    /// Super-peers reachable from `s`'s sub-peers by one mesh hop, other than
    /// `s` itself.
    fn border_supers(&self, t: &Topology, s: NodeId) -> BTreeSet<NodeId> {
        let Some(info) = self.info(s) else { return BTreeSet::new() };
        info.sub_peers
            .iter()
            .flat_map(|&n| t.neighbors(n).iter().copied())
            .filter(|&m| t.is_alive(m))
            .filter_map(|m| self.super_of(m))
            .filter(|&x| x != s)
            .collect()
    }

    /// Tops up the super-layer degree of `s` by a random walk from one of its
    /// neighbors; an isolated super-peer first links to a super-peer met across
    /// its mesh border.
    fn heal_degree<R: Rng + ?Sized>(&mut self, t: &Topology, s: NodeId, rng: &mut R) {
        if !self.is_super(s) || self.super_degree(s) >= LOW_SUPER_DEGREE {
            return;
        }
        if self.super_degree(s) == 0 {
            let border: Vec<NodeId> = self.border_supers(t, s).into_iter().collect();
            let fallback = border.first().copied().or_else(|| self.supers().find(|&x| x != s));
            if let Some(b) = fallback {
                self.link(s, b);
            }
        }
        let nbrs: Vec<NodeId> = self.info(s).unwrap().super_neighbors.iter().copied().collect();
        if let Some(&via) = nbrs.choose(rng) {
            self.acquire_super_neighbors(s, via, rng);
        }
    }

    /// A super-peer departed without notice: its sub-peers become orphans, its
    /// former super-layer neighbors are chained together so the layer stays in
    /// one piece and top up their degree, and orphans with a mesh neighbor that
    /// still has a super-peer re-home at once.
    pub fn handle_super_failure<R: Rng + ?Sized>(&mut self, t: &Topology, failed: NodeId, stores: &ReplicaStores, rng: &mut R) {
        let Some(PeerRole::Super(info)) = self.roles.get(&failed).cloned() else { return };
        let former = self.unlink_all(failed);
        self.roles.remove(&failed);
        for &n in &info.sub_peers {
            if n != failed {
                self.roles.insert(n, PeerRole::Orphan);
            }
        }
        for w in former.windows(2) {
            self.link(w[0], w[1]);
        }
        for &m in &former {
            self.heal_degree(t, m, rng);
        }
        self.rehome_orphans(t, stores);
    }

    /// One round of borderline re-homing: every orphan with an alive mesh
    /// neighbor that has a super-peer joins the least loaded such super-peer
    /// (lowest id on ties). Decisions are taken on the state before the round,
    /// so orphanhood recedes one hop per round. Returns how many re-homed.
    pub fn rehome_orphans(&mut self, t: &Topology, stores: &ReplicaStores) -> usize {
        let orphans: Vec<NodeId> = self.orphans().collect();
        let mut moves = Vec::new();
        for n in orphans {
            let best = t
                .neighbors(n)
                .iter()
                .filter(|&&m| t.is_alive(m))
                .filter_map(|&m| self.super_of(m))
                .min_by(|&a, &b| {
                    let (la, ca) = (self.load(a) as u64, self.capability(a).0 as u64);
                    let (lb, cb) = (self.load(b) as u64, self.capability(b).0 as u64);
                    (la * cb).cmp(&(lb * ca)).then(a.cmp(&b))
                });
            if let Some(s) = best {
                moves.push((n, s));
            }
        }
        for &(n, s) in &moves {
            self.attach(n, s, stores);
        }
        moves.len()
    }

    /// When orphans remain but none borders a super-peer, the best-provisioned
    /// orphan becomes a super-peer and gathers its nearest orphans.
    pub fn promote_orphan<R: Rng + ?Sized>(&mut self, t: &Topology, stores: &ReplicaStores, rng: &mut R) -> Option<NodeId> {
        let n = self
            .orphans()
            .filter(|&n| t.is_alive(n))
            .max_by(|a, b| self.capability(*a).cmp(&self.capability(*b)).then(b.cmp(a)))?;
        let via = self.supers().next();
        self.make_super(n);
        let quota = self.info(n).unwrap().quota;
        let claim = self.nearest_with(t, n, quota.saturating_sub(1), |_, r| matches!(r, PeerRole::Orphan));
        for m in claim {
            self.attach(m, n, stores);
        }
        match via {
            Some(v) => self.acquire_super_neighbors(n, v, rng),
            None => self.heal_degree(t, n, rng),
        }
        Some(n)
    }

    /// Role totality and quota checks: every alive node has a role, every
    /// sub-peer's super-peer is an alive super-peer listing it, and (when
    /// `check_quota`) no super-peer exceeds its quota. Returns the problems.
    pub fn check_invariants(&self, t: &Topology, check_quota: bool) -> Vec<String> {
        let mut problems = Vec::new();
        for n in t.alive_nodes() {
            if !self.roles.contains_key(&n) {
                problems.push(format!("{n} has no role"));
            }
        }
        for (&n, role) in &self.roles {
            if !t.is_alive(n) {
                problems.push(format!("{n} has a role but is not alive"));
            }
            match role {
                PeerRole::Sub { super_peer } => match self.info(*super_peer) {
                    Some(info) if info.sub_peers.contains(&n) && t.is_alive(*super_peer) => {}
                    _ => problems.push(format!("{n} points to {super_peer}, which does not manage it")),
                },
                PeerRole::Super(info) => {
                    if !info.sub_peers.contains(&n) {
                        problems.push(format!("super-peer {n} does not manage itself"));
                    }
                    for &m in &info.sub_peers {
                        if m != n && self.roles.get(&m) != Some(&PeerRole::Sub { super_peer: n }) {
                            problems.push(format!("super-peer {n} lists {m}, which is not its sub-peer"));
                        }
                    }
                    for &m in &info.super_neighbors {
                        if !self.info(m).is_some_and(|i| i.super_neighbors.contains(&n)) {
                            problems.push(format!("super link {n}-{m} is not symmetric"));
                        }
                    }
                    if check_quota && info.sub_peers.len() > info.quota.max(1) {
                        problems.push(format!(
                            "super-peer {n} manages {} peers, quota {}",
                            info.sub_peers.len(),
                            info.quota
                        ));
                    }
                }
                PeerRole::Orphan => {}
            }
        }
        problems
    }

    /// Super-peers managing more peers than their quota allows.
    pub fn overloaded(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.roles.iter().filter_map(|(&n, r)| match r {
            PeerRole::Super(info) if info.sub_peers.len() > info.quota.max(1) => Some(n),
            _ => None,
        })
    }

    /// Whether the super layer forms a single connected graph.
    pub fn is_connected(&self) -> bool {
        let supers: Vec<NodeId> = self.supers().collect();
        let Some(&start) = supers.first() else { return true };
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(s) = stack.pop() {
            for &m in &self.info(s).unwrap().super_neighbors {
                if seen.insert(m) {
                    stack.push(m);
                }
            }
        }
        seen.len() == supers.len()
    }

    /// `superId,capability,numSubs,superDegree`, one row per super-peer.
    pub fn snapshot_csv(&self) -> String {
        let mut out = String::from("superId,capability,numSubs,superDegree\n");
        for s in self.supers() {
            let info = self.info(s).unwrap();
            let _ = writeln!(
                out,
                "{s},{},{},{}",
                self.capability(s).0,
                info.sub_peers.len(),
                info.super_neighbors.len()
            );
        }
        out
    }
}

#[cfg(test)]
mod tests;
