//! Repulsion-based replica placement.
//!
//! Every hosted replica periodically scans the nodes within its repulsive
//! radius `r` and scores the other replicas of the same item it finds, each
//! weighted by `(r - δ + 1)²`. Crowded replicas delete themselves, isolated
//! ones clone onto a quiet spot at distance `r`, and the rest drift to the
//! least crowded neighbor. Replicas thereby repel each other until they cover
//! the mesh evenly, with a total count proportional to the network size.

mod distance;
mod store;

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

pub use distance::{Ball, BfsDistances, DistanceProvider, SpiralDistances};
pub use store::{evict, ReplicaStore, ReplicaStores};

use crate::error::{Error, Result};
use crate::ids::{DataId, NodeId};
use crate::mesh::Topology;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReplicationParams {
    /// Repulsive radius in hops.
    pub r: u32,
    pub max_score: u64,
    /// How many nodes at distance `r` are examined before cloning.
    pub t: usize,
}

impl Default for ReplicationParams {
    fn default() -> Self {
        ReplicationParams {
            r: 8,
            max_score: 80,
            t: 4,
        }
    }
}

impl ReplicationParams {
    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.max_score == 0 || self.t == 0 {
            return Err(Error::Config(format!(
                "replication needs r >= 1, maxScore > 0 and t >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Remove,
    Clone(NodeId),
    Move(NodeId),
    Stay,
}

/// Per-round counts for the convergence series.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RoundReport {
    pub creates: usize,
    pub moves: usize,
    pub removes: usize,
    /// Replicas dropped by full caches receiving a clone or a move.
    pub evictions: usize,
    /// Replicas that kept still because their scan was interrupted.
    pub deferred: usize,
}

impl RoundReport {
    pub fn changes(&self) -> usize {
        self.creates + self.moves + self.removes
    }
}

/// `Σ (r - δ + 1)²` over the replicas of `d` inside `ball` (radius `r` around
/// its center), skipping the nodes in `omega`.
pub fn score(ball: &Ball, stores: &ReplicaStores, d: DataId, r: u32, omega: &[NodeId]) -> u64 {
    let weight = |delta: u32| {
        let w = (r - delta + 1) as u64;
        w * w
    };
    let Some(hosts) = stores.hosts(d) else { return 0 };
    let counted = |n: &NodeId| !omega.contains(n);
    if hosts.len() <= ball.len() {
        hosts
            .iter()
            .filter(|n| counted(n))
            .filter_map(|&h| ball.distance(h))
            .filter(|&delta| delta <= r)
            .map(weight)
            .sum()
    } else {
        ball.entries()
            .iter()
            .filter(|&&(n, delta)| delta <= r && counted(&n) && hosts.contains(&n))
            .map(|&(_, delta)| weight(delta))
            .sum()
    }
}

/// Score of `d` around `n`, scanning with `provider`. `None` when the scan was
/// interrupted.
pub fn score_at<P: DistanceProvider + ?Sized>(
    t: &Topology,
    stores: &ReplicaStores,
    provider: &mut P,
    n: NodeId,
    d: DataId,
    r: u32,
    omega: &[NodeId],
) -> Option<u64> {
    provider.ball(t, n, r).map(|b| score(&b, stores, d, r, omega))
}

/// Decides what the replica of `d` hosted at `n` does next.
///
/// The replica's own copy is excluded from its score `S`. If `S` exceeds
/// `maxScore` it is removed; if no other replica is in range it clones onto
/// the least crowded of `t` random nodes at distance exactly `r` (the
/// outermost ring when the network is smaller than that); otherwise it moves
/// to the neighbor with the lowest score, staying on ties. A replica whose
/// scan was interrupted stays.
pub fn replicate_step<P, R>(
    t: &Topology,
    stores: &ReplicaStores,
    provider: &mut P,
    n: NodeId,
    d: DataId,
    params: &ReplicationParams,
    rng: &mut R,
) -> Result<Decision>
where
    P: DistanceProvider + ?Sized,
    R: Rng + ?Sized,
{
    if !stores.contains(n, d) {
        return Err(Error::InvalidArgument(format!("{n} does not host {d}")));
    }
    let r = params.r;
    let Some(ball) = provider.ball(t, n, r) else {
        return Ok(Decision::Stay);
    };
    let s = score(&ball, stores, d, r, &[n]);
    if s > params.max_score {
        return Ok(Decision::Remove);
    }
    if s == 0 {
        let outer = r.min(ball.max_distance());
        let ring: Vec<NodeId> = ball
            .ring(outer)
            .filter(|&c| c != n && t.is_alive(c) && !stores.contains(c, d) && stores.get(c).is_some())
            .collect();
        let sample: Vec<NodeId> = ring.choose_multiple(rng, params.t.min(ring.len())).copied().collect();
        let best = sample
            .into_iter()
            .filter_map(|c| score_at(t, stores, provider, c, d, r, &[]).map(|sc| (sc, c)))
            .min();
        return Ok(best.map_or(Decision::Stay, |(_, c)| Decision::Clone(c)));
    }
    let mut best = (s, false, n);
    for &c in t.neighbors(n) {
        if !t.is_alive(c) || stores.contains(c, d) || stores.get(c).is_none() {
            continue;
        }
        if let Some(sc) = score_at(t, stores, provider, c, d, r, &[n]) {
            best = best.min((sc, true, c));
        }
    }
    Ok(if best.2 == n { Decision::Stay } else { Decision::Move(best.2) })
}

/// Carries out a decision. Returns the replicas evicted from a full target.
pub fn apply_decision<P, R>(
    t: &Topology,
    stores: &mut ReplicaStores,
    provider: &mut P,
    n: NodeId,
    d: DataId,
    decision: Decision,
    r: u32,
    rng: &mut R,
) -> Vec<DataId>
where
    P: DistanceProvider + ?Sized,
    R: Rng + ?Sized,
{
    let target = match decision {
        Decision::Stay => return Vec::new(),
        Decision::Remove => {
            stores.remove(n, d);
            return Vec::new();
        }
        Decision::Clone(c) => c,
        Decision::Move(m) => {
            stores.remove(n, d);
            m
        }
    };
    stores.insert(target, d);
    make_room(t, stores, provider, target, r, rng)
}

/// Evicts from an over-full store, scoring each item around its host.
pub fn make_room<P, R>(t: &Topology, stores: &mut ReplicaStores, provider: &mut P, n: NodeId, r: u32, rng: &mut R) -> Vec<DataId>
where
    P: DistanceProvider + ?Sized,
    R: Rng + ?Sized,
{
    let Some(store) = stores.get(n) else { return Vec::new() };
    if !store.is_over_capacity() {
        return Vec::new();
    }
    let items: Vec<DataId> = store.items.iter().copied().collect();
    let ball = provider.ball(t, n, r);
    let scores: BTreeMap<DataId, u64> = items
        .into_iter()
        .map(|d| (d, ball.as_deref().map_or(0, |b| score(b, stores, d, r, &[n]))))
        .collect();
    stores.evict_at(n, &scores, rng)
}

/// One replication round: every hosted replica, in a freshly shuffled order,
/// decides and acts at once, so later replicas see earlier moves.
pub fn run_replication_round<P, R>(
    t: &Topology,
    stores: &mut ReplicaStores,
    provider: &mut P,
    params: &ReplicationParams,
    rng: &mut R,
) -> RoundReport
where
    P: DistanceProvider + ?Sized,
    R: Rng + ?Sized,
{
    let mut report = RoundReport::default();
    let mut pairs = stores.pairs();
    pairs.shuffle(rng);
    for (n, d) in pairs {
        if !stores.contains(n, d) || !t.is_alive(n) {
            continue;
        }
        let decision = replicate_step(t, stores, provider, n, d, params, rng).expect("hosted pair");
        match decision {
            Decision::Stay => {
                if provider.ball(t, n, params.r).is_none() {
                    report.deferred += 1;
                }
                continue;
            }
            Decision::Remove => report.removes += 1,
            Decision::Clone(_) => report.creates += 1,
            Decision::Move(_) => report.moves += 1,
        }
        report.evictions += apply_decision(t, stores, provider, n, d, decision, params.r, rng).len();
    }
    report
}
