use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::bfs;
use crate::error::{Error, Result};
use crate::ids::{DataId, NodeId};
use crate::mesh::Topology;
use crate::replication::ReplicaStores;
use crate::spiral;
use crate::superpeer::{Query, SuperLayer};

/// Counts of nearest-same-item distances, one entry per replica.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Spacing {
    pub counts: BTreeMap<u32, usize>,
}

impl Spacing {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    /// Most frequent distance, the smallest on ties.
    pub fn mode(&self) -> Option<u32> {
        self.counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(&d, _)| d)
    }

    pub fn mean(&self) -> f64 {
        let n = self.total();
        if n == 0 {
            return 0.0;
        }
        self.counts.iter().map(|(&d, &c)| d as f64 * c as f64).sum::<f64>() / n as f64
    }

    /// Share of replicas whose distance lies in `(lo, hi]`.
    pub fn fraction_in(&self, lo: f64, hi: f64) -> f64 {
        let n = self.total();
        if n == 0 {
            return 0.0;
        }
        let k: usize = self.counts.iter().filter(|(&d, _)| d as f64 > lo && d as f64 <= hi).map(|(_, &c)| c).sum();
        k as f64 / n as f64
    }
}

/// For every replica of `item`, the hop distance to the nearest other
/// replica of it. Empty with fewer than two replicas.
pub fn spacing_histogram(t: &Topology, stores: &ReplicaStores, item: DataId) -> Spacing {
    let mut out = Spacing::default();
    let Some(hosts) = stores.hosts(item) else { return out };
    if hosts.len() < 2 {
        return out;
    }
    for &h in hosts {
        if let Some((_, d)) = bfs::nearest_matching(t, h, u32::MAX, |n| hosts.contains(&n)) {
            *out.counts.entry(d).or_default() += 1;
        }
    }
    out
}

/// Shape of the popular third of the item population: copies follow a
/// Pareto law with exponent `alpha` starting at three, capped at `max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RarityTail {
    pub alpha: f64,
    pub max: usize,
}

impl Default for RarityTail {
    fn default() -> Self {
        RarityTail { alpha: 1.2, max: 300 }
    }
}

/// Seeds `n_items` items (ids `0..n_items`) so that half have exactly one
/// copy, a sixth exactly two, and the rest at least three from the tail.
/// Copies of an item go to distinct random alive nodes with free cache
/// room. Returns the initial copy count of each item.
pub fn rarity_profile_init<R: Rng + ?Sized>(
    t: &Topology,
    stores: &mut ReplicaStores,
    n_items: u64,
    tail: RarityTail,
    rng: &mut R,
) -> Result<BTreeMap<DataId, usize>> {
    let mut counts = BTreeMap::new();
    if n_items == 0 {
        return Ok(counts);
    }
    let alive: Vec<NodeId> = t.alive_nodes().filter(|&n| stores.get(n).is_some()).collect();
    let ones = n_items / 2;
    let twos = ((n_items as f64) / 6.0).round() as u64;
    let mut plan: Vec<usize> = (0..n_items)
        .map(|i| {
            if i < ones {
                1
            } else if i < ones + twos {
                2
            } else {
                let u: f64 = 1.0 - rng.random::<f64>();
                ((3.0 * u.powf(-1.0 / tail.alpha)).floor() as usize).clamp(3, tail.max.max(3))
            }
        })
        .map(|c| c.min(alive.len()))
        .collect();
    plan.shuffle(rng);

    let room = |stores: &ReplicaStores, n: NodeId| stores.get(n).map_or(0, |s| s.capacity.saturating_sub(s.items.len()));
    let free: usize = alive.iter().fold(0usize, |acc, &n| acc.saturating_add(room(stores, n)));
    let wanted: usize = plan.iter().sum();
    if wanted > free {
        return Err(Error::Config(format!("{wanted} copies exceed the {free} free cache slots")));
    }
    for (i, &copies) in plan.iter().enumerate() {
        let d = DataId(i as u64);
        let mut placed = 0;
        let mut tries = 0;
        while placed < copies && tries < 64 * copies {
            tries += 1;
            let n = alive[rng.random_range(0..alive.len())];
            if room(stores, n) > 0 && stores.insert(n, d) {
                placed += 1;
            }
        }
        if placed < copies {
            let mut open: Vec<NodeId> = alive.iter().copied().filter(|&n| room(stores, n) > 0 && !stores.contains(n, d)).collect();
            open.shuffle(rng);
            for n in open.into_iter().take(copies - placed) {
                stores.insert(n, d);
                placed += 1;
            }
        }
        if placed < copies {
            return Err(Error::Config(format!("no room left for copy {} of {d}", placed + 1)));
        }
        counts.insert(d, copies);
    }
    Ok(counts)
}

/// Fraction of random-origin queries for one item answered within each
/// super-layer hop budget `0..=max_ttl`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnswerCurve {
    pub trials: usize,
    /// `answered[k]`: queries answered within `k` forwards.
    pub answered: Vec<usize>,
}

impl AnswerCurve {
    pub fn fraction(&self, ttl: usize) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let k = self.answered.get(ttl).or(self.answered.last()).copied().unwrap_or(0);
        k as f64 / self.trials as f64
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("ttl,answered,trials,fraction\n");
        for (ttl, &a) in self.answered.iter().enumerate() {
            let _ = writeln!(s, "{ttl},{a},{},{:.6}", self.trials, self.fraction(ttl));
        }
        s
    }
}

/// Runs `trials` queries for `item` with the full budget and counts, for
/// every smaller budget, those answered within it. A walk cut at `k`
/// forwards follows the same path as the uncut one, so the curve is
/// cumulative and never decreases.
pub fn answer_speed_curve<R: Rng + ?Sized>(
    layer: &SuperLayer,
    t: &Topology,
    item: DataId,
    trials: usize,
    max_ttl: u32,
    rng: &mut R,
) -> AnswerCurve {
    let alive: Vec<NodeId> = t.alive_nodes().collect();
    let mut first_hit = vec![0usize; max_ttl as usize + 1];
    let mut done = 0;
    if !alive.is_empty() {
        for i in 0..trials {
            let origin = alive[rng.random_range(0..alive.len())];
            let q = Query {
                id: i as u64,
                origin,
                target: item,
                ttl: max_ttl,
            };
            let out = layer.route_query(t, q, rng);
            if out.answered() {
                first_hit[out.super_hops as usize] += 1;
            }
        }
        done = trials;
    }
    let answered = first_hit
        .iter()
        .scan(0, |acc, &k| {
            *acc += k;
            Some(*acc)
        })
        .collect();
    AnswerCurve { trials: done, answered }
}

/// One spiral-walk versus BFS comparison that disagreed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleMismatch {
    pub source: NodeId,
    pub radius: u32,
    /// In the BFS ball but not visited by the walk.
    pub missing: Vec<NodeId>,
    /// Visited by the walk but not in the BFS ball.
    pub extra: Vec<NodeId>,
    /// Visited more than once.
    pub duplicates: Vec<NodeId>,
    /// Nodes whose recorded distance differs from the BFS one.
    pub wrong_distance: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleReport {
    pub trials: usize,
    pub matches: usize,
    pub first_mismatch: Option<OracleMismatch>,
}

/// Compares spiral-walk scans against BFS balls for random sources.
pub fn oracle_compare<R: Rng + ?Sized>(t: &Topology, radius: u32, trials: usize, rng: &mut R) -> Result<OracleReport> {
    let alive: Vec<NodeId> = t.alive_nodes().collect();
    if alive.is_empty() {
        return Err(Error::InvalidArgument("empty topology".into()));
    }
    let mut report = OracleReport {
        trials,
        matches: 0,
        first_mismatch: None,
    };
    for _ in 0..trials {
        let source = alive[rng.random_range(0..alive.len())];
        let walk = spiral::scan(t, source, radius)?;
        let oracle: BTreeMap<NodeId, u32> = bfs::ball(t, source, radius).into_iter().collect();
        let order = walk.visit_order();
        let mut seen = BTreeSet::new();
        let duplicates: Vec<NodeId> = order.iter().copied().filter(|&n| !seen.insert(n)).collect();
        let got: BTreeMap<NodeId, u32> = walk.distances().collect();
        let m = OracleMismatch {
            source,
            radius,
            missing: oracle.keys().copied().filter(|n| !got.contains_key(n)).collect(),
            extra: got.keys().copied().filter(|n| !oracle.contains_key(n)).collect(),
            duplicates,
            wrong_distance: got.iter().filter(|(n, d)| oracle.get(n).is_some_and(|o| o != *d)).map(|(&n, _)| n).collect(),
        };
        if m.missing.is_empty() && m.extra.is_empty() && m.duplicates.is_empty() && m.wrong_distance.is_empty() && walk.is_complete() {
            report.matches += 1;
        } else if report.first_mismatch.is_none() {
            report.first_mismatch = Some(m);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::build_geode;
    use crate::rng_from_seed;

    fn open_all(t: &Topology, cap: usize) -> ReplicaStores {
        let mut s = ReplicaStores::new();
        for n in t.alive_nodes() {
            s.open(n, cap);
        }
        s
    }

    #[test]
    fn spacing_of_two_replicas_is_their_distance() {
        let t = build_geode(2).unwrap();
        let mut s = open_all(&t, 4);
        let far = bfs::ball(&t, NodeId(0), 3).into_iter().find(|&(_, d)| d == 3).unwrap().0;
        s.insert(NodeId(0), DataId(1));
        s.insert(far, DataId(1));
        let h = spacing_histogram(&t, &s, DataId(1));
        assert_eq!(h.counts, BTreeMap::from([(3, 2)]));
        assert_eq!(h.mode(), Some(3));
        assert_eq!(h.fraction_in(2.0, 3.0), 1.0);
    }

    #[test]
    fn single_replica_has_empty_spacing() {
        let t = build_geode(1).unwrap();
        let mut s = open_all(&t, 4);
        s.insert(NodeId(5), DataId(0));
        assert_eq!(spacing_histogram(&t, &s, DataId(0)).total(), 0);
    }

    #[test]
    fn rarity_constraints_hold_exactly() {
        let t = build_geode(4).unwrap();
        let mut s = open_all(&t, 40);
        let mut rng = rng_from_seed(3);
        let counts = rarity_profile_init(&t, &mut s, 10_000, RarityTail::default(), &mut rng).unwrap();
        let ones = counts.values().filter(|&&c| c == 1).count();
        let twos = counts.values().filter(|&&c| c == 2).count();
        assert_eq!(ones, 5000);
        assert_eq!(twos, 1667);
        assert!(counts.values().any(|&c| c >= 100));
        for (&d, &c) in &counts {
            assert_eq!(s.copies(d), c);
        }
        let mut sorted: Vec<usize> = counts.values().copied().collect();
        sorted.sort_unstable();
        assert_eq!(sorted[sorted.len() / 2 - 1], 1);
        assert!(sorted[sorted.len() * 66 / 100] <= 2);
    }

    #[test]
    fn rarity_rejects_overfull_networks() {
        let t = build_geode(0).unwrap();
        let mut s = open_all(&t, 1);
        let mut rng = rng_from_seed(0);
        assert!(rarity_profile_init(&t, &mut s, 100, RarityTail::default(), &mut rng).is_err());
        assert!(rarity_profile_init(&t, &mut s, 0, RarityTail::default(), &mut rng).unwrap().is_empty());
    }

    #[test]
    fn absent_item_is_never_answered() {
        let t = build_geode(3).unwrap();
        let s = open_all(&t, 4);
        let caps = t.alive_nodes().map(|n| (n, crate::Capability(if n.0 % 20 == 0 { 1000 } else { 1 }))).collect();
        let mut rng = rng_from_seed(1);
        let layer = SuperLayer::bootstrap(&t, &caps, &s, &mut rng);
        let c = answer_speed_curve(&layer, &t, DataId(7), 50, 20, &mut rng);
        assert!(c.answered.iter().all(|&a| a == 0));
        assert_eq!(c.csv().lines().count(), 22);
    }

    #[test]
    fn spiral_matches_bfs_on_a_geode() {
        let t = build_geode(3).unwrap();
        let mut rng = rng_from_seed(7);
        let r = oracle_compare(&t, 6, 20, &mut rng).unwrap();
        assert_eq!(r.matches, 20, "{:?}", r.first_mismatch);
    }
}
