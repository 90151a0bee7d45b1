use rustc_hash::FxHashMap as HashMap;
use std::sync::Arc;

use crate::bfs;
use crate::ids::NodeId;
use crate::mesh::Topology;
use crate::spiral;

/// The nodes within some radius of a center, with hop distances.
#[derive(Clone, Debug)]
pub struct Ball {
    pub center: NodeId,
    pub radius: u32,
    /// Sorted by node id.
    entries: Vec<(NodeId, u32)>,
    index: HashMap<NodeId, u32>,
}

impl PartialEq for Ball {
    fn eq(&self, other: &Self) -> bool {
        self.center == other.center && self.radius == other.radius && self.entries == other.entries
    }
}

impl Eq for Ball {}

impl Ball {
    pub fn new(center: NodeId, radius: u32, mut entries: Vec<(NodeId, u32)>) -> Self {
        entries.sort_unstable();
        let index = entries.iter().copied().collect();
        Ball {
            center,
            radius,
            entries,
            index,
        }
    }

    pub fn distance(&self, n: NodeId) -> Option<u32> {
        self.index.get(&n).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(NodeId, u32)] {
        &self.entries
    }

    /// Nodes at exactly `k` hops, in id order.
    pub fn ring(&self, k: u32) -> impl Iterator<Item = NodeId> + '_ {
        self.entries.iter().filter(move |&&(_, d)| d == k).map(|&(n, _)| n)
    }

    pub fn max_distance(&self) -> u32 {
        self.entries.iter().map(|&(_, d)| d).max().unwrap_or(0)
    }
}

/// Source of the neighborhood scans the replication agent relies on.
pub trait DistanceProvider {
    /// The ball of radius `r` around `n`, or `None` when the scan could not be
    /// completed (a departed node interrupted it).
    fn ball(&mut self, t: &Topology, n: NodeId, r: u32) -> Option<Arc<Ball>>;
}

/// Per-node cache of scans, dropped whenever the topology changes.
#[derive(Clone, Debug, Default)]
struct BallCache {
    epoch: u64,
    balls: HashMap<(NodeId, u32), Option<Arc<Ball>>>,
}

impl BallCache {
    fn get_or<F: FnOnce() -> Option<Ball>>(&mut self, t: &Topology, n: NodeId, r: u32, scan: F) -> Option<Arc<Ball>> {
        if self.epoch != t.epoch() {
            self.balls.clear();
            self.epoch = t.epoch();
        }
        self.balls.entry((n, r)).or_insert_with(|| scan().map(Arc::new)).clone()
    }
}

/// Distances measured by spiral walks, as the nodes themselves would.
#[derive(Clone, Debug, Default)]
pub struct SpiralDistances {
    cache: BallCache,
    /// Walks run so far, cache hits excluded.
    pub walks: u64,
    /// Messages spent by those walks.
    pub messages: u64,
}

impl SpiralDistances {
    pub fn new() -> Self {
        Self::default()
    }
}

impl DistanceProvider for SpiralDistances {
    fn ball(&mut self, t: &Topology, n: NodeId, r: u32) -> Option<Arc<Ball>> {
        let (walks, messages) = (&mut self.walks, &mut self.messages);
        self.cache.get_or(t, n, r, || {
            let report = spiral::scan(t, n, r).ok()?;
            *walks += 1;
            *messages += report.messages;
            report
                .is_complete()
                .then(|| Ball::new(n, r, report.distances().collect()))
        })
    }
}

/// Breadth-first distances; the reference provider for tests.
#[derive(Clone, Debug, Default)]
pub struct BfsDistances {
    cache: BallCache,
}

impl BfsDistances {
    pub fn new() -> Self {
        Self::default()
    }
}

impl DistanceProvider for BfsDistances {
    fn ball(&mut self, t: &Topology, n: NodeId, r: u32) -> Option<Arc<Ball>> {
        self.cache.get_or(t, n, r, || {
            t.is_alive(n).then(|| Ball::new(n, r, bfs::ball(t, n, r)))
        })
    }
}
