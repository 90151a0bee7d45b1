//! The spiral walk: an exhaustive, ring-by-ring scan of a node's neighborhood.
//!
//! Ring `i` holds the nodes at exactly `i` hops from the source. A walker
//! visits the nodes of one ring in sequence, stepping between ring neighbors,
//! and records every unseen neighbor of a visited node as a member of the next
//! ring. Once a ring is exhausted the next ring is fully known, so the walk is
//! a breadth-first exploration that costs about one message per visited node.
//!
//! On curved parts of the mesh a ring can fold onto itself (an "eye"): a ring
//! node then has more than two neighbors in its own ring and the next ring
//! falls apart into separate pieces. The walker keeps the largest piece and
//! spawns an inward walker for each of the others. All walkers of a family
//! share one distance memory, so no node is visited twice.

mod gradient;

use std::collections::VecDeque;
use std::fmt::Write as _;

use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};

pub use gradient::return_path;

use crate::error::{Error, Result};
use crate::ids::{DataId, NodeId};
use crate::mesh::Topology;

/// Message budget meaning "no limit".
pub const UNLIMITED: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WalkerMode {
    /// Builds larger and larger rings around the source.
    Outward,
    /// Spawned across an eye; its rings shrink until the pocket is covered.
    Inward,
}

/// One walker of a family.
#[derive(Clone, Debug)]
pub struct WalkerState {
    pub id: usize,
    pub parent: Option<usize>,
    pub source: NodeId,
    pub mode: WalkerMode,
    /// Ring index of `ring_cur`.
    pub radius: u32,
    /// Remaining message budget.
    pub ttl: u64,
    pub ring_prev: Vec<NodeId>,
    pub ring_cur: Vec<NodeId>,
    /// Next-ring members claimed by this walker, in discovery order.
    pub ring_next: Vec<NodeId>,
    pub visited: Vec<NodeId>,
    pub messages: u64,
    pub position: NodeId,
    pub spawned: Vec<usize>,
    pub done: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Visit {
    pub node: NodeId,
    pub ring: u32,
    pub walker: usize,
    /// Messages spent by the whole family when this node was reached.
    pub messages: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WalkStop {
    Completed,
    TtlExhausted,
    /// A node on the walker's way had departed; the report is partial.
    RingBroken(NodeId),
    ReturnStranded(NodeId),
}

#[derive(Clone, Debug)]
pub struct WalkReport {
    pub source: NodeId,
    pub visits: Vec<Visit>,
    pub hits: Vec<(NodeId, DataId)>,
    /// Exploration hops plus every walker's return to the source.
    pub messages: u64,
    /// Hops spent streaming hits back to the source along the gradient.
    pub backprop_messages: u64,
    /// Visited nodes with more than two neighbors in their own ring.
    pub eyes: usize,
    pub spawns: usize,
    /// Return of the main walker from its last visited node.
    pub return_path: Vec<NodeId>,
    pub stop: WalkStop,
}

impl WalkReport {
    pub fn is_complete(&self) -> bool {
        self.stop == WalkStop::Completed
    }

    pub fn visit_order(&self) -> Vec<NodeId> {
        self.visits.iter().map(|v| v.node).collect()
    }

    /// Visited nodes with their hop distance from the source.
    pub fn distances(&self) -> impl Iterator<Item = (NodeId, u32)> + '_ {
        self.visits.iter().map(|v| (v.node, v.ring))
    }

    pub fn max_ring(&self) -> u32 {
        self.visits.last().map_or(0, |v| v.ring)
    }

    /// `step,node,ring,messages`, one row per visit.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("step,node,ring,messages\n");
        for (i, v) in self.visits.iter().enumerate() {
            let _ = writeln!(out, "{i},{},{},{}", v.node, v.ring, v.messages);
        }
        out
    }
}

/// A walker family in progress.
pub struct SpiralWalk<'t> {
    t: &'t Topology,
    source: NodeId,
    dist: HashMap<NodeId, u32>,
    walkers: Vec<WalkerState>,
    visits: Vec<Visit>,
    hits: Vec<(NodeId, DataId)>,
    /// Last ring whose nodes have all been visited.
    ring: u32,
    messages: u64,
    backprop: u64,
    eyes: usize,
    broken: Option<NodeId>,
    ttl_hit: bool,
}

impl<'t> SpiralWalk<'t> {
    pub fn new(t: &'t Topology, source: NodeId, ttl: u64) -> Result<Self> {
        if !t.is_alive(source) {
            return Err(Error::UnknownNode(source));
        }
        let root = WalkerState {
            id: 0,
            parent: None,
            source,
            mode: WalkerMode::Outward,
            radius: 0,
            ttl,
            ring_prev: Vec::new(),
            ring_cur: vec![source],
            ring_next: Vec::new(),
            visited: Vec::new(),
            messages: 0,
            position: source,
            spawned: Vec::new(),
            done: false,
        };
        Ok(SpiralWalk {
            t,
            source,
            dist: [(source, 0)].into_iter().collect(),
            walkers: vec![root],
            visits: Vec::new(),
            hits: Vec::new(),
            ring: 0,
            messages: 0,
            backprop: 0,
            eyes: 0,
            broken: None,
            ttl_hit: false,
        })
    }

    pub fn walkers(&self) -> &[WalkerState] {
        &self.walkers
    }

    /// Recorded hop distance from the source.
    pub fn distance(&self, n: NodeId) -> Option<u32> {
        self.dist.get(&n).copied()
    }

    pub fn ring(&self) -> u32 {
        self.ring
    }

    pub fn is_stopped(&self) -> bool {
        self.broken.is_some() || self.walkers.iter().all(|w| w.done)
    }

    /// Gradient return from a recorded node to the source.
    pub fn return_path(&self, from: NodeId) -> Result<Vec<NodeId>> {
        return_path(self.t, |n| self.distance(n), from)
    }

    /// Visits the source itself (ring 0).
    pub fn start<P: FnMut(NodeId) -> Option<DataId>>(&mut self, pred: &mut P) {
        if self.visits.is_empty() && self.broken.is_none() {
            self.visit(0, self.source, pred);
        }
    }

    /// Advances every active walker by one ring. Returns false once the walk
    /// cannot go further.
    pub fn advance<P: FnMut(NodeId) -> Option<DataId>>(&mut self, pred: &mut P) -> bool {
        self.start(pred);
        if self.is_stopped() {
            return false;
        }
        for i in 0..self.walkers.len() {
            if !self.walkers[i].done {
                detect_and_spawn(self, i);
            }
        }
        let level = self.ring + 1;
        let mut progressed = false;
        for i in 0..self.walkers.len() {
            if self.walkers[i].done {
                continue;
            }
            next_ring(self, i, level, pred);
            progressed |= !self.walkers[i].ring_cur.is_empty();
            if self.broken.is_some() {
                return false;
            }
        }
        if progressed {
            self.ring = level;
        }
        progressed && !self.is_stopped()
    }

    /// Ends the walk: every walker that visited something returns to the
    /// source along the gradient.
    pub fn finish(mut self) -> WalkReport {
        let mut stop = match (self.broken, self.ttl_hit) {
            (Some(at), _) => WalkStop::RingBroken(at),
            (None, true) => WalkStop::TtlExhausted,
            (None, false) => WalkStop::Completed,
        };
        let mut main_return = Vec::new();
        for w in &self.walkers {
            let Some(&last) = w.visited.last() else { continue };
            match self.return_path(last) {
                Ok(path) => {
                    self.messages += path.len() as u64;
                    if w.id == 0 {
                        main_return = path;
                    }
                }
                Err(_) if stop == WalkStop::Completed => stop = WalkStop::ReturnStranded(last),
                Err(_) => {}
            }
        }
        WalkReport {
            source: self.source,
            visits: self.visits,
            hits: self.hits,
            messages: self.messages,
            backprop_messages: self.backprop,
            eyes: self.eyes,
            spawns: self.walkers.len() - 1,
            return_path: main_return,
            stop,
        }
    }

    fn visit<P: FnMut(NodeId) -> Option<DataId>>(&mut self, w: usize, u: NodeId, pred: &mut P) {
        let t = self.t;
        if !t.is_alive(u) {
            self.broken = Some(u);
            return;
        }
        let ring = self.dist[&u];
        self.visits.push(Visit {
            node: u,
            ring,
            walker: w,
            messages: self.messages,
        });
        if let Some(d) = pred(u) {
            self.hits.push((u, d));
            if let Ok(path) = self.return_path(u) {
                self.backprop += path.len() as u64;
            }
        }
        let mut same_ring = 0;
        let walker = &mut self.walkers[w];
        walker.visited.push(u);
        walker.position = u;
        for &v in t.neighbors(u) {
            match self.dist.get(&v) {
                Some(&d) if d == ring => same_ring += 1,
                Some(_) => {}
                None => {
                    self.dist.insert(v, ring + 1);
                    walker.ring_next.push(v);
                }
            }
        }
        if same_ring > 2 {
            self.eyes += 1;
        }
    }

    /// Charges `cost` hops to walker `w`, keeping enough budget to return from
    /// a node on ring `ring`. False when the budget does not allow it.
    fn charge(&mut self, w: usize, cost: u64, ring: u32) -> bool {
        let walker = &mut self.walkers[w];
        if walker.ttl < cost.saturating_add(ring as u64) {
            walker.done = true;
            self.ttl_hit = true;
            return false;
        }
        walker.ttl -= cost;
        walker.messages += cost;
        self.messages += cost;
        true
    }

    /// Shortest route from `from` through recorded territory (rings up to
    /// `max_ring`, alive nodes only) to the closest node of `targets`; lowest
    /// id among equally close targets. Returns the target and the hop count.
    fn route(&self, from: NodeId, targets: &HashSet<NodeId>, max_ring: u32) -> Option<(NodeId, u64)> {
        let mut seen = [from].into_iter().collect::<HashSet<_>>();
        let mut frontier = vec![from];
        let mut hops = 0;
        while !frontier.is_empty() {
            hops += 1;
            let mut next = Vec::new();
            let mut found: Option<NodeId> = None;
            for &u in &frontier {
                for &v in self.t.neighbors(u) {
                    if !seen.insert(v) {
                        continue;
                    }
                    if targets.contains(&v) {
                        found = Some(found.map_or(v, |f| f.min(v)));
                    } else if self.t.is_alive(v) && self.dist.get(&v).is_some_and(|&d| d <= max_ring) {
                        next.push(v);
                    }
                }
            }
            if let Some(f) = found {
                return Some((f, hops));
            }
            frontier = next;
        }
        None
    }
}

/// Visits walker `w`'s share of ring `level` in cyclic order.
///
/// The walker enters the ring next to where it left the previous one, then
/// keeps stepping to an unvisited ring node that closes a triangle with the
/// current node and a previous-ring node `p`. `p` rotates through the current
/// node's previous-ring neighbors as the walker advances. When no unvisited
/// ring neighbor remains (the share is not a single arc), the walker hops
/// through recorded territory to the closest unvisited node.
pub fn next_ring<P: FnMut(NodeId) -> Option<DataId>>(walk: &mut SpiralWalk<'_>, w: usize, level: u32, pred: &mut P) {
    let t = walk.t;
    {
        let walker = &mut walk.walkers[w];
        walker.ring_prev = std::mem::take(&mut walker.ring_cur);
        walker.ring_cur = std::mem::take(&mut walker.ring_next);
        walker.radius = level;
        if walker.ring_cur.is_empty() {
            walker.done = true;
            return;
        }
    }
    let mut unvisited: HashSet<NodeId> = walk.walkers[w].ring_cur.iter().copied().collect();
    let prev_ring = |walk: &SpiralWalk<'_>, q: NodeId| -> Vec<NodeId> {
        t.neighbors(q)
            .iter()
            .copied()
            .filter(|n| walk.dist.get(n) == Some(&(level - 1)))
            .collect()
    };

    let mut q = walk.walkers[w].position;
    let mut p = q;
    let mut entering = true;
    while !unvisited.is_empty() {
        let cands: Vec<NodeId> = t.neighbors(q).iter().copied().filter(|n| unvisited.contains(n)).collect();
        let (next, cost) = if entering && !cands.is_empty() {
            // enter at an end of the share when it is an arc, so one sweep covers it
            let ends = |c: NodeId| t.neighbors(c).iter().filter(|n| unvisited.contains(n)).count();
            let c = *cands.iter().min_by_key(|&&c| (ends(c), c)).expect("non-empty");
            (c, 1)
        } else if cands.is_empty() {
            match walk.route(q, &unvisited, level) {
                Some(found) => found,
                None => {
                    // unreachable share: the rest belongs to no known route
                    walk.walkers[w].done = true;
                    return;
                }
            }
        } else {
            let mut ps = prev_ring(walk, q);
            if let Some(i) = ps.iter().position(|&x| x == p) {
                ps.rotate_left(i);
            }
            let pick = ps
                .iter()
                .find_map(|&pp| cands.iter().find(|&&c| t.has_edge(pp, c)).map(|&c| (c, pp)));
            match pick {
                Some((c, pp)) => {
                    p = pp;
                    (c, 1)
                }
                None => (cands[0], 1),
            }
        };
        if !walk.charge(w, cost, level) {
            return;
        }
        entering = false;
        unvisited.remove(&next);
        walk.visit(w, next, pred);
        if walk.broken.is_some() {
            return;
        }
        if !t.has_edge(p, next) {
            p = prev_ring(walk, next).first().copied().unwrap_or(p);
        }
        q = next;
    }
}

/// Splits walker `w`'s claimed next ring into connected pieces. The walker
/// keeps the largest; every other piece goes to a new inward walker that
/// starts from the parent's position and receives a share of the remaining
/// budget proportional to its piece.
pub fn detect_and_spawn(walk: &mut SpiralWalk<'_>, w: usize) -> Vec<usize> {
    let t = walk.t;
    let claimed = std::mem::take(&mut walk.walkers[w].ring_next);
    if claimed.len() < 2 {
        walk.walkers[w].ring_next = claimed;
        return Vec::new();
    }
    let member: HashSet<NodeId> = claimed.iter().copied().collect();
    let mut piece_of: HashMap<NodeId, usize> = HashMap::default();
    let mut pieces: Vec<Vec<NodeId>> = Vec::new();
    for &s in &claimed {
        if piece_of.contains_key(&s) {
            continue;
        }
        let k = pieces.len();
        piece_of.insert(s, k);
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &v in t.neighbors(u) {
                if member.contains(&v) && !piece_of.contains_key(&v) {
                    piece_of.insert(v, k);
                    queue.push_back(v);
                }
            }
        }
        pieces.push(Vec::new());
    }
    // keep discovery order inside each piece
    for &n in &claimed {
        pieces[piece_of[&n]].push(n);
    }
    if pieces.len() == 1 {
        walk.walkers[w].ring_next = claimed;
        return Vec::new();
    }
    let keep = (0..pieces.len())
        .max_by(|&a, &b| pieces[a].len().cmp(&pieces[b].len()).then(b.cmp(&a)))
        .expect("at least two pieces");

    let total = claimed.len() as u128;
    let budget = walk.walkers[w].ttl as u128;
    let mut given = 0u64;
    let mut children = Vec::new();
    for (k, piece) in pieces.into_iter().enumerate() {
        if k == keep {
            walk.walkers[w].ring_next = piece;
            continue;
        }
        let share = (budget * piece.len() as u128 / total) as u64;
        given += share;
        let parent = &walk.walkers[w];
        let id = walk.walkers.len();
        let child = WalkerState {
            id,
            parent: Some(w),
            source: parent.source,
            mode: WalkerMode::Inward,
            radius: parent.radius,
            ttl: share,
            ring_prev: parent.ring_prev.clone(),
            ring_cur: parent.ring_cur.clone(),
            ring_next: piece,
            visited: Vec::new(),
            messages: 0,
            position: parent.position,
            spawned: Vec::new(),
            done: false,
        };
        walk.walkers.push(child);
        walk.walkers[w].spawned.push(id);
        children.push(id);
    }
    walk.walkers[w].ttl -= given;
    children
}

/// Runs a spiral walk of at most `max_radius` rings and `ttl` messages.
///
/// `pred` is evaluated on every visited node; matches are collected as hits
/// and streamed back to the source as they are found. A departed node met on
/// the way stops the walk with a partial report.
pub fn spiral_walk<P>(t: &Topology, source: NodeId, max_radius: u32, ttl: u64, mut pred: P) -> Result<WalkReport>
where
    P: FnMut(NodeId) -> Option<DataId>,
{
    let mut walk = SpiralWalk::new(t, source, ttl)?;
    walk.start(&mut pred);
    while walk.ring() < max_radius && walk.advance(&mut pred) {}
    Ok(walk.finish())
}

/// A spiral walk with no predicate and no message limit.
pub fn scan(t: &Topology, source: NodeId, radius: u32) -> Result<WalkReport> {
    spiral_walk(t, source, radius, UNLIMITED, |_| None)
}

#[cfg(test)]
mod tests;
