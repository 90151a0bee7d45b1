use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::ids::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Absent,
    Alive,
    /// Failed but not yet repaired: its edges are still part of the god view.
    Dead,
}

/// God-view adjacency of the overlay.
///
/// Node ids index directly into dense vectors; ids are handed out in increasing
/// order and never reused. Adjacency lists are kept sorted so every traversal is
/// deterministic.
#[derive(Clone, Debug)]
pub struct Topology {
    adj: Vec<Vec<NodeId>>,
    slots: Vec<Slot>,
    edges: usize,
    present: usize,
    alive: usize,
    epoch: u64,
    flagged: BTreeSet<NodeId>,
}

impl Default for Topology {
    fn default() -> Self {
        Self::new()
    }
}

impl Topology {
    pub fn new() -> Self {
        Topology {
            adj: Vec::new(),
            slots: Vec::new(),
            edges: 0,
            present: 0,
            alive: 0,
            epoch: 0,
            flagged: BTreeSet::new(),
        }
    }

    /// Builds a topology from an edge list; every endpoint becomes an alive node.
    pub fn from_edges<I>(edges: I) -> Self
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut t = Topology::new();
        for (a, b) in edges {
            for n in [a, b] {
                if !t.contains(n) {
                    t.add_node(n).expect("fresh node");
                }
            }
            if a != b {
                t.add_edge(a, b);
            }
        }
        t
    }

    /// The smallest id that has never been used.
    pub fn next_id(&self) -> NodeId {
        NodeId(self.slots.len() as u32)
    }

    /// Incremented on every structural change; used to invalidate cached walks.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn add_node(&mut self, n: NodeId) -> Result<()> {
        if self.contains(n) {
            return Err(Error::InvalidArgument(format!("node {n} already present")));
        }
        if n.index() >= self.slots.len() {
            self.slots.resize(n.index() + 1, Slot::Absent);
            self.adj.resize(n.index() + 1, Vec::new());
        } else if self.slots[n.index()] == Slot::Absent && !self.adj[n.index()].is_empty() {
            unreachable!("absent slot with edges");
        }
        self.slots[n.index()] = Slot::Alive;
        self.present += 1;
        self.alive += 1;
        self.epoch += 1;
        Ok(())
    }

    /// True when the node is part of the graph (alive or dead-but-unrepaired).
    #[inline]
    pub fn contains(&self, n: NodeId) -> bool {
        matches!(self.slots.get(n.index()), Some(Slot::Alive | Slot::Dead))
    }

    #[inline]
    pub fn is_alive(&self, n: NodeId) -> bool {
        matches!(self.slots.get(n.index()), Some(Slot::Alive))
    }

    #[inline]
    pub fn is_dead(&self, n: NodeId) -> bool {
        matches!(self.slots.get(n.index()), Some(Slot::Dead))
    }

    /// Marks a node failed. Its edges stay until the repair removes it.
    pub fn mark_dead(&mut self, n: NodeId) -> Result<()> {
        if !self.is_alive(n) {
            return Err(Error::UnknownNode(n));
        }
        self.slots[n.index()] = Slot::Dead;
        self.alive -= 1;
        self.epoch += 1;
        Ok(())
    }

    /// Drops a node and all its edges.
    pub fn remove_node(&mut self, n: NodeId) {
        if !self.contains(n) {
            return;
        }
        let nbrs = std::mem::take(&mut self.adj[n.index()]);
        for m in &nbrs {
            let list = &mut self.adj[m.index()];
            if let Ok(pos) = list.binary_search(&n) {
                list.remove(pos);
            }
        }
        self.edges -= nbrs.len();
        if self.slots[n.index()] == Slot::Alive {
            self.alive -= 1;
        }
        self.slots[n.index()] = Slot::Absent;
        self.present -= 1;
        self.flagged.remove(&n);
        self.epoch += 1;
    }

    #[inline]
    pub fn neighbors(&self, n: NodeId) -> &[NodeId] {
        self.adj.get(n.index()).map(Vec::as_slice).unwrap_or(&[])
    }

    #[inline]
    pub fn degree(&self, n: NodeId) -> usize {
        self.neighbors(n).len()
    }

    #[inline]
    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.neighbors(a).binary_search(&b).is_ok()
    }

    /// Adds an undirected edge; returns false if it already existed.
    pub fn add_edge(&mut self, a: NodeId, b: NodeId) -> bool {
        debug_assert!(a != b && self.contains(a) && self.contains(b));
        match self.adj[a.index()].binary_search(&b) {
            Ok(_) => false,
            Err(pos) => {
                self.adj[a.index()].insert(pos, b);
                let list = &mut self.adj[b.index()];
                let pos = list.binary_search(&a).unwrap_err();
                list.insert(pos, a);
                self.edges += 1;
                self.epoch += 1;
                true
            }
        }
    }

    /// Removes an undirected edge; returns false if it was absent.
    pub fn remove_edge(&mut self, a: NodeId, b: NodeId) -> bool {
        match self.adj.get(a.index()).map(|l| l.binary_search(&b)) {
            Some(Ok(pos)) => {
                self.adj[a.index()].remove(pos);
                let list = &mut self.adj[b.index()];
                let pos = list.binary_search(&a).expect("symmetric adjacency");
                list.remove(pos);
                self.edges -= 1;
                self.epoch += 1;
                true
            }
            _ => false,
        }
    }

    /// Common neighbors of two nodes with no precondition checks.
    pub fn common(&self, a: NodeId, b: NodeId) -> Vec<NodeId> {
        let (x, y) = (self.neighbors(a), self.neighbors(b));
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < x.len() && j < y.len() {
            match x[i].cmp(&y[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(x[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out
    }

    pub fn common_count(&self, a: NodeId, b: NodeId) -> usize {
        let (x, y) = (self.neighbors(a), self.neighbors(b));
        let (mut i, mut j, mut c) = (0, 0, 0);
        while i < x.len() && j < y.len() {
            match x[i].cmp(&y[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    c += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        c
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    /// Nodes in the graph, dead-but-unrepaired ones included.
    pub fn node_count(&self) -> usize {
        self.present
    }

    pub fn alive_count(&self) -> usize {
        self.alive
    }

    pub fn is_empty(&self) -> bool {
        self.present == 0
    }

    /// All nodes in the graph in id order.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| **s != Slot::Absent)
            .map(|(i, _)| NodeId(i as u32))
    }

    pub fn alive_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == Slot::Alive)
            .map(|(i, _)| NodeId(i as u32))
    }

    pub fn dead_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == Slot::Dead)
            .map(|(i, _)| NodeId(i as u32))
    }

    /// Every edge once, as `(a, b)` with `a < b`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes().flat_map(move |a| {
            self.neighbors(a)
                .iter()
                .copied()
                .filter(move |&b| a < b)
                .map(move |b| (a, b))
        })
    }

    pub fn mean_degree(&self) -> f64 {
        if self.present == 0 {
            0.0
        } else {
            2.0 * self.edges as f64 / self.present as f64
        }
    }

    /// Holes whose repair ran out of options and were left open.
    pub fn flagged_holes(&self) -> &BTreeSet<NodeId> {
        &self.flagged
    }

    pub(crate) fn flag_hole(&mut self, n: NodeId) {
        self.flagged.insert(n);
    }
}
