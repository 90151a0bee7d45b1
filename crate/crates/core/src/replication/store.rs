use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::ids::{DataId, NodeId};

/// The bounded cache of one node. All items have unit size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplicaStore {
    pub owner: NodeId,
    pub items: BTreeSet<DataId>,
    pub capacity: usize,
}

impl ReplicaStore {
    pub fn new(owner: NodeId, capacity: usize) -> Self {
        ReplicaStore {
            owner,
            items: BTreeSet::new(),
            capacity,
        }
    }

    pub fn is_over_capacity(&self) -> bool {
        self.items.len() > self.capacity
    }
}

/// Drops items until the store fits its capacity, highest score first. Items
/// with equal scores (all-zero included) go in random order. Items missing
/// from `scores` count as zero.
pub fn evict<R: Rng + ?Sized>(store: &mut ReplicaStore, scores: &BTreeMap<DataId, u64>, rng: &mut R) -> Vec<DataId> {
    let excess = store.items.len().saturating_sub(store.capacity);
    if excess == 0 {
        return Vec::new();
    }
    let mut by_score: BTreeMap<u64, Vec<DataId>> = BTreeMap::new();
    for &d in &store.items {
        by_score.entry(scores.get(&d).copied().unwrap_or(0)).or_default().push(d);
    }
    let mut removed = Vec::with_capacity(excess);
    for (_, mut group) in by_score.into_iter().rev() {
        if removed.len() == excess {
            break;
        }
        group.shuffle(rng);
        removed.extend(group.into_iter().take(excess - removed.len()));
    }
    for d in &removed {
        store.items.remove(d);
    }
    removed
}

/// Every node's cache plus a reverse index from item to hosting nodes.
#[derive(Clone, Debug, Default)]
pub struct ReplicaStores {
    stores: BTreeMap<NodeId, ReplicaStore>,
    hosts: BTreeMap<DataId, BTreeSet<NodeId>>,
    replicas: usize,
    version: u64,
}

impl ReplicaStores {
    pub fn new() -> Self {
        Self::default()
    }

    /// Creates an empty store for `n` if it has none.
    pub fn open(&mut self, n: NodeId, capacity: usize) {
        self.version += 1;
        self.stores.entry(n).or_insert_with(|| ReplicaStore::new(n, capacity));
    }

    pub fn set_capacity(&mut self, n: NodeId, capacity: usize) {
        if let Some(s) = self.stores.get_mut(&n) {
            self.version += 1;
            s.capacity = capacity;
        }
    }

    /// Incremented on every change to any store.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn get(&self, n: NodeId) -> Option<&ReplicaStore> {
        self.stores.get(&n)
    }

    pub fn stores(&self) -> impl Iterator<Item = &ReplicaStore> {
        self.stores.values()
    }

    pub fn contains(&self, n: NodeId, d: DataId) -> bool {
        self.stores.get(&n).is_some_and(|s| s.items.contains(&d))
    }

    /// Adds a replica; false if the node has no store or already hosts it.
    /// Capacity is not enforced here: see [`ReplicaStores::evict_at`].
    pub fn insert(&mut self, n: NodeId, d: DataId) -> bool {
        let Some(store) = self.stores.get_mut(&n) else { return false };
        if !store.items.insert(d) {
            return false;
        }
        self.hosts.entry(d).or_default().insert(n);
        self.replicas += 1;
        self.version += 1;
        true
    }

    pub fn remove(&mut self, n: NodeId, d: DataId) -> bool {
        let Some(store) = self.stores.get_mut(&n) else { return false };
        if !store.items.remove(&d) {
            return false;
        }
        self.unindex(n, d);
        true
    }

    /// Drops a node's store with everything in it; returns the lost items.
    pub fn close(&mut self, n: NodeId) -> Vec<DataId> {
        let Some(store) = self.stores.remove(&n) else { return Vec::new() };
        self.version += 1;
        for &d in &store.items {
            self.unindex(n, d);
        }
        store.items.into_iter().collect()
    }

    fn unindex(&mut self, n: NodeId, d: DataId) {
        if let Some(h) = self.hosts.get_mut(&d) {
            h.remove(&n);
            if h.is_empty() {
                self.hosts.remove(&d);
            }
        }
        self.replicas -= 1;
        self.version += 1;
    }

    /// Evicts from `n`'s store as [`evict`] does, keeping the index in step.
    pub fn evict_at<R: Rng + ?Sized>(&mut self, n: NodeId, scores: &BTreeMap<DataId, u64>, rng: &mut R) -> Vec<DataId> {
        let Some(store) = self.stores.get_mut(&n) else { return Vec::new() };
        let removed = evict(store, scores, rng);
        for &d in &removed {
            self.unindex(n, d);
        }
        removed
    }

    pub fn hosts(&self, d: DataId) -> Option<&BTreeSet<NodeId>> {
        self.hosts.get(&d)
    }

    pub fn copies(&self, d: DataId) -> usize {
        self.hosts.get(&d).map_or(0, BTreeSet::len)
    }

    pub fn items(&self) -> impl Iterator<Item = DataId> + '_ {
        self.hosts.keys().copied()
    }

    pub fn total_replicas(&self) -> usize {
        self.replicas
    }

    /// Every hosted `(node, item)` pair in node then item order.
    pub fn pairs(&self) -> Vec<(NodeId, DataId)> {
        self.stores
            .values()
            .flat_map(|s| s.items.iter().map(move |&d| (s.owner, d)))
            .collect()
    }
}
