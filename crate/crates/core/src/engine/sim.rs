use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use super::build_geode;
use super::config::{CapacityRule, Config, DistanceMode};
use super::event::{churn_events, poisson, EventKind, EventQueue};
use super::metrics::{ErrorRow, Metrics, QueryRow, RegulationRow, RoundRow, SeriesRow};
use crate::error::{Error, Result};
use crate::ids::{DataId, NodeId};
use crate::mesh::{connect_node, ping_round, repair_failure, seed_icosahedron, NeighborViews, Topology};
use crate::replication::{run_replication_round, Ball, BfsDistances, DistanceProvider, ReplicaStores, RoundReport, SpiralDistances};
use crate::superpeer::{Capability, Query, SuperLayer};
use crate::{rng_from_seed, SimRng};

/// Joins between two regulation passes while a network is grown.
const GROWTH_REGULATION_EVERY: usize = 100;

/// Departures are refused at or below this population. Relocation needs a
/// replacement three hops from the hole with no degree-4 neighbor, and
/// meshes of a few dozen nodes often have none.
pub const MIN_NODES: usize = 40;

/// The distance scanner in use.
#[derive(Clone, Debug)]
pub enum Distances {
    Spiral(SpiralDistances),
    Bfs(BfsDistances),
}

impl Distances {
    pub fn new(mode: DistanceMode) -> Self {
        match mode {
            DistanceMode::Spiral => Distances::Spiral(SpiralDistances::new()),
            DistanceMode::Bfs => Distances::Bfs(BfsDistances::new()),
        }
    }
}

impl DistanceProvider for Distances {
    fn ball(&mut self, t: &Topology, n: NodeId, r: u32) -> Option<Arc<Ball>> {
        match self {
            Distances::Spiral(p) => p.ball(t, n, r),
            Distances::Bfs(p) => p.ball(t, n, r),
        }
    }
}

/// The single authoritative state of a run.
#[derive(Clone, Debug)]
pub struct SimState {
    pub config: Config,
    pub topology: Topology,
    pub views: NeighborViews,
    pub stores: ReplicaStores,
    pub layer: SuperLayer,
    pub caps: BTreeMap<NodeId, Capability>,
    /// The tick being processed, or the next one between ticks.
    pub clock: u64,
    pub rng: SimRng,
    pub metrics: Metrics,
    pub distances: Distances,
    rounds: u64,
    queries: u64,
    /// Topology epoch and store version after the last round that changed
    /// nothing. While both hold, every replica would decide to stay again.
    settled: Option<(u64, u64)>,
}

impl SimState {
    /// Builds the starting network: mesh, capabilities, caches, the super
    /// layer when enabled, then one copy of each configured item.
    pub fn new(config: Config) -> Result<Self> {
        config.validate()?;
        let topology = match config.geode_level {
            Some(k) => build_geode(k)?,
            None => seed_icosahedron(),
        };
        let mut s = SimState {
            views: NeighborViews::new(config.ping_timeout),
            distances: Distances::new(config.distances),
            stores: ReplicaStores::new(),
            layer: SuperLayer::new(),
            caps: BTreeMap::new(),
            clock: 0,
            metrics: Metrics::default(),
            rounds: 0,
            queries: 0,
            settled: None,
            topology,
            rng: rng_from_seed(config.seed),
            config,
        };
        let base: Vec<NodeId> = s.topology.alive_nodes().collect();
        for n in base {
            let cap = s.config.capability.sample(&mut s.rng);
            s.open_node(n, cap);
        }
        if s.config.super_peers {
            s.layer = SuperLayer::bootstrap(&s.topology, &s.caps, &s.stores, &mut s.rng);
        }
        if let Some(target) = s.config.grow_to {
            let mut joins = 0;
            while s.topology.alive_count() < target {
                s.join()?;
                joins += 1;
                if s.config.super_peers && joins % GROWTH_REGULATION_EVERY == 0 {
                    s.layer.regulation_tick(&s.topology, &s.stores, &mut s.rng);
                }
            }
            if s.config.super_peers {
                s.layer.regulation_tick(&s.topology, &s.stores, &mut s.rng);
            }
        }
        let alive: Vec<NodeId> = s.topology.alive_nodes().collect();
        for d in 0..s.config.items {
            let n = alive[s.rng.random_range(0..alive.len())];
            s.stores.insert(n, DataId(d));
        }
        if s.config.super_peers {
            s.layer.refresh_indexes(&s.stores);
        }
        Ok(s)
    }

    fn capacity_for(&self, cap: Capability) -> usize {
        match self.config.capacity {
            CapacityRule::Capability => cap.0 as usize,
            CapacityRule::Fixed(c) => c,
            CapacityRule::Unbounded => usize::MAX,
        }
    }

    fn open_node(&mut self, n: NodeId, cap: Capability) {
        self.caps.insert(n, cap);
        self.stores.open(n, self.capacity_for(cap));
    }

    /// A uniformly random alive node.
    pub fn random_alive(&mut self) -> Option<NodeId> {
        let k = self.topology.alive_count();
        if k == 0 {
            return None;
        }
        let i = self.rng.random_range(0..k);
        self.topology.alive_nodes().nth(i)
    }

    /// A new node joins through a random alive entry.
    pub fn join(&mut self) -> Result<NodeId> {
        let entry = self.random_alive().ok_or_else(|| Error::InvalidArgument("no alive entry node".into()))?;
        let id = self.topology.next_id();
        connect_node(&mut self.topology, id, entry, &mut self.rng)?;
        let cap = self.config.capability.sample(&mut self.rng);
        self.open_node(id, cap);
        if self.config.super_peers {
            self.layer.add_peer(&self.topology, id, cap, entry, &self.stores, &mut self.rng);
        }
        Ok(id)
    }

    /// A random alive node stops answering. Its cache is lost and, if it was
    /// a super-peer, its sub-peers are orphaned; the mesh hole is only
    /// repaired once the ping protocol notices the silence.
    pub fn fail(&mut self) -> Result<Option<NodeId>> {
        if self.topology.alive_count() <= MIN_NODES {
            return Ok(None);
        }
        let Some(v) = self.random_alive() else { return Ok(None) };
        self.topology.mark_dead(v)?;
        self.stores.close(v);
        self.caps.remove(&v);
        if self.config.super_peers {
            self.layer.remove_peer(&self.topology, v, &self.stores, &mut self.rng);
        }
        Ok(Some(v))
    }

    /// Pings, repairs of the failures they reveal, and one orphan re-homing
    /// round. Returns the first repair error after attempting all repairs.
    pub fn ping(&mut self) -> Result<()> {
        let reports = ping_round(&self.topology, &mut self.views, self.clock);
        let mut first_err = None;
        for rep in reports {
            match repair_failure(&mut self.topology, rep.failed, &mut self.rng) {
                Ok(_) => self.views.clear_report(rep.failed),
                Err(e) => {
                    self.log(&e);
                    first_err.get_or_insert(e);
                }
            }
        }
        if self.config.super_peers {
            self.layer.rehome_orphans(&self.topology, &self.stores);
        }
        first_err.map_or(Ok(()), Err)
    }

    pub fn replication_round(&mut self) -> RoundReport {
        let params = self.config.replication;
        let now = (self.topology.epoch(), self.stores.version());
        let report = if self.settled == Some(now) {
            RoundReport::default()
        } else {
            let report = run_replication_round(&self.topology, &mut self.stores, &mut self.distances, &params, &mut self.rng);
            let quiet = report.creates + report.moves + report.removes + report.evictions == 0;
            self.settled = quiet.then(|| (self.topology.epoch(), self.stores.version()));
            report
        };
        self.rounds += 1;
        self.metrics.rounds.push(RoundRow {
            round: self.rounds,
            tick: self.clock,
            nodes: self.topology.alive_count(),
            replicas: self.stores.total_replicas(),
            creates: report.creates,
            moves: report.moves,
            removes: report.removes,
            evictions: report.evictions,
        });
        if self.config.super_peers {
            self.layer.refresh_indexes(&self.stores);
        }
        report
    }

    pub fn regulation(&mut self) {
        if !self.config.super_peers {
            return;
        }
        let rep = self.layer.regulation_tick(&self.topology, &self.stores, &mut self.rng);
        let violations = self.layer.check_invariants(&self.topology, false).len();
        let overloaded = self.layer.overloaded().count();
        self.metrics.regulation.push(RegulationRow {
            tick: self.clock,
            nodes: self.topology.alive_count(),
            supers: self.layer.super_count(),
            merges: rep.merges,
            moves: rep.moves,
            promotions: rep.promotions + rep.orphan_promotions,
            impossible: rep.impossible,
            rehomed: rep.rehomed,
            overloaded,
            violations,
        });
    }

    /// Routes `count` queries from random origins for random configured items.
    pub fn inject_queries(&mut self, count: u32) {
        if !self.config.super_peers {
            return;
        }
        for _ in 0..count {
            let Some(origin) = self.random_alive() else { return };
            let target = DataId(self.rng.random_range(0..self.config.items.max(1)));
            let q = Query {
                id: self.queries,
                origin,
                target,
                ttl: self.config.ttl,
            };
            self.queries += 1;
            let out = self.layer.route_query(&self.topology, q, &mut self.rng);
            self.metrics.queries.push(QueryRow {
                tick: self.clock,
                id: q.id,
                target: target.0,
                answered: out.answered(),
                super_hops: out.super_hops,
                mesh_hops: out.mesh_hops,
            });
        }
    }

    fn record_series(&mut self) {
        self.metrics.series.push(SeriesRow {
            tick: self.clock,
            nodes: self.topology.alive_count(),
            replicas: self.stores.total_replicas(),
            supers: self.layer.super_count(),
            orphans: self.layer.orphans().count(),
        });
    }

    fn log(&mut self, e: &Error) {
        self.metrics.errors.push(ErrorRow {
            tick: self.clock,
            message: e.to_string(),
        });
    }

    fn handle(&mut self, kind: EventKind) -> Result<()> {
        match kind {
            EventKind::Join => self.join().map(|_| ()),
            EventKind::Fail => self.fail().map(|_| ()),
            EventKind::PingRound => self.ping(),
            EventKind::ReplicationRound => {
                self.replication_round();
                Ok(())
            }
            EventKind::RegulationTick => {
                self.regulation();
                Ok(())
            }
            EventKind::QueryInject(k) => {
                self.inject_queries(k);
                Ok(())
            }
        }
    }
}

/// A state plus its pending events.
///
/// Within a tick, events run in this order: churn, ping and repair,
/// replication, regulation, queries. Replication comes every
/// `replicationPeriod` ticks and regulation every `regulationPeriod`.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub state: SimState,
    queue: EventQueue,
}

impl Simulation {
    pub fn new(config: Config) -> Result<Self> {
        let mut state = SimState::new(config)?;
        let mut queue = EventQueue::new();
        let c = state.config.clone();
        for (time, kind) in churn_events(&c.churn, c.horizon, &mut state.rng) {
            queue.push(time, kind);
        }
        for tick in 0..c.horizon {
            queue.push(tick, EventKind::PingRound);
        }
        for tick in (0..c.horizon).filter(|t| (t + 1) % c.replication_period == 0) {
            queue.push(tick, EventKind::ReplicationRound);
        }
        if c.super_peers {
            for tick in (0..c.horizon).filter(|t| (t + 1) % c.regulation_period == 0) {
                queue.push(tick, EventKind::RegulationTick);
            }
            for tick in 0..c.horizon {
                let k = poisson(c.query_rate, &mut state.rng);
                if k > 0 {
                    queue.push(tick, EventKind::QueryInject(k as u32));
                }
            }
        }
        Ok(Simulation { state, queue })
    }

    pub fn config(&self) -> &Config {
        &self.state.config
    }

    pub fn metrics(&self) -> &Metrics {
        &self.state.metrics
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Processes every tick before `until`, recording one series row per
    /// tick. Module errors are logged and skipped unless the configuration
    /// asks to halt on them.
    pub fn run_until(&mut self, until: u64) -> Result<()> {
        let until = until.min(self.state.config.horizon);
        while self.state.clock < until {
            while let Some(ev) = self.queue.peek().copied().filter(|e| e.time <= self.state.clock) {
                self.queue.pop();
                if let Err(e) = self.state.handle(ev.kind) {
                    if !matches!(ev.kind, EventKind::PingRound) {
                        self.state.log(&e);
                    }
                    if self.state.config.halt_on_error {
                        return Err(e);
                    }
                }
            }
            self.state.record_series();
            self.state.clock += 1;
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<()> {
        self.run_until(self.state.config.horizon)
    }

    pub fn into_metrics(self) -> Metrics {
        self.state.metrics
    }
}

/// Runs a configuration to its horizon.
pub fn run(config: &Config) -> Result<Metrics> {
    let mut sim = Simulation::new(config.clone())?;
    sim.run()?;
    Ok(sim.into_metrics())
}
