use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::config::ChurnSchedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    /// A new node joins through a random alive entry.
    Join,
    /// A uniformly random alive node fails without notice.
    Fail,
    PingRound,
    ReplicationRound,
    RegulationTick,
    /// Injects this many queries.
    QueryInject(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Event {
    pub time: u64,
    pub seq: u64,
    pub kind: EventKind,
}

/// Pending events, popped in `(time, insertion order)` order.
#[derive(Clone, Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Event>>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: u64, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Event { time, seq, kind }));
    }

    pub fn peek(&self) -> Option<&Event> {
        self.heap.peek().map(|r| &r.0)
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|r| r.0)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Draws from a Poisson law with the given mean; zero for a zero mean.
pub fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map_or(0, |p| p.sample(rng) as u64)
}

/// Join and Fail events over `[0, horizon)` with Poisson counts per tick.
/// Events within a tick come joins first.
pub fn churn_events<R: Rng + ?Sized>(schedule: &ChurnSchedule, horizon: u64, rng: &mut R) -> Vec<(u64, EventKind)> {
    let mut out = Vec::new();
    if schedule.is_empty() {
        return out;
    }
    for tick in 0..horizon {
        let (arr, dep) = schedule.rates_at(tick);
        let joins = poisson(arr, rng);
        let fails = poisson(dep, rng);
        out.extend((0..joins).map(|_| (tick, EventKind::Join)));
        out.extend((0..fails).map(|_| (tick, EventKind::Fail)));
    }
    out
}

/// Churn at constant rates over `[0, horizon)`.
pub fn churn_schedule<R: Rng + ?Sized>(arrival_rate: f64, departure_rate: f64, horizon: u64, rng: &mut R) -> Vec<Event> {
    let schedule = ChurnSchedule {
        segments: vec![super::config::ChurnSegment {
            start: 0,
            end: horizon,
            arrivals: arrival_rate,
            departures: departure_rate,
        }],
    };
    churn_events(&schedule, horizon, rng)
        .into_iter()
        .enumerate()
        .map(|(seq, (time, kind))| Event { time, seq: seq as u64, kind })
        .collect()
}
