//! The deterministic discrete-event core. One tick is one ping period.
//! Joins and failures arrive as Poisson counts under a piecewise-constant
//! churn schedule; pings, replication rounds, regulation passes and query
//! injections are scheduled periodically.

mod config;
mod event;
mod geode;
mod metrics;
mod sim;

use rand::Rng;

pub use config::{CapacityRule, ChurnSchedule, ChurnSegment, Config, DistanceMode};
pub use event::{churn_events, churn_schedule, poisson, Event, EventKind, EventQueue};
pub use geode::{build_geode, geode_nodes, MAX_GEODE_LEVEL};
pub use metrics::{ErrorRow, Metrics, QueryRow, RegulationRow, RoundRow, SeriesRow};
pub use sim::{run, Distances, SimState, Simulation, MIN_NODES};

use crate::superpeer::{Capability, CapabilityDistribution};

/// Draws one node capability.
pub fn sample_capability<R: Rng + ?Sized>(dist: &CapabilityDistribution, rng: &mut R) -> Capability {
    dist.sample(rng)
}
