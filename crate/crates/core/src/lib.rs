//! Adapnet: a deterministic simulator and protocol library for a peer-to-peer
//! overlay built on a closed triangular mesh.
//!
//! The crate is split along the protocol's layers:
//!
//! - [`mesh`]: the triangular-mesh overlay (seeding, joins, failure repair,
//!   flattening, ping-based neighbor knowledge).
//! - [`spiral`]: the spiral walk, an exhaustive ring-by-ring neighborhood scan
//!   whose message count grows linearly with the number of visited nodes.
//! - [`replication`]: the repulsion-based replica placement agent.
//! - [`superpeer`]: the super-peer search layer and its load regulation loops.
//! - [`engine`]: the discrete-event core that drives all of the above.
//! - [`harness`]: experiment presets and the metrics they produce.
//!
//! Everything random flows from one seeded generator, so equal configurations
//! produce byte-identical outputs.

pub mod bfs;
pub mod engine;
pub mod error;
pub mod harness;
pub mod ids;
pub mod mesh;
pub mod replication;
pub mod spiral;
pub mod superpeer;

pub use engine::{build_geode, Config, Metrics, SimState, Simulation};
pub use error::{Error, Result};
pub use ids::{DataId, NodeId};
pub use mesh::{check_invariant, common_neighbors, seed_icosahedron, InvariantReport, Topology};
pub use replication::{ReplicationParams, ReplicaStore, ReplicaStores};
pub use spiral::{spiral_walk, WalkReport, WalkerState};
pub use superpeer::{Capability, PeerRole, Query, SuperLayer};

/// The generator used throughout the simulator.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Builds the simulator generator from a seed.
pub fn rng_from_seed(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}
