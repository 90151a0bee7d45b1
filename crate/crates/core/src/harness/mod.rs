//! Experiment presets and the metrics they report: replication convergence,
//! replica spacing, adaptation to churn, selectivity for rare items, query
//! answer speed over the super layer, and a mesh fuzz.

mod metrics;
mod presets;

pub use metrics::{
    answer_speed_curve, oracle_compare, rarity_profile_init, spacing_histogram, AnswerCurve, OracleMismatch, OracleReport,
    RarityTail, Spacing,
};
pub use presets::{
    churn_stats, rare_data, run_preset, spacing_pair, topology_fuzz, ChurnStats, FuzzReport, FuzzRow, Preset, PresetOutput,
};
