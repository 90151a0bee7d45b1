use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use super::metrics::{answer_speed_curve, rarity_profile_init, spacing_histogram, RarityTail, Spacing};
use crate::engine::{geode_nodes, CapacityRule, ChurnSchedule, ChurnSegment, Config, Metrics, Simulation, MIN_NODES};
use crate::error::{Error, Result};
use crate::ids::{DataId, NodeId};
use crate::mesh::{check_invariant, connect_node, repair_failure, seed_icosahedron};
use crate::rng_from_seed;

/// The experiments the harness can replay.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Preset {
    /// One item on a static geode until replication settles.
    Convergence,
    /// Nearest-replica distances at convergence, geode against grown mesh.
    Spacing,
    /// The network doubles then halves while replicas follow, at two
    /// removal thresholds.
    ChurnAdaptation,
    /// Skewed item popularity: only rare items should gain copies.
    RareData,
    /// Queries over the super layer of a grown network.
    AnswerSpeed,
    /// Random joins and failures with a mesh check after each one.
    TopologyFuzz,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Convergence,
        Preset::Spacing,
        Preset::ChurnAdaptation,
        Preset::RareData,
        Preset::AnswerSpeed,
        Preset::TopologyFuzz,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Convergence => "convergence",
            Preset::Spacing => "spacing",
            Preset::ChurnAdaptation => "churn-adaptation",
            Preset::RareData => "rare-data",
            Preset::AnswerSpeed => "answer-speed",
            Preset::TopologyFuzz => "topology-fuzz",
        }
    }

    /// The CSV files a run of this preset writes.
    pub fn files(self) -> &'static [&'static str] {
        match self {
            Preset::Convergence => &["series.csv", "rounds.csv", "regulation.csv", "queries.csv", "errors.csv"],
            Preset::Spacing => &["spacing.csv", "rounds_geode.csv", "rounds_grown.csv"],
            Preset::ChurnAdaptation => &["series_10r.csv", "series_20r.csv", "churn_summary.csv", "errors.csv"],
            Preset::RareData => &["rarity.csv", "rounds.csv"],
            Preset::AnswerSpeed => &["answer_speed.csv", "regulation.csv", "supers.csv", "rounds.csv", "series.csv"],
            Preset::TopologyFuzz => &["fuzz.csv"],
        }
    }

    /// The configuration this preset runs for `seed`. `large` selects the
    /// full-size network instead of the scaled-down default.
    pub fn config(self, seed: u64, large: bool) -> Config {
        let mut c = Config {
            seed,
            preset: Some(self.name().to_string()),
            ..Config::default()
        };
        match self {
            Preset::Convergence | Preset::Spacing => {
                c.items = 1;
                c.horizon = 1500;
                if large {
                    c.geode_level = Some(6);
                    c.replication.r = 25;
                    c.replication.max_score = 250;
                    c.replication.t = 16;
                } else {
                    c.geode_level = Some(4);
                    c.replication.r = 8;
                    c.replication.max_score = 80;
                    c.replication.t = 4;
                }
            }
            Preset::ChurnAdaptation => {
                let level = if large { 6 } else { 4 };
                let r = if large { 30 } else { 8 };
                c.geode_level = None;
                c.grow_to = Some(geode_nodes(level));
                c.items = 1;
                c.replication.r = r;
                c.replication.max_score = 10 * r as u64;
                c.replication.t = 16;
                let phase = 500;
                let rate = geode_nodes(level) as f64 / phase as f64;
                c.churn = ChurnSchedule {
                    segments: vec![
                        ChurnSegment {
                            start: phase,
                            end: 2 * phase,
                            arrivals: rate,
                            departures: 0.0,
                        },
                        ChurnSegment {
                            start: 3 * phase,
                            end: 4 * phase,
                            arrivals: 0.0,
                            departures: rate,
                        },
                    ],
                };
                c.horizon = 5 * phase;
            }
            Preset::RareData => {
                c.grow_to = Some(if large { 10_000 } else { 2562 });
                c.replication.r = if large { 30 } else { 25 };
                c.replication.max_score = u64::MAX;
                c.replication.t = 4;
                c.capacity = CapacityRule::Unbounded;
                c.items = if large { 100_000 } else { 2000 };
                c.horizon = 1500;
            }
            Preset::AnswerSpeed => {
                c.grow_to = Some(if large { 100_000 } else { 10_000 });
                c.super_peers = true;
                c.items = 1;
                c.replication.r = 8;
                c.replication.max_score = 80;
                c.replication.t = 4;
                c.horizon = 1000;
            }
            Preset::TopologyFuzz => {
                if large {
                    c.fuzz_joins = 50_000;
                    c.fuzz_failures = 20_000;
                }
            }
        }
        c
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset `{s}`")))
    }
}

/// The CSV files of one preset run, in a fixed order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PresetOutput {
    pub files: Vec<(String, String)>,
}

impl PresetOutput {
    fn add(&mut self, name: &str, body: String) {
        self.files.push((name.to_string(), body));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_str())
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

/// Runs `preset` with the given configuration (normally
/// [`Preset::config`], possibly overridden).
pub fn run_preset(preset: Preset, config: &Config) -> Result<PresetOutput> {
    let mut out = PresetOutput::default();
    match preset {
        Preset::Convergence => {
            let mut sim = Simulation::new(config.clone())?;
            sim.run()?;
            for (name, body) in sim.metrics().files() {
                out.add(name, body);
            }
        }
        Preset::Spacing => {
            let (geode, grown) = spacing_pair(config)?;
            let mut csv = String::from("topology,distance,count\n");
            for (label, h) in [("geode", &geode.1), ("grown", &grown.1)] {
                for (d, c) in &h.counts {
                    let _ = writeln!(csv, "{label},{d},{c}");
                }
            }
            out.add("spacing.csv", csv);
            out.add("rounds_geode.csv", geode.0.rounds_csv());
            out.add("rounds_grown.csv", grown.0.rounds_csv());
        }
        Preset::ChurnAdaptation => {
            let mut summary = String::from("maxScore,baselineRatio,maxDeviation,amplitude\n");
            let mut errors = String::from("maxScore,tick,message\n");
            for k in [10, 20] {
                let mut c = config.clone();
                c.replication.max_score = k * c.replication.r as u64;
                let m = crate::engine::run(&c)?;
                let s = churn_stats(&m, &c.churn);
                let _ = writeln!(
                    summary,
                    "{},{:.6},{:.6},{:.6}",
                    c.replication.max_score, s.baseline, s.max_deviation, s.amplitude
                );
                for e in &m.errors {
                    let _ = writeln!(errors, "{},{},{}", c.replication.max_score, e.tick, e.message.replace([',', '\n'], ";"));
                }
                out.add(&format!("series_{k}r.csv"), m.series_csv());
            }
            out.add("churn_summary.csv", summary);
            out.add("errors.csv", errors);
        }
        Preset::RareData => {
            let (initial, sim) = rare_data(config)?;
            let mut csv = String::from("item,initial,final\n");
            for (d, c) in &initial {
                let _ = writeln!(csv, "{},{c},{}", d.0, sim.state.stores.copies(*d));
            }
            out.add("rarity.csv", csv);
            out.add("rounds.csv", sim.metrics().rounds_csv());
        }
        Preset::AnswerSpeed => {
            let mut sim = Simulation::new(config.clone())?;
            sim.run()?;
            let st = &mut sim.state;
            let max_ttl = (2 * st.layer.super_count()).max(1) as u32;
            let curve = answer_speed_curve(&st.layer, &st.topology, DataId(0), 1000, max_ttl, &mut st.rng);
            out.add("answer_speed.csv", curve.csv());
            out.add("regulation.csv", sim.metrics().regulation_csv());
            out.add("supers.csv", sim.state.layer.snapshot_csv());
            out.add("rounds.csv", sim.metrics().rounds_csv());
            out.add("series.csv", sim.metrics().series_csv());
        }
        Preset::TopologyFuzz => {
            let report = topology_fuzz(config.seed, config.fuzz_joins, config.fuzz_failures)?;
            out.add("fuzz.csv", report.csv());
        }
    }
    Ok(out)
}

/// Runs the replication of `config` on its geode and on a grown mesh with
/// as many nodes, returning each run's metrics and final spacing of item 0.
pub fn spacing_pair(config: &Config) -> Result<((Metrics, Spacing), (Metrics, Spacing))> {
    let level = config.geode_level.unwrap_or(4);
    let mut geode = config.clone();
    geode.geode_level = Some(level);
    geode.grow_to = None;
    let mut grown = config.clone();
    grown.geode_level = None;
    grown.grow_to = Some(geode_nodes(level));
    let run = |c: Config| -> Result<(Metrics, Spacing)> {
        let mut sim = Simulation::new(c)?;
        sim.run()?;
        let h = spacing_histogram(&sim.state.topology, &sim.state.stores, DataId(0));
        Ok((sim.into_metrics(), h))
    };
    Ok((run(geode)?, run(grown)?))
}

/// Seeds the rare-data popularity profile and runs the replication rounds.
/// Returns the initial copy counts and the finished simulation.
pub fn rare_data(config: &Config) -> Result<(BTreeMap<DataId, usize>, Simulation)> {
    let mut c = config.clone();
    let n_items = c.items;
    c.items = 0;
    let mut sim = Simulation::new(c)?;
    let st = &mut sim.state;
    let initial = rarity_profile_init(&st.topology, &mut st.stores, n_items, RarityTail::default(), &mut st.rng)?;
    sim.run()?;
    Ok((initial, sim))
}

/// Replica-to-node ratio statistics of a churn run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChurnStats {
    /// Mean ratio over the last fifth of the settling phase before churn.
    pub baseline: f64,
    /// Largest relative departure from the baseline once churn starts.
    pub max_deviation: f64,
    /// Back-and-forth movement of the replica count, as a fraction of its
    /// mean: within each phase of constant rates, the total variation
    /// across replication rounds minus the net change.
    pub amplitude: f64,
}

/// Statistics from the metrics of a run driven by `schedule`.
pub fn churn_stats(m: &Metrics, schedule: &ChurnSchedule) -> ChurnStats {
    let churn_start = schedule.segments.iter().map(|s| s.start).min().unwrap_or(0);
    let ratio = |r: &crate::engine::SeriesRow| r.replicas as f64 / r.nodes.max(1) as f64;
    let settle: Vec<f64> = m
        .series
        .iter()
        .filter(|r| r.tick >= churn_start * 4 / 5 && r.tick < churn_start)
        .map(ratio)
        .collect();
    let baseline = if settle.is_empty() {
        0.0
    } else {
        settle.iter().sum::<f64>() / settle.len() as f64
    };
    let max_deviation = if baseline > 0.0 {
        m.series
            .iter()
            .filter(|r| r.tick >= churn_start)
            .map(|r| (ratio(r) / baseline - 1.0).abs())
            .fold(0.0, f64::max)
    } else {
        0.0
    };

    let mut bounds: Vec<u64> = schedule.segments.iter().flat_map(|s| [s.start, s.end]).collect();
    bounds.sort_unstable();
    let phase = |tick: u64| bounds.partition_point(|&b| b <= tick);
    let rounds: Vec<_> = m.rounds.iter().filter(|r| r.tick >= churn_start).collect();
    let mut back_and_forth = 0.0;
    let mut i = 0;
    while i < rounds.len() {
        let p = phase(rounds[i].tick);
        let j = i + rounds[i..].iter().take_while(|r| phase(r.tick) == p).count();
        let counts: Vec<f64> = rounds[i.saturating_sub(1)..j].iter().map(|r| r.replicas as f64).collect();
        let total: f64 = counts.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        let net = (counts[counts.len() - 1] - counts[0]).abs();
        back_and_forth += total - net;
        i = j;
    }
    let mean = rounds.iter().map(|r| r.replicas as f64).sum::<f64>() / rounds.len().max(1) as f64;
    let amplitude = if mean > 0.0 { back_and_forth / mean } else { 0.0 };
    ChurnStats {
        baseline,
        max_deviation,
        amplitude,
    }
}

/// One fuzz step and the mesh check that followed it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FuzzRow {
    pub op: usize,
    pub kind: &'static str,
    pub node: NodeId,
    pub nodes: usize,
    pub edges: usize,
    pub violations: usize,
    pub components: usize,
    pub error: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FuzzReport {
    pub rows: Vec<FuzzRow>,
}

impl FuzzReport {
    /// Steps after which the mesh was invalid or disconnected.
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.violations > 0 || r.components > 1).count()
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("op,kind,node,nodes,edges,violations,components,error\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.op, r.kind, r.node, r.nodes, r.edges, r.violations, r.components, r.error as u8
            );
        }
        s
    }
}

/// Starts from the icosahedron and applies `joins` joins and `failures`
/// failures in random order, each failure repaired at once, checking the
/// whole mesh after every step. A failure due while the mesh has at most
/// [`MIN_NODES`] nodes trades places with the next join.
pub fn topology_fuzz(seed: u64, joins: usize, failures: usize) -> Result<FuzzReport> {
    let mut rng = rng_from_seed(seed);
    let mut t = seed_icosahedron();
    let mut ops: Vec<bool> = std::iter::repeat_n(true, joins).chain(std::iter::repeat_n(false, failures)).collect();
    ops.shuffle(&mut rng);
    let mut report = FuzzReport::default();
    for i in 0..ops.len() {
        let alive: Vec<NodeId> = t.alive_nodes().collect();
        if !ops[i] && alive.len() <= MIN_NODES {
            // too small to lose a node: bring the next join forward
            if let Some(j) = ops[i..].iter().position(|&op| op) {
                ops.swap(i, i + j);
            }
        }
        let pick = alive[rng.random_range(0..alive.len())];
        let (kind, node, error) = if ops[i] || alive.len() <= MIN_NODES {
            let id = t.next_id();
            ("join", id, connect_node(&mut t, id, pick, &mut rng).is_err())
        } else {
            t.mark_dead(pick)?;
            ("fail", pick, repair_failure(&mut t, pick, &mut rng).is_err())
        };
        let inv = check_invariant(&t);
        report.rows.push(FuzzRow {
            op: i,
            kind,
            node,
            nodes: t.alive_count(),
            edges: t.edge_count(),
            violations: inv.violations.len(),
            components: inv.components.len(),
            error,
        });
    }
    Ok(report)
}
