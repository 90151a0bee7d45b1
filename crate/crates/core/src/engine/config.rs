use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::replication::ReplicationParams;
use crate::superpeer::CapabilityDistribution;

/// One piece of a churn schedule: over ticks `[start, end)`, on average
/// `arrivals` joins and `departures` failures per tick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChurnSegment {
    pub start: u64,
    pub end: u64,
    pub arrivals: f64,
    pub departures: f64,
}

/// Piecewise-constant churn rates, written `t0-t1:arr:dep;...`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChurnSchedule {
    pub segments: Vec<ChurnSegment>,
}

impl ChurnSchedule {
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Rates in effect at `tick`; overlapping segments add up.
    pub fn rates_at(&self, tick: u64) -> (f64, f64) {
        self.segments
            .iter()
            .filter(|s| s.start <= tick && tick < s.end)
            .fold((0.0, 0.0), |(a, d), s| (a + s.arrivals, d + s.departures))
    }
}

impl FromStr for ChurnSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut segments = Vec::new();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let bad = || Error::Parse(format!("churn segment `{part}` is not t0-t1:arr:dep"));
            let mut fields = part.split(':');
            let (Some(span), Some(arr), Some(dep), None) = (fields.next(), fields.next(), fields.next(), fields.next()) else {
                return Err(bad());
            };
            let (t0, t1) = span.split_once('-').ok_or_else(bad)?;
            let seg = ChurnSegment {
                start: t0.trim().parse().map_err(|_| bad())?,
                end: t1.trim().parse().map_err(|_| bad())?,
                arrivals: arr.trim().parse().map_err(|_| bad())?,
                departures: dep.trim().parse().map_err(|_| bad())?,
            };
            if seg.end < seg.start || seg.arrivals.is_nan() || seg.arrivals < 0.0 || seg.departures.is_nan() || seg.departures < 0.0 {
                return Err(Error::Config(format!("churn segment `{part}` has a negative span or rate")));
            }
            segments.push(seg);
        }
        Ok(ChurnSchedule { segments })
    }
}

impl fmt::Display for ChurnSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.segments.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{}-{}:{}:{}", s.start, s.end, s.arrivals, s.departures)?;
        }
        Ok(())
    }
}

/// How large each node's replica cache is.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CapacityRule {
    /// As many items as the node's capability.
    #[default]
    Capability,
    Fixed(usize),
    /// Caches never fill.
    Unbounded,
}

impl FromStr for CapacityRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "capability" => Ok(CapacityRule::Capability),
            "unbounded" => Ok(CapacityRule::Unbounded),
            n => n
                .parse()
                .map(CapacityRule::Fixed)
                .map_err(|_| Error::Parse(format!("capacity `{n}` is not `capability`, `unbounded` or a count"))),
        }
    }
}

impl fmt::Display for CapacityRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CapacityRule::Capability => f.write_str("capability"),
            CapacityRule::Fixed(n) => write!(f, "{n}"),
            CapacityRule::Unbounded => f.write_str("unbounded"),
        }
    }
}

/// Which scanner measures hop distances for replication.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DistanceMode {
    #[default]
    Spiral,
    Bfs,
}

impl FromStr for DistanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "spiral" => Ok(DistanceMode::Spiral),
            "bfs" => Ok(DistanceMode::Bfs),
            other => Err(Error::Parse(format!("distances `{other}` is neither `spiral` nor `bfs`"))),
        }
    }
}

impl fmt::Display for DistanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceMode::Spiral => "spiral",
            DistanceMode::Bfs => "bfs",
        })
    }
}

/// A full simulation setup, read from and written as flat `key=value` lines.
///
/// The starting mesh is the geode of `geodeLevel` if set, the icosahedron
/// otherwise, then grown by joins to `growTo` nodes if set.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub seed: u64,
    pub preset: Option<String>,
    pub geode_level: Option<u32>,
    pub grow_to: Option<usize>,
    pub replication: ReplicationParams,
    /// Super-layer forwards allowed per injected query.
    pub ttl: u32,
    pub capability: CapabilityDistribution,
    pub churn: ChurnSchedule,
    /// Ticks to simulate.
    pub horizon: u64,
    pub replication_period: u64,
    pub regulation_period: u64,
    pub ping_timeout: u64,
    pub capacity: CapacityRule,
    /// Items seeded with one copy each on random nodes.
    pub items: u64,
    pub super_peers: bool,
    /// Mean queries injected per tick.
    pub query_rate: f64,
    pub halt_on_error: bool,
    pub distances: DistanceMode,
    /// Joins and failures of the topology fuzz.
    pub fuzz_joins: usize,
    pub fuzz_failures: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            preset: None,
            geode_level: None,
            grow_to: None,
            replication: ReplicationParams::default(),
            ttl: 120,
            capability: CapabilityDistribution::default(),
            churn: ChurnSchedule::default(),
            horizon: 0,
            replication_period: 5,
            regulation_period: 10,
            ping_timeout: crate::mesh::DEFAULT_PING_TIMEOUT,
            capacity: CapacityRule::default(),
            items: 0,
            super_peers: false,
            query_rate: 0.0,
            halt_on_error: false,
            distances: DistanceMode::default(),
            fuzz_joins: 5000,
            fuzz_failures: 2000,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse(format!("bad value `{v}` for `{key}`")))
}

fn parse_opt<T: FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    if v == "none" {
        Ok(None)
    } else {
        parse(key, v).map(Some)
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Parse(format!("bad boolean `{v}` for `{key}`"))),
    }
}

fn opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

impl Config {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "seed" => self.seed = parse(key, v)?,
            "preset" => self.preset = (v != "none").then(|| v.to_string()),
            "geodeLevel" => self.geode_level = parse_opt(key, v)?,
            "growTo" => self.grow_to = parse_opt(key, v)?,
            "r" => self.replication.r = parse(key, v)?,
            "maxScore" => self.replication.max_score = parse(key, v)?,
            "t" => self.replication.t = parse(key, v)?,
            "ttl" => self.ttl = parse(key, v)?,
            "capability" => self.capability = v.parse()?,
            "churn" => self.churn = v.parse()?,
            "horizon" => self.horizon = parse(key, v)?,
            "replicationPeriod" => self.replication_period = parse(key, v)?,
            "regulationPeriod" => self.regulation_period = parse(key, v)?,
            "pingTimeout" => self.ping_timeout = parse(key, v)?,
            "capacity" => self.capacity = v.parse()?,
            "items" => self.items = parse(key, v)?,
            "superPeers" => self.super_peers = parse_bool(key, v)?,
            "queryRate" => self.query_rate = parse(key, v)?,
            "haltOnError" => self.halt_on_error = parse_bool(key, v)?,
            "distances" => self.distances = v.parse()?,
            "fuzzJoins" => self.fuzz_joins = parse(key, v)?,
            "fuzzFailures" => self.fuzz_failures = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines on top of `self`. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: `{line}` is not key=value", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.replication.validate()?;
        if let Some(k) = self.geode_level {
            if k > crate::engine::MAX_GEODE_LEVEL {
                return Err(Error::ResourceLimit(format!("geode level {k} exceeds {}", crate::engine::MAX_GEODE_LEVEL)));
            }
        }
        if self.replication_period == 0 || self.regulation_period == 0 {
            return Err(Error::Config("periods must be at least one tick".into()));
        }
        if self.query_rate.is_nan() || self.query_rate < 0.0 {
            return Err(Error::Config(format!("queryRate must be non-negative, got {}", self.query_rate)));
        }
        Ok(())
    }
}

impl FromStr for Config {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut c = Config::default();
        c.apply(s)?;
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed={}", self.seed)?;
        writeln!(f, "preset={}", opt(&self.preset))?;
        writeln!(f, "geodeLevel={}", opt(&self.geode_level))?;
        writeln!(f, "growTo={}", opt(&self.grow_to))?;
        writeln!(f, "r={}", self.replication.r)?;
        writeln!(f, "maxScore={}", self.replication.max_score)?;
        writeln!(f, "t={}", self.replication.t)?;
        writeln!(f, "ttl={}", self.ttl)?;
        writeln!(f, "capability={}", self.capability)?;
        writeln!(f, "churn={}", self.churn)?;
        writeln!(f, "horizon={}", self.horizon)?;
        writeln!(f, "replicationPeriod={}", self.replication_period)?;
        writeln!(f, "regulationPeriod={}", self.regulation_period)?;
        writeln!(f, "pingTimeout={}", self.ping_timeout)?;
        writeln!(f, "capacity={}", self.capacity)?;
        writeln!(f, "items={}", self.items)?;
        writeln!(f, "superPeers={}", self.super_peers)?;
        writeln!(f, "queryRate={}", self.query_rate)?;
        writeln!(f, "haltOnError={}", self.halt_on_error)?;
        writeln!(f, "distances={}", self.distances)?;
        writeln!(f, "fuzzJoins={}", self.fuzz_joins)?;
        writeln!(f, "fuzzFailures={}", self.fuzz_failures)
    }
}
