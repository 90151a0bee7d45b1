use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

/// End-of-tick population counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeriesRow {
    pub tick: u64,
    pub nodes: usize,
    pub replicas: usize,
    pub supers: usize,
    pub orphans: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoundRow {
    pub round: u64,
    pub tick: u64,
    pub nodes: usize,
    pub replicas: usize,
    pub creates: usize,
    pub moves: usize,
    pub removes: usize,
    pub evictions: usize,
}

impl RoundRow {
    pub fn changes(&self) -> usize {
        self.creates + self.moves + self.removes
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RegulationRow {
    pub tick: u64,
    pub nodes: usize,
    pub supers: usize,
    pub merges: usize,
    pub moves: usize,
    pub promotions: usize,
    pub impossible: usize,
    pub rehomed: usize,
    /// Super-peers over quota after the tick, a subset of those counted
    /// as impossible.
    pub overloaded: usize,
    /// Role-totality problems found right after the tick.
    pub violations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueryRow {
    pub tick: u64,
    pub id: u64,
    pub target: u64,
    pub answered: bool,
    pub super_hops: u32,
    pub mesh_hops: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErrorRow {
    pub tick: u64,
    pub message: String,
}

/// Everything a run records, one CSV file per family.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metrics {
    pub series: Vec<SeriesRow>,
    pub rounds: Vec<RoundRow>,
    pub regulation: Vec<RegulationRow>,
    pub queries: Vec<QueryRow>,
    pub errors: Vec<ErrorRow>,
}

impl Metrics {
    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
            && self.rounds.is_empty()
            && self.regulation.is_empty()
            && self.queries.is_empty()
            && self.errors.is_empty()
    }

    pub fn series_csv(&self) -> String {
        let mut s = String::from("tick,nodes,replicas,supers,orphans\n");
        for r in &self.series {
            let _ = writeln!(s, "{},{},{},{},{}", r.tick, r.nodes, r.replicas, r.supers, r.orphans);
        }
        s
    }

    pub fn rounds_csv(&self) -> String {
        let mut s = String::from("round,tick,nodes,replicas,creates,moves,removes,evictions\n");
        for r in &self.rounds {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.round, r.tick, r.nodes, r.replicas, r.creates, r.moves, r.removes, r.evictions
            );
        }
        s
    }

    pub fn regulation_csv(&self) -> String {
        let mut s = String::from("tick,nodes,supers,merges,moves,promotions,impossible,rehomed,overloaded,violations\n");
        for r in &self.regulation {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.tick,
                r.nodes,
                r.supers,
                r.merges,
                r.moves,
                r.promotions,
                r.impossible,
                r.rehomed,
                r.overloaded,
                r.violations
            );
        }
        s
    }

    pub fn queries_csv(&self) -> String {
        let mut s = String::from("queryId,target,answered,superHops,meshHops\n");
        for r in &self.queries {
            let _ = writeln!(s, "{},{},{},{},{}", r.id, r.target, r.answered as u8, r.super_hops, r.mesh_hops);
        }
        s
    }

    /// Messages have their commas replaced so the file stays unquoted.
    pub fn errors_csv(&self) -> String {
        let mut s = String::from("tick,message\n");
        for r in &self.errors {
            let _ = writeln!(s, "{},{}", r.tick, r.message.replace([',', '\n'], ";"));
        }
        s
    }

    /// `(file name, contents)` for every family, headers included.
    pub fn files(&self) -> Vec<(&'static str, String)> {
        vec![
            ("series.csv", self.series_csv()),
            ("rounds.csv", self.rounds_csv()),
            ("regulation.csv", self.regulation_csv()),
            ("queries.csv", self.queries_csv()),
            ("errors.csv", self.errors_csv()),
        ]
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, body) in self.files() {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}
