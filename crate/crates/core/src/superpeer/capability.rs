use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};

/// Abstract resources of a node. A super-peer manages at most a tenth of its
/// capability in peers, itself included.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Capability(pub u32);

impl Capability {
    pub fn quota(self) -> usize {
        (self.0 / 10) as usize
    }
}

/// A discrete distribution of capabilities, written `value:prob,...`.
#[derive(Clone, Debug, PartialEq)]
pub struct CapabilityDistribution {
    entries: Vec<(u32, f64)>,
    index: WeightedIndex<f64>,
}

impl CapabilityDistribution {
    pub fn new(entries: Vec<(u32, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Config("empty capability distribution".into()));
        }
        let total: f64 = entries.iter().map(|e| e.1).sum();
        if entries.iter().any(|e| e.1.is_nan() || e.1 < 0.0) || (total - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!("capability probabilities must be non-negative and sum to 1, got {total}")));
        }
        let index = WeightedIndex::new(entries.iter().map(|e| e.1)).map_err(|e| Error::Config(e.to_string()))?;
        Ok(CapabilityDistribution { entries, index })
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Capability {
        Capability(self.entries[self.index.sample(rng)].0)
    }

    /// Expected quota per node.
    pub fn mean_quota(&self) -> f64 {
        self.entries.iter().map(|&(v, p)| Capability(v).quota() as f64 * p).sum()
    }
}

impl Default for CapabilityDistribution {
    fn default() -> Self {
        CapabilityDistribution::new(vec![(1, 0.6), (10, 0.3), (100, 0.09), (1000, 0.01)]).unwrap()
    }
}

impl FromStr for CapabilityDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let entries = s
            .split(',')
            .map(|part| {
                let (v, p) = part
                    .split_once(':')
                    .ok_or_else(|| Error::Parse(format!("capability entry `{part}` is not value:prob")))?;
                let v = v.trim().parse::<u32>().map_err(|e| Error::Parse(format!("capability `{v}`: {e}")))?;
                let p = p.trim().parse::<f64>().map_err(|e| Error::Parse(format!("probability `{p}`: {e}")))?;
                Ok((v, p))
            })
            .collect::<Result<Vec<_>>>()?;
        CapabilityDistribution::new(entries)
    }
}

impl fmt::Display for CapabilityDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (v, p)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}:{p}")?;
        }
        Ok(())
    }
}
