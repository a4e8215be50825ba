//! Critical values for the pivotal and oracle limit laws.
//!
//! A table holds, per statistic, either a sorted Monte Carlo sample (queried through the
//! left-continuous inverse of its empirical distribution function) or a coarse grid of
//! `(delta, c_delta)` pairs interpolated linearly in `delta`. Samples take precedence.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Statistic {
    L0,
    L1,
    M,
    AbsL0,
    AbsL1,
    AbsM,
    AbsH2,
    AbsH3,
    AbsH2Mode,
}

impl Statistic {
    pub const ALL: [Statistic; 9] = [
        Statistic::L0,
        Statistic::L1,
        Statistic::M,
        Statistic::AbsL0,
        Statistic::AbsL1,
        Statistic::AbsM,
        Statistic::AbsH2,
        Statistic::AbsH3,
        Statistic::AbsH2Mode,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::L0 => "L0",
            Statistic::L1 => "L1",
            Statistic::M => "M",
            Statistic::AbsL0 => "absL0",
            Statistic::AbsL1 => "absL1",
            Statistic::AbsM => "absM",
            Statistic::AbsH2 => "absH2",
            Statistic::AbsH3 => "absH3",
            Statistic::AbsH2Mode => "absH2mode",
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Statistic::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::MissingStatistic(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    #[serde(rename = "B")]
    pub b: usize,
    pub n: usize,
    pub f0: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalValueTable {
    samples: BTreeMap<Statistic, Vec<f64>>,
    /// `(delta, c_delta)` sorted by ascending delta.
    grids: BTreeMap<Statistic, Vec<(f64, f64)>>,
    meta: TableMeta,
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLevel(delta))
    }
}

/// Left-continuous inverse ECDF at probability `1 - delta` of a sorted sample.
pub fn upper_quantile(sorted: &[f64], delta: f64) -> f64 {
    let b = sorted.len();
    let k = ((1.0 - delta) * b as f64 - 1e-9).ceil() as usize;
    sorted[k.clamp(1, b) - 1]
}

const SIGNED_DELTAS: [f64; 9] = [0.990, 0.975, 0.950, 0.900, 0.500, 0.100, 0.050, 0.025, 0.010];
const ABS_DELTAS: [f64; 6] = [0.50, 0.20, 0.10, 0.05, 0.02, 0.01];

impl CriticalValueTable {
    /// Builds a table from raw Monte Carlo samples; each sample is sorted.
    pub fn from_samples(samples: BTreeMap<Statistic, Vec<f64>>, meta: TableMeta) -> Result<Self> {
        let mut out = BTreeMap::new();
        for (stat, mut v) in samples {
            if v.is_empty() {
                return Err(Error::InvalidInput(format!("empty sample for {stat}")));
            }
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite(i));
            }
            v.sort_by(f64::total_cmp);
            out.insert(stat, v);
        }
        Ok(Self {
            samples: out,
            grids: BTreeMap::new(),
            meta,
        })
    }

    /// Rounded published quantiles: signed laws on a nine-point grid, absolute values of
    /// the pivotal and oracle laws on a six-point grid.
    pub fn builtin() -> Self {
        let signed = |vals: [f64; 9]| -> Vec<(f64, f64)> {
            let mut g: Vec<(f64, f64)> = SIGNED_DELTAS.into_iter().zip(vals).collect();
            g.reverse();
            g
        };
        let abs = |vals: [f64; 6]| -> Vec<(f64, f64)> {
            let mut g: Vec<(f64, f64)> = ABS_DELTAS.into_iter().zip(vals).collect();
            g.reverse();
            g
        };
        let grids = BTreeMap::from([
            (
                Statistic::L0,
                signed([-2.59, -2.03, -1.61, -1.19, 0.04, 1.39, 1.82, 2.20, 2.66]),
            ),
            (
                Statistic::L1,
                signed([-11.87, -9.00, -6.78, -4.55, 0.00, 4.54, 6.77, 9.00, 11.91]),
            ),
            (
                Statistic::M,
                signed([-0.86, -0.61, -0.48, -0.35, 0.00, 0.35, 0.47, 0.61, 0.86]),
            ),
            (Statistic::AbsL0, abs([0.65, 1.30, 1.73, 2.13, 2.63, 2.99])),
            (Statistic::AbsL1, abs([1.73, 4.55, 6.78, 9.00, 11.89, 14.02])),
            (Statistic::AbsM, abs([0.19, 0.35, 0.47, 0.61, 0.86, 1.13])),
            (Statistic::AbsH2, abs([0.89, 1.68, 2.16, 2.58, 3.08, 3.44])),
            (Statistic::AbsH3, abs([4.28, 7.79, 9.66, 11.14, 12.72, 13.70])),
            (Statistic::AbsH2Mode, abs([0.18, 0.32, 0.40, 0.46, 0.53, 0.57])),
        ]);
        Self {
            samples: BTreeMap::new(),
            grids,
            meta: TableMeta {
                b: 1_000_000,
                n: 100_000,
                f0: "builtin".into(),
                seed: 0,
            },
        }
    }

    /// Entries of `other` replace those of `self` statistic by statistic.
    pub fn overlay(&self, other: &CriticalValueTable) -> Self {
        let mut out = self.clone();
        for (s, v) in &other.samples {
            out.grids.remove(s);
            out.samples.insert(*s, v.clone());
        }
        for (s, g) in &other.grids {
            if !other.samples.contains_key(s) {
                out.samples.remove(s);
                out.grids.insert(*s, g.clone());
            }
        }
        out.meta = other.meta.clone();
        out
    }

    pub fn meta(&self) -> &TableMeta {
        &self.meta
    }

    pub fn contains(&self, stat: Statistic) -> bool {
        self.samples.contains_key(&stat) || self.grids.contains_key(&stat)
    }

    pub fn statistics(&self) -> Vec<Statistic> {
        let mut v: Vec<Statistic> = self.samples.keys().chain(self.grids.keys()).copied().collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn samples(&self, stat: Statistic) -> Option<&[f64]> {
        self.samples.get(&stat).map(Vec::as_slice)
    }

    pub fn grid(&self, stat: Statistic) -> Option<&[(f64, f64)]> {
        self.grids.get(&stat).map(Vec::as_slice)
    }

    /// `c_delta`: the value exceeded with probability `delta`.
    pub fn quantile(&self, stat: Statistic, delta: f64) -> Result<f64> {
        check_delta(delta)?;
        if let Some(s) = self.samples.get(&stat) {
            return Ok(upper_quantile(s, delta));
        }
        let g = self
            .grids
            .get(&stat)
            .ok_or_else(|| Error::MissingStatistic(stat.name().into()))?;
        let (lo, hi) = (g[0].0, g[g.len() - 1].0);
        if delta < lo - 1e-12 || delta > hi + 1e-12 {
            return Err(Error::DeltaOutsideGrid {
                statistic: stat.name().into(),
                delta,
                lo,
                hi,
            });
        }
        let j = g.partition_point(|p| p.0 < delta).clamp(1, g.len() - 1);
        let ((d0, c0), (d1, c1)) = (g[j - 1], g[j]);
        if (delta - d0).abs() <= 1e-12 {
            return Ok(c0);
        }
        if (delta - d1).abs() <= 1e-12 {
            return Ok(c1);
        }
        Ok(c0 + (c1 - c0) * (delta - d0) / (d1 - d0))
    }

    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        for (s, v) in &self.samples {
            obj.insert(s.name().into(), serde_json::to_value(v).expect("finite floats"));
        }
        obj.insert("meta".into(), serde_json::to_value(&self.meta).expect("plain struct"));
        if !self.grids.is_empty() {
            let g: Map<String, Value> = self
                .grids
                .iter()
                .map(|(s, pts)| {
                    let arr: Vec<[f64; 2]> = pts.iter().map(|&(d, c)| [d, c]).collect();
                    (s.name().to_string(), serde_json::to_value(arr).expect("finite floats"))
                })
                .collect();
            obj.insert("grid".into(), Value::Object(g));
        }
        Value::Object(obj)
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::InvalidInput("table must be a JSON object".into()))?;
        let meta: TableMeta = serde_json::from_value(
            obj.get("meta")
                .cloned()
                .ok_or_else(|| Error::InvalidInput("table lacks meta".into()))?,
        )?;
        let mut samples = BTreeMap::new();
        let mut grids = BTreeMap::new();
        for (k, val) in obj {
            match k.as_str() {
                "meta" => {}
                "grid" => {
                    let g: BTreeMap<String, Vec<[f64; 2]>> = serde_json::from_value(val.clone())?;
                    for (name, pts) in g {
                        let mut pts: Vec<(f64, f64)> = pts.into_iter().map(|p| (p[0], p[1])).collect();
                        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                        if pts.len() < 2 {
                            return Err(Error::InvalidInput(format!("grid for {name} needs two points")));
                        }
                        grids.insert(name.parse()?, pts);
                    }
                }
                name => {
                    let s: Vec<f64> = serde_json::from_value(val.clone())?;
                    samples.insert(name.parse::<Statistic>()?, s);
                }
            }
        }
        let mut t = Self::from_samples(samples, meta)?;
        t.grids = grids;
        Ok(t)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(&self.to_json())?)?;
        Ok(())
    }
}
