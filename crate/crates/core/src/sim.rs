//! Monte Carlo approximation of the pivotal and oracle limit laws.
//!
//! Each replication draws `Y_i = f0(X_i) + sigma * xi_i`, fits the convex LSE and records
//! the locally normalised errors at `x0` and at the anti-mode. Replication `r` draws from
//! the ChaCha8 stream `r` under the master seed, so results do not depend on the number of
//! worker threads.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex_lse::{
    check_lse_characterization, default_characterization_tolerance, fit_convex_lse,
    RegressionData, SolverOptions,
};
use crate::error::{Error, Result};
use crate::tables::{CriticalValueTable, Statistic, TableMeta};
use crate::truth::{standard_normal, RegressionTruth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    /// `X_i = i / n` for `i = 0..=n`.
    Fixed,
    /// `n` sorted uniform draws on `[0, 1]`.
    Uniform,
}

impl std::str::FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Design::Fixed),
            "uniform" | "random" => Ok(Design::Uniform),
            _ => Err(Error::Config(format!("unknown design {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub f0: RegressionTruth,
    pub x0: f64,
    pub n: usize,
    pub b: usize,
    pub seed: u64,
    pub sigma: f64,
    pub design: Design,
    pub workers: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            f0: RegressionTruth::Quadratic { c: 12.0, m: 0.5 },
            x0: 0.5,
            n: 10_000,
            b: 10_000,
            seed: 1,
            sigma: 1.0,
            design: Design::Fixed,
            workers: 1,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::Config(format!("n must be at least 10, got {}", self.n)));
        }
        if self.b == 0 {
            return Err(Error::Config("need at least one replication".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be finite and >= 0, got {}", self.sigma)));
        }
        if !(self.x0 > 0.0 && self.x0 < 1.0) {
            return Err(Error::Config(format!("x0 must lie in (0, 1), got {}", self.x0)));
        }
        if self.design == Design::Fixed {
            let k = self.x0 * self.n as f64;
            if (k - k.round()).abs() > 1e-9 {
                log::warn!("x0 = {} is not a design point of the fixed grid", self.x0);
            }
        }
        Ok(())
    }
}

/// Seeded generator for one replication.
pub fn replication_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn design_points<R: Rng + ?Sized>(design: Design, n: usize, rng: &mut R) -> Vec<f64> {
    match design {
        Design::Fixed => (0..=n).map(|i| i as f64 / n as f64).collect(),
        Design::Uniform => {
            let mut x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            x.sort_by(f64::total_cmp);
            x
        }
    }
}

/// Regression data from a truth plus Gaussian noise.
pub fn regression_sample<R: Rng + ?Sized>(
    f0: &RegressionTruth,
    design: Design,
    n: usize,
    sigma: f64,
    rng: &mut R,
) -> Result<RegressionData> {
    let x = design_points(design, n, rng);
    let y = x.iter().map(|&t| f0.value(t) + sigma * standard_normal(rng)).collect();
    RegressionData::new(x, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LneSample {
    pub t0: f64,
    pub t1: f64,
    pub tm: f64,
    /// `f(x0) - f0(x0)`
    pub e0: f64,
    /// `f'(x0) - f0'(x0)`
    pub e1: f64,
    /// `m - m0`
    pub em: f64,
    /// Whether the fit passed its characterization check.
    pub certified: bool,
}

pub fn simulate_lne_sample(config: &SimulationConfig, index: usize) -> Result<LneSample> {
    let attach = |e: Error| Error::Replication {
        index,
        source: Box::new(e),
    };
    let mut rng = replication_rng(config.seed, index as u64);
    let data =
        regression_sample(&config.f0, config.design, config.n, config.sigma, &mut rng).map_err(attach)?;
    let fit = fit_convex_lse(&data, &SolverOptions::default()).map_err(attach)?;
    let certified = check_lse_characterization(&fit, &data, default_characterization_tolerance(&data))
        .map_err(attach)?
        .passed;
    let tol = fit.kink_tolerance();
    let piece = fit.linear_piece_containing(config.x0, tol).map_err(attach)?;
    let bracket = fit.mode_bracket(tol);
    if !(bracket.width() > 0.0) {
        return Err(attach(Error::ZeroWidthPiece(bracket.m_hat)));
    }
    let (n, w) = (config.n as f64, piece.width());
    let e0 = fit.evaluate(config.x0).map_err(attach)? - config.f0.value(config.x0);
    let e1 = piece.slope - config.f0.derivative(config.x0);
    let em = bracket.m_hat - config.f0.anti_mode();
    Ok(LneSample {
        t0: (n * w).sqrt() * e0,
        t1: (n * w.powi(3)).sqrt() * e1,
        tm: em / bracket.width(),
        e0,
        e1,
        em,
        certified,
    })
}

/// All replications in index order.
pub fn simulate_samples(config: &SimulationConfig) -> Result<Vec<LneSample>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| {
        (0..config.b)
            .into_par_iter()
            .map(|i| simulate_lne_sample(config, i))
            .collect()
    })
}

fn meta(config: &SimulationConfig) -> TableMeta {
    TableMeta {
        b: config.b,
        n: config.n,
        f0: config.f0.to_string(),
        seed: config.seed,
    }
}

/// L0, L1, M and their absolute values.
pub fn pivotal_table(config: &SimulationConfig, samples: &[LneSample]) -> Result<CriticalValueTable> {
    let pick = |f: fn(&LneSample) -> f64| samples.iter().map(f).collect::<Vec<_>>();
    let map = BTreeMap::from([
        (Statistic::L0, pick(|s| s.t0)),
        (Statistic::L1, pick(|s| s.t1)),
        (Statistic::M, pick(|s| s.tm)),
        (Statistic::AbsL0, pick(|s| s.t0.abs())),
        (Statistic::AbsL1, pick(|s| s.t1.abs())),
        (Statistic::AbsM, pick(|s| s.tm.abs())),
    ]);
    CriticalValueTable::from_samples(map, meta(config))
}

/// Multipliers turning raw errors into draws of the oracle laws.
pub fn oracle_scalings(config: &SimulationConfig) -> Result<(f64, f64, f64)> {
    let c_x = config.f0.second_derivative(config.x0);
    let c_m = config.f0.second_derivative(config.f0.anti_mode());
    if !(c_x > 0.0 && c_m > 0.0) {
        return Err(Error::Config("oracle rescaling needs f0'' > 0".into()));
    }
    if !(config.sigma > 0.0) {
        return Err(Error::Config("oracle rescaling needs sigma > 0".into()));
    }
    let r = config.n as f64 / (config.sigma * config.sigma);
    let b = c_x / 24.0;
    Ok((
        r.powf(0.4) / b.powf(0.2),
        r.powf(0.2) / b.powf(0.6),
        r.powf(0.2) / (24.0 / c_m).powf(0.4),
    ))
}

/// |H2(0)|, |H3(0)| and the anti-mode law.
pub fn oracle_table(config: &SimulationConfig, samples: &[LneSample]) -> Result<CriticalValueTable> {
    let (s0, s1, sm) = oracle_scalings(config)?;
    let map = BTreeMap::from([
        (Statistic::AbsH2, samples.iter().map(|s| (s0 * s.e0).abs()).collect()),
        (Statistic::AbsH3, samples.iter().map(|s| (s1 * s.e1).abs()).collect()),
        (Statistic::AbsH2Mode, samples.iter().map(|s| (sm * s.em).abs()).collect()),
    ]);
    CriticalValueTable::from_samples(map, meta(config))
}

pub fn simulate_pivotal_table(config: &SimulationConfig) -> Result<CriticalValueTable> {
    pivotal_table(config, &simulate_samples(config)?)
}

pub fn simulate_oracle_table(config: &SimulationConfig) -> Result<CriticalValueTable> {
    oracle_scalings(config)?;
    oracle_table(config, &simulate_samples(config)?)
}

/// Two-sample Kolmogorov-Smirnov distance between stored samples.
pub fn ks_distance(a: &CriticalValueTable, b: &CriticalValueTable, stat: Statistic) -> Result<f64> {
    let get = |t: &CriticalValueTable| {
        t.samples(stat)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| Error::MissingStatistic(stat.name().into()))
    };
    let (x, y) = (get(a)?, get(b)?);
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / nx - j as f64 / ny).abs());
    }
    Ok(d)
}

/// Rows `statistic,value,ecdf` for every stored sample.
pub fn write_ecdf_csv<W: Write>(table: &CriticalValueTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["statistic", "value", "ecdf"])?;
    for stat in table.statistics() {
        if let Some(s) = table.samples(stat) {
            let b = s.len() as f64;
            for (k, v) in s.iter().enumerate() {
                w.write_record([stat.name().to_string(), v.to_string(), ((k + 1) as f64 / b).to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_ecdf_file(table: &CriticalValueTable, path: &Path) -> Result<()> {
    write_ecdf_csv(table, std::fs::File::create(path)?)
}
