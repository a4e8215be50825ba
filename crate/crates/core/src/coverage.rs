//! Coverage and length experiments for the three models.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ci::{
    convex_density_intervals, estimate_sigma, logconcave_intervals, logconcave_mode_interval,
    regression_intervals, regression_mode_interval, ConfidenceInterval, NuisanceScale, Target,
};
use crate::convex_lse::{
    check_lse_characterization, default_characterization_tolerance, fit_convex_lse, SolverOptions,
};
use crate::density::{
    check_convex_density_characterization, check_logconcave_characterization,
    fit_convex_density_lse, fit_log_concave_mle, ConvexDensityCharacterization,
    ConvexDensityOptions, LogConcaveCharacterization, LogConcaveOptions, SampleData,
};
use crate::error::{Error, Result};
use crate::sim::{regression_sample, replication_rng, Design};
use crate::tables::{CriticalValueTable, Statistic};
use crate::truth::{DensityTruth, RegressionTruth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    ConvexRegression,
    LogConcave,
    ConvexDensity,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::ConvexRegression => "convex-regression",
            Model::LogConcave => "log-concave",
            Model::ConvexDensity => "convex-density",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Model::ConvexRegression, Model::LogConcave, Model::ConvexDensity]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truth {
    Regression(RegressionTruth),
    Density(DensityTruth),
}

impl Truth {
    pub fn parse_for(model: Model, spec: &str) -> Result<Self> {
        match model {
            Model::ConvexRegression => spec.parse().map(Truth::Regression),
            _ => spec.parse().map(Truth::Density),
        }
    }

    /// True value of a target; `x0` is ignored for the mode.
    pub fn target_value(&self, target: Target, x0: f64) -> f64 {
        match (self, target) {
            (Truth::Regression(f), Target::Value) => f.value(x0),
            (Truth::Regression(f), Target::Derivative) => f.derivative(x0),
            (Truth::Regression(f), Target::Mode) => f.anti_mode(),
            (Truth::Density(f), Target::Value) => f.pdf(x0),
            (Truth::Density(f), Target::Derivative) => f.derivative(x0),
            (Truth::Density(f), Target::Mode) => f.mode(),
        }
    }
}

impl fmt::Display for Truth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Truth::Regression(t) => t.fmt(f),
            Truth::Density(t) => t.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaHandling {
    Known,
    Estimated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: Model,
    pub f0: Truth,
    pub x0: f64,
    pub targets: Vec<Target>,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub levels: Vec<f64>,
    pub seed: u64,
    /// Noise level for regression.
    pub sigma: f64,
    pub sigma_handling: SigmaHandling,
    pub workers: usize,
    /// Path of a user table; `None` means the built-in one.
    pub table: Option<String>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n grid must be nonempty and strictly ascending".into()));
        }
        if self.reps == 0 {
            return Err(Error::Config("need at least one replication".into()));
        }
        if self.levels.is_empty() || self.levels.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
            return Err(Error::Config("levels must lie in (0, 1)".into()));
        }
        if self.targets.is_empty() {
            return Err(Error::Config("no targets".into()));
        }
        match (self.model, &self.f0) {
            (Model::ConvexRegression, Truth::Regression(_)) => {
                if !(self.x0 > 0.0 && self.x0 < 1.0) {
                    return Err(Error::Config("x0 must lie in (0, 1)".into()));
                }
                if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
                    return Err(Error::Config("sigma must be finite and >= 0".into()));
                }
            }
            (Model::LogConcave, Truth::Density(d)) if d.is_log_concave() => {}
            (Model::ConvexDensity, Truth::Density(d)) if d.is_convex_decreasing() => {
                if self.targets.contains(&Target::Mode) {
                    return Err(Error::Config("convex-density has no mode target".into()));
                }
            }
            _ => {
                return Err(Error::Config(format!(
                    "truth {} does not belong to model {}",
                    self.f0, self.model
                )))
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment and unknown keys are fatal.
    pub fn from_kv(text: &str) -> Result<Self> {
        fn list(v: &str) -> Vec<&str> {
            v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
        }
        let mut seen = BTreeSet::new();
        let mut kv = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", ln + 1)))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if !seen.insert(k.clone()) {
                return Err(Error::Config(format!("duplicate key {k:?}")));
            }
            kv.push((k, v));
        }
        let get = |key: &str| kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        const KEYS: [&str; 12] = [
            "model", "f0", "x0", "targets", "n", "reps", "level", "seed", "sigma",
            "sigma_handling", "workers", "table",
        ];
        if let Some((k, _)) = kv.iter().find(|(k, _)| !KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key {k:?}")));
        }
        let num = |key: &str, v: &str| -> Result<f64> {
            v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
        };
        let int = |key: &str, v: &str| -> Result<usize> {
            v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
        };

        let model: Model = get("model").ok_or_else(|| Error::Config("missing key model".into()))?.parse()?;
        let f0 = match get("f0") {
            Some(s) => Truth::parse_for(model, s)?,
            None => default_truth(model),
        };
        let x0 = match get("x0") {
            Some(v) => num("x0", v)?,
            None => 0.5,
        };
        let targets = match get("targets") {
            Some(v) => list(v).into_iter().map(str::parse).collect::<Result<Vec<Target>>>()?,
            None if model == Model::ConvexDensity => vec![Target::Value, Target::Derivative],
            None => Target::ALL.to_vec(),
        };
        let n_grid = match get("n") {
            Some(v) => list(v).into_iter().map(|s| int("n", s)).collect::<Result<Vec<_>>>()?,
            None => vec![100, 200, 500, 1000, 2000],
        };
        let levels = match get("level") {
            Some(v) => list(v).into_iter().map(|s| num("level", s)).collect::<Result<Vec<_>>>()?,
            None => vec![0.95],
        };
        let sigma_handling = match get("sigma_handling") {
            None | Some("known") => SigmaHandling::Known,
            Some("estimated") => SigmaHandling::Estimated,
            Some(v) => return Err(Error::Config(format!("sigma_handling: unknown value {v:?}"))),
        };
        let cfg = Self {
            model,
            f0,
            x0,
            targets,
            n_grid,
            reps: get("reps").map(|v| int("reps", v)).transpose()?.unwrap_or(1000),
            levels,
            seed: get("seed")
                .map(|v| v.parse().map_err(|_| Error::Config(format!("seed: cannot parse {v:?}"))))
                .transpose()?
                .unwrap_or(1),
            sigma: get("sigma").map(|v| num("sigma", v)).transpose()?.unwrap_or(1.0),
            sigma_handling,
            workers: get("workers").map(|v| int("workers", v)).transpose()?.unwrap_or(1),
            table: get("table").filter(|v| *v != "builtin").map(str::to_string),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn default_truth(model: Model) -> Truth {
    match model {
        Model::ConvexRegression => Truth::Regression(RegressionTruth::CircleArc { s: 20.0, m: 0.5 }),
        Model::LogConcave => Truth::Density(DensityTruth::Beta { a: 2.0, b: 3.0 }),
        Model::ConvexDensity => Truth::Density(DensityTruth::Exponential { rate: 1.0 }),
    }
}

/// Half-width constants `(a, b)` of the oracle interval: `b` is the local curvature over 24.
fn oracle_ab(model: Model, f0: &Truth, x0: f64, sigma: f64, target: Target) -> Option<(f64, f64)> {
    let (a, b) = match (model, f0, target) {
        (Model::ConvexRegression, Truth::Regression(f), Target::Mode) => {
            (sigma, f.second_derivative(f.anti_mode()) / 24.0)
        }
        (Model::ConvexRegression, Truth::Regression(f), _) => (sigma, f.second_derivative(x0) / 24.0),
        (Model::LogConcave, Truth::Density(f), Target::Mode) => {
            let m = f.mode();
            (f.pdf(m).sqrt(), f.second_derivative(m).abs() / 24.0)
        }
        (Model::LogConcave, Truth::Density(f), _) => {
            let p = f.pdf(x0);
            (p.sqrt(), p * f.log_derivatives(x0).1.abs() / 24.0)
        }
        (Model::ConvexDensity, Truth::Density(f), Target::Value | Target::Derivative) => {
            (f.pdf(x0).sqrt(), f.second_derivative(x0) / 24.0)
        }
        _ => return None,
    };
    (a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()).then_some((a, b))
}

/// Length of the oracle interval with scale `a`, curvature constant `b` and critical value `c`.
pub fn oracle_length(target: Target, a: f64, b: f64, n: usize, c: f64) -> f64 {
    let n = n as f64;
    let d = match target {
        Target::Value => (a.powi(4) * b).powf(0.2) * n.powf(-0.4),
        Target::Derivative => (a * a * b.powi(3)).powf(0.2) * n.powf(-0.2),
        Target::Mode => (a * a / (b * b)).powf(0.2) * n.powf(-0.2),
    };
    2.0 * d * c
}

#[allow(clippy::too_many_arguments)]
pub fn oracle_ci_length(
    model: Model,
    f0: &Truth,
    x0: f64,
    n: usize,
    sigma: f64,
    delta: f64,
    oracle: &CriticalValueTable,
    target: Target,
) -> Result<f64> {
    let (a, b) = oracle_ab(model, f0, x0, sigma, target)
        .ok_or_else(|| Error::Config(format!("missing curvature for the {} oracle", target.name())))?;
    let stat = match target {
        Target::Value => Statistic::AbsH2,
        Target::Derivative => Statistic::AbsH3,
        Target::Mode => Statistic::AbsH2Mode,
    };
    Ok(oracle_length(target, a, b, n, oracle.quantile(stat, delta)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub model: Model,
    pub target: Target,
    pub n: usize,
    #[serde(rename = "R")]
    pub reps: usize,
    pub level: f64,
    pub coverage: f64,
    pub se: f64,
    pub len_q25: f64,
    pub len_q50: f64,
    pub len_q75: f64,
    pub oracle_len: Option<f64>,
    pub failures: usize,
    /// Fits whose characterization check failed.
    pub uncertified: usize,
    /// Spot checks of nesting and symmetry that failed.
    pub invariant_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub rows: Vec<CoverageRow>,
}

impl CoverageReport {
    pub fn row(&self, target: Target, n: usize, level: f64) -> Option<&CoverageRow> {
        self.rows
            .iter()
            .find(|r| r.target == target && r.n == n && (r.level - level).abs() < 1e-12)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "model", "target", "n", "R", "level", "coverage", "se", "len_q25", "len_q50", "len_q75",
            "oracle_len", "failures",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.model.name().to_string(),
                r.target.name().to_string(),
                r.n.to_string(),
                r.reps.to_string(),
                r.level.to_string(),
                r.coverage.to_string(),
                r.se.to_string(),
                r.len_q25.to_string(),
                r.len_q50.to_string(),
                r.len_q75.to_string(),
                r.oracle_len.map_or_else(String::new, |v| v.to_string()),
                r.failures.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile_linear(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = p * (sorted.len() - 1) as f64;
    let (i, frac) = (h.floor() as usize, h - h.floor());
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + frac * (sorted[j] - sorted[i])
}

struct Outcome {
    /// Indexed by target, then level.
    intervals: Vec<Vec<ConfidenceInterval>>,
    certified: bool,
    violations: usize,
}

fn intervals_for(
    config: &ExperimentConfig,
    table: &CriticalValueTable,
    rng_stream: u64,
    n: usize,
) -> Result<(Vec<Vec<ConfidenceInterval>>, bool)> {
    let mut rng = replication_rng(config.seed, rng_stream);
    let mut out = vec![Vec::with_capacity(config.levels.len()); config.targets.len()];
    match (config.model, &config.f0) {
        (Model::ConvexRegression, Truth::Regression(f0)) => {
            let data = regression_sample(f0, Design::Fixed, n, config.sigma, &mut rng)?;
            let fit = fit_convex_lse(&data, &SolverOptions::default())?;
            let certified =
                check_lse_characterization(&fit, &data, default_characterization_tolerance(&data))?.passed;
            let sigma = match config.sigma_handling {
                SigmaHandling::Known => config.sigma,
                SigmaHandling::Estimated => estimate_sigma(&data)?,
            };
            let scale = NuisanceScale::new(sigma)?;
            for &level in &config.levels {
                let delta = 1.0 - level;
                let local = if config.targets.iter().any(|&t| t != Target::Mode) {
                    Some(regression_intervals(&fit, config.x0, n, scale, delta, table)?)
                } else {
                    None
                };
                for (ti, t) in config.targets.iter().enumerate() {
                    out[ti].push(match t {
                        Target::Value => local.expect("computed").value,
                        Target::Derivative => local.expect("computed").derivative,
                        Target::Mode => regression_mode_interval(&fit, delta, table)?,
                    });
                }
            }
            Ok((out, certified))
        }
        (Model::LogConcave, Truth::Density(f0)) => {
            let data = SampleData::new(f0.sample(&mut rng, n))?;
            let fit = fit_log_concave_mle(&data, &LogConcaveOptions::default())?;
            let certified = check_logconcave_characterization(
                &fit,
                &data,
                LogConcaveCharacterization::default_tolerance(&data),
            )
            .passed;
            for &level in &config.levels {
                let delta = 1.0 - level;
                let local = if config.targets.iter().any(|&t| t != Target::Mode) {
                    Some(logconcave_intervals(&fit, config.x0, delta, table)?)
                } else {
                    None
                };
                for (ti, t) in config.targets.iter().enumerate() {
                    out[ti].push(match t {
                        Target::Value => local.expect("computed").value,
                        Target::Derivative => local.expect("computed").derivative,
                        Target::Mode => logconcave_mode_interval(&fit, delta, table)?,
                    });
                }
            }
            Ok((out, certified))
        }
        (Model::ConvexDensity, Truth::Density(f0)) => {
            let data = SampleData::new(f0.sample(&mut rng, n))?;
            let fit = fit_convex_density_lse(&data, &ConvexDensityOptions::default())?;
            let certified = check_convex_density_characterization(
                &fit,
                &data,
                ConvexDensityCharacterization::default_tolerance(&data),
            )?
            .passed;
            for &level in &config.levels {
                let local = convex_density_intervals(&fit, n, config.x0, 1.0 - level, table)?;
                for (ti, t) in config.targets.iter().enumerate() {
                    out[ti].push(match t {
                        Target::Value => local.value,
                        Target::Derivative => local.derivative,
                        Target::Mode => unreachable!("rejected by validation"),
                    });
                }
            }
            Ok((out, certified))
        }
        _ => Err(Error::Config("model and truth disagree".into())),
    }
}

/// Symmetry about the estimate when unclamped, and nesting in the level.
fn spot_check(intervals: &[Vec<ConfidenceInterval>], levels: &[f64]) -> usize {
    let mut bad = 0;
    for per_level in intervals {
        for ci in per_level {
            let mid = 0.5 * (ci.lower + ci.upper);
            let tol = 1e-12 * (1.0 + ci.estimate.abs() + ci.length());
            if !ci.clamped && (mid - ci.estimate).abs() > tol {
                bad += 1;
            }
        }
        for a in 0..levels.len() {
            for b in 0..levels.len() {
                if levels[a] > levels[b] {
                    let (wide, narrow) = (&per_level[a], &per_level[b]);
                    if wide.lower > narrow.lower || wide.upper < narrow.upper {
                        bad += 1;
                    }
                }
            }
        }
    }
    bad
}

pub fn run_coverage(config: &ExperimentConfig, table: &CriticalValueTable) -> Result<CoverageReport> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut rows = Vec::new();
    for (gi, &n) in config.n_grid.iter().enumerate() {
        let outcomes: Vec<Result<Outcome>> = pool.install(|| {
            (0..config.reps)
                .into_par_iter()
                .map(|r| {
                    let (intervals, certified) =
                        intervals_for(config, table, ((gi as u64) << 32) | r as u64, n)?;
                    let violations = if r % 100 == 0 {
                        spot_check(&intervals, &config.levels)
                    } else {
                        0
                    };
                    Ok(Outcome {
                        intervals,
                        certified,
                        violations,
                    })
                })
                .collect()
        });
        let failures = outcomes.iter().filter(|o| o.is_err()).count();
        if let Some(Err(e)) = outcomes.iter().find(|o| o.is_err()) {
            log::debug!("n = {n}: first failure: {e}");
        }
        if failures as f64 > 0.01 * config.reps as f64 {
            return Err(Error::FailureRate {
                failures,
                attempted: config.reps,
            });
        }
        let done: Vec<&Outcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
        let uncertified = done.iter().filter(|o| !o.certified).count();
        let violations: usize = done.iter().map(|o| o.violations).sum();
        for (ti, &target) in config.targets.iter().enumerate() {
            let truth = config.f0.target_value(target, config.x0);
            for (li, &level) in config.levels.iter().enumerate() {
                let cis: Vec<&ConfidenceInterval> = done.iter().map(|o| &o.intervals[ti][li]).collect();
                let m = cis.len();
                let covered = cis.iter().filter(|c| c.covers(truth)).count();
                let p = if m > 0 { covered as f64 / m as f64 } else { f64::NAN };
                let mut lens: Vec<f64> = cis.iter().map(|c| c.length()).collect();
                lens.sort_by(f64::total_cmp);
                let oracle_len = oracle_ci_length(
                    config.model,
                    &config.f0,
                    config.x0,
                    n,
                    config.sigma,
                    1.0 - level,
                    table,
                    target,
                )
                .ok();
                rows.push(CoverageRow {
                    model: config.model,
                    target,
                    n,
                    reps: m,
                    level,
                    coverage: p,
                    se: (p * (1.0 - p) / m as f64).sqrt(),
                    len_q25: quantile_linear(&lens, 0.25),
                    len_q50: quantile_linear(&lens, 0.5),
                    len_q75: quantile_linear(&lens, 0.75),
                    oracle_len,
                    failures,
                    uncertified,
                    invariant_violations: violations,
                });
            }
        }
    }
    Ok(CoverageReport { rows })
}

/// Least-squares slope of `log y` on `log n`.
pub fn log_log_slope(ns: &[usize], ys: &[f64]) -> Result<f64> {
    let distinct: BTreeSet<usize> = ns.iter().copied().collect();
    if ns.len() != ys.len() || distinct.len() < 3 || ys.iter().any(|&y| !(y > 0.0)) {
        return Err(Error::Config(
            "degenerate n grid: need three distinct n with positive lengths".into(),
        ));
    }
    let lx: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Slope of the median interval length against `n` for one target and level.
pub fn length_rate_check(report: &CoverageReport, target: Target, level: f64) -> Result<f64> {
    let rows: Vec<&CoverageRow> = report
        .rows
        .iter()
        .filter(|r| r.target == target && (r.level - level).abs() < 1e-12)
        .collect();
    let ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.len_q50).collect();
    log_log_slope(&ns, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slopes() {
        let ns = [100, 400, 1600, 6400];
        let ys: Vec<f64> = ns.iter().map(|&n| 3.0 * (n as f64).powf(-0.4)).collect();
        assert!((log_log_slope(&ns, &ys).unwrap() + 0.4).abs() < 1e-12);
        assert!(log_log_slope(&ns, &[2.0; 4]).unwrap().abs() < 1e-12);
        assert!(log_log_slope(&[10, 20], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn oracle_lengths() {
        let t = CriticalValueTable::builtin();
        let f0 = Truth::Regression(RegressionTruth::Quadratic { c: 12.0, m: 0.5 });
        let n = 100_000;
        let len = oracle_ci_length(Model::ConvexRegression, &f0, 0.5, n, 1.0, 0.05, &t, Target::Value)
            .unwrap();
        let d0 = (24.0f64 / 24.0).powf(0.2);
        assert!((len - 2.0 * d0 * (n as f64).powf(-0.4) * 2.58).abs() < 1e-15);
        let l4 = oracle_ci_length(Model::ConvexRegression, &f0, 0.5, 4 * n, 1.0, 0.05, &t, Target::Value)
            .unwrap();
        assert!((l4 / len - 4f64.powf(-0.4)).abs() < 1e-12);
        let lm = oracle_ci_length(Model::ConvexRegression, &f0, 0.5, n, 1.0, 0.05, &t, Target::Mode).unwrap();
        let dm = (24.0f64 / 24.0).powf(0.4);
        assert!((lm - 2.0 * dm * (n as f64).powf(-0.2) * 0.46).abs() < 1e-15);
    }

    #[test]
    fn log_concave_oracle_constants() {
        let t = CriticalValueTable::builtin();
        let f = DensityTruth::Beta { a: 2.0, b: 3.0 };
        let (x0, n) = (0.5, 1000);
        let (f0, phi2) = (f.pdf(x0), f.log_derivatives(x0).1.abs());
        let want = 2.0 * (f0.powi(3) * phi2 / 24.0).powf(0.2) * (n as f64).powf(-0.4) * 2.58;
        let got = oracle_ci_length(Model::LogConcave, &Truth::Density(f), x0, n, 1.0, 0.05, &t, Target::Value)
            .unwrap();
        assert!((got - want).abs() < 1e-14);
        let want = 2.0 * (f0.powi(4) * phi2.powi(3) / 24f64.powi(3)).powf(0.2) * (n as f64).powf(-0.2) * 11.14;
        let got = oracle_ci_length(
            Model::LogConcave,
            &Truth::Density(f),
            x0,
            n,
            1.0,
            0.05,
            &t,
            Target::Derivative,
        )
        .unwrap();
        assert!((got - want).abs() < 1e-13);
        let m = f.mode();
        let want = 2.0
            * (576.0 * f.pdf(m) / f.second_derivative(m).powi(2)).powf(0.2)
            * (n as f64).powf(-0.2)
            * 0.46;
        let got = oracle_ci_length(Model::LogConcave, &Truth::Density(f), x0, n, 1.0, 0.05, &t, Target::Mode)
            .unwrap();
        assert!((got - want).abs() < 1e-13);
    }

    #[test]
    fn kv_parsing() {
        let cfg = ExperimentConfig::from_kv(
            "model = log-concave\nf0 = beta(2,3)\ntargets = mode\nn = 100\nreps = 5\nlevel = 0.8, 0.95 # two\n",
        )
        .unwrap();
        assert_eq!(cfg.levels, vec![0.8, 0.95]);
        assert_eq!(cfg.targets, vec![Target::Mode]);
        assert!(ExperimentConfig::from_kv("model = log-concave\nbogus = 1\n").is_err());
        assert!(ExperimentConfig::from_kv("model = log-concave\nlevel = 1.5\n").is_err());
        assert!(ExperimentConfig::from_kv("model = convex-density\ntargets = mode\n").is_err());
        assert!(ExperimentConfig::from_kv("model = log-concave\nn = 200, 100\n").is_err());
    }

    #[test]
    fn small_runs_are_deterministic() {
        let mut cfg = ExperimentConfig::from_kv("model = convex-regression\nn = 100\nreps = 20\nlevel = 0.5, 0.95\n").unwrap();
        let t = CriticalValueTable::builtin();
        let a = run_coverage(&cfg, &t).unwrap();
        cfg.workers = 3;
        assert_eq!(a, run_coverage(&cfg, &t).unwrap());
        for r in &a.rows {
            assert_eq!(r.invariant_violations, 0);
            assert_eq!(r.uncertified, 0);
        }
        let cfg = ExperimentConfig::from_kv("model = convex-density\nf0 = exponential(1)\nx0 = 0.5\nn = 200\nreps = 10\n").unwrap();
        let r = run_coverage(&cfg, &t).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(r.rows.iter().all(|r| r.uncertified == 0 && r.oracle_len.is_some()));
    }
}
