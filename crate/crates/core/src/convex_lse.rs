//! Convex least-squares regression by support reduction.
//!
//! The fit is parameterised as `a + b x + sum_j theta_j (x - x_j)_+` with `theta_j >= 0`
//! and knots restricted to interior design points. Each outer step adds the most
//! violating design point in every gap between current knots, solves the unrestricted
//! least-squares problem on the enlarged knot set through a tridiagonal hat-basis system,
//! and walks back towards the previous iterate whenever a slope change turns negative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pwl::{max_abs, PiecewiseLinearFunction, Shape};

/// Design/response pairs with strictly increasing design.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl RegressionData {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidInput(format!(
                "{} design points but {} responses",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::TooFewPoints {
                required: 2,
                got: x.len(),
            });
        }
        for (i, (a, b)) in x.iter().zip(&y).enumerate() {
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::NonFinite(i));
            }
        }
        for i in 1..x.len() {
            if x[i] == x[i - 1] {
                return Err(Error::DuplicateDesign {
                    index: i,
                    value: x[i],
                });
            }
            if x[i] < x[i - 1] {
                return Err(Error::NotIncreasing(i));
            }
        }
        Ok(Self { x, y })
    }

    /// Sorts pairs by design point before validating.
    pub fn from_unsorted(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut pairs: Vec<(f64, f64)> = pairs.into_iter().collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (x, y) = pairs.into_iter().unzip();
        Self::new(x, y)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// `max|y| * (x_max - x_min)`, the natural unit of the characterization processes.
    pub fn scale(&self) -> f64 {
        max_abs(&self.y) * (self.x[self.x.len() - 1] - self.x[0])
    }

    pub fn rss(&self, fitted: &[f64]) -> f64 {
        self.y
            .iter()
            .zip(fitted)
            .map(|(y, f)| (y - f) * (y - f))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Relative stopping tolerance on the directional derivatives.
    pub tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 2_000,
            tol: 1e-10,
        }
    }
}

/// Convex least-squares fit; the returned function has a knot at every design point.
pub fn fit_convex_lse(data: &RegressionData, opts: &SolverOptions) -> Result<PiecewiseLinearFunction> {
    let fitted = fit_values(data, opts)?;
    PiecewiseLinearFunction::new(data.x.clone(), fitted, Shape::Convex)
}

/// Fitted values at the design points.
pub fn fit_values(data: &RegressionData, opts: &SolverOptions) -> Result<Vec<f64>> {
    let (x, y) = (&data.x[..], &data.y[..]);
    let n = x.len();
    let tol = opts.tol * data.scale() * n as f64;

    let mut support = vec![0, n - 1];
    let mut vals = solve_restricted(x, y, &support);
    let mut fitted = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut single = false;
    let mut last_rss = f64::INFINITY;
    let mut worst = 0.0;

    for _ in 0..opts.max_iter {
        interpolate(x, &support, &vals, &mut fitted);
        directional_derivatives(x, y, &fitted, &mut d);

        let rss = data.rss(&fitted);
        if rss >= last_rss {
            single = true;
        }
        last_rss = rss;

        let candidates = pick_candidates(&support, &d, tol, single);
        worst = d.iter().fold(0.0_f64, |m, &v| m.min(v));
        if candidates.is_empty() {
            return Ok(fitted);
        }

        let mut next = merge(&support, &candidates);
        let mut current: Vec<f64> = next.iter().map(|&k| fitted[k]).collect();
        loop {
            let target = solve_restricted(x, y, &next);
            let th_new = slope_changes(x, &next, &target);
            if th_new.iter().all(|&t| t >= 0.0) {
                support = next;
                vals = target;
                break;
            }
            let th_cur = slope_changes(x, &next, &current);
            let step = th_new
                .iter()
                .zip(&th_cur)
                .filter(|(tn, _)| **tn < 0.0)
                .map(|(tn, tc)| tc / (tc - tn))
                .fold(1.0_f64, f64::min)
                .max(0.0);
            for (c, t) in current.iter_mut().zip(&target) {
                *c += step * (t - *c);
            }
            let cut = step * (1.0 + 1e-12) + 1e-300;
            let keep: Vec<bool> = std::iter::once(true)
                .chain(
                    th_new
                        .iter()
                        .zip(&th_cur)
                        .map(|(tn, tc)| !(*tn < 0.0 && tc / (tc - tn) <= cut)),
                )
                .chain(std::iter::once(true))
                .collect();
            next = next
                .iter()
                .zip(&keep)
                .filter(|(_, k)| **k)
                .map(|(i, _)| *i)
                .collect();
            current = current
                .iter()
                .zip(&keep)
                .filter(|(_, k)| **k)
                .map(|(v, _)| *v)
                .collect();
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual: -worst / n as f64,
    })
}

/// One most-violating candidate per gap between consecutive knots, or only the global
/// minimiser when `single` is set.
fn pick_candidates(support: &[usize], d: &[f64], tol: f64, single: bool) -> Vec<usize> {
    let mut out = Vec::new();
    let mut global: Option<(usize, f64)> = None;
    for w in support.windows(2) {
        let mut best: Option<(usize, f64)> = None;
        for (m, &dm) in d.iter().enumerate().take(w[1]).skip(w[0] + 1) {
            if dm < -tol && best.is_none_or(|(_, b)| dm < b) {
                best = Some((m, dm));
            }
        }
        if let Some((m, dm)) = best {
            out.push(m);
            if global.is_none_or(|(_, g)| dm < g) {
                global = Some((m, dm));
            }
        }
    }
    if single {
        return global.map(|(m, _)| vec![m]).unwrap_or_default();
    }
    out
}

fn merge(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out.sort_unstable();
    out.dedup();
    out
}

/// Least squares over continuous piecewise-linear functions with the given knot indices.
/// Returns the values at the knots.
fn solve_restricted(x: &[f64], y: &[f64], knots: &[usize]) -> Vec<f64> {
    let m = knots.len();
    let mut diag = vec![0.0; m];
    let mut off = vec![0.0; m - 1];
    let mut rhs = vec![0.0; m];
    for j in 0..m - 1 {
        let (a, b) = (knots[j], knots[j + 1]);
        let h = x[b] - x[a];
        let end = if j + 2 == m { b + 1 } else { b };
        for i in a..end {
            let w = (x[i] - x[a]) / h;
            let v = 1.0 - w;
            diag[j] += v * v;
            diag[j + 1] += w * w;
            off[j] += v * w;
            rhs[j] += v * y[i];
            rhs[j + 1] += w * y[i];
        }
    }
    thomas(&mut diag, &off, &mut rhs);
    rhs
}

/// Solves a symmetric tridiagonal system in place; the solution is left in `rhs`.
pub(crate) fn thomas(diag: &mut [f64], off: &[f64], rhs: &mut [f64]) {
    let m = diag.len();
    for i in 1..m {
        let f = off[i - 1] / diag[i - 1];
        diag[i] -= f * off[i - 1];
        rhs[i] -= f * rhs[i - 1];
    }
    rhs[m - 1] /= diag[m - 1];
    for i in (0..m - 1).rev() {
        rhs[i] = (rhs[i] - off[i] * rhs[i + 1]) / diag[i];
    }
}

fn interpolate(x: &[f64], knots: &[usize], vals: &[f64], out: &mut [f64]) {
    for j in 0..knots.len() - 1 {
        let (a, b) = (knots[j], knots[j + 1]);
        let s = (vals[j + 1] - vals[j]) / (x[b] - x[a]);
        for i in a..b {
            out[i] = vals[j] + s * (x[i] - x[a]);
        }
    }
    out[knots[knots.len() - 1]] = vals[vals.len() - 1];
}

/// Slope changes at the interior knots.
fn slope_changes(x: &[f64], knots: &[usize], vals: &[f64]) -> Vec<f64> {
    let slopes: Vec<f64> = (0..knots.len() - 1)
        .map(|j| (vals[j + 1] - vals[j]) / (x[knots[j + 1]] - x[knots[j]]))
        .collect();
    slopes.windows(2).map(|w| w[1] - w[0]).collect()
}

/// `d[m] = sum_{i > m} (x_i - x_m)(f_i - y_i)`.
fn directional_derivatives(x: &[f64], y: &[f64], f: &[f64], d: &mut [f64]) {
    let n = x.len();
    d[n - 1] = 0.0;
    let mut tail = 0.0;
    for m in (0..n - 1).rev() {
        tail += f[m + 1] - y[m + 1];
        d[m] = d[m + 1] + (x[m + 1] - x[m]) * tail;
    }
}

/// Outcome of [`check_lse_characterization`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LseCharacterization {
    /// `min_j (H_n - Y_n)(x_j)`; must not fall below `-tolerance`.
    pub min_gap: f64,
    /// `max |H_n - Y_n|` over kinks; must not exceed `tolerance`.
    pub max_kink_gap: f64,
    /// `|sum (f_i - y_i)| / n`.
    pub mass_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Default tolerance for [`check_lse_characterization`].
pub fn default_characterization_tolerance(data: &RegressionData) -> f64 {
    1e-8 * data.scale().max(f64::MIN_POSITIVE)
}

/// Checks that the integrated fit majorises the integrated data with equality at kinks.
///
/// Works from the left, independently of the solver's right-sided derivatives:
/// `G_j = (1/n) sum_{i<j} (f_i - y_i)(x_j - x_i)`.
pub fn check_lse_characterization(
    f: &PiecewiseLinearFunction,
    data: &RegressionData,
    tol: f64,
) -> Result<LseCharacterization> {
    if f.knots() != data.x() {
        return Err(Error::MismatchedGrid);
    }
    let n = data.n();
    let inv_n = 1.0 / n as f64;
    let (x, y, fv) = (data.x(), data.y(), f.values());
    let mut g = vec![0.0; n];
    let mut cum = 0.0;
    for j in 0..n - 1 {
        cum += (fv[j] - y[j]) * inv_n;
        g[j + 1] = g[j] + (x[j + 1] - x[j]) * cum;
    }
    cum += (fv[n - 1] - y[n - 1]) * inv_n;
    let min_gap = g.iter().copied().fold(f64::INFINITY, f64::min);
    let max_kink_gap = f
        .kink_indices(f.kink_tolerance())
        .into_iter()
        .map(|i| g[i].abs())
        .fold(0.0, f64::max);
    let mass_residual = cum.abs();
    Ok(LseCharacterization {
        min_gap,
        max_kink_gap,
        mass_residual,
        tolerance: tol,
        passed: min_gap >= -tol && max_kink_gap <= tol && mass_residual <= tol,
    })
}
