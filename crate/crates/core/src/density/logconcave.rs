use serde::{Deserialize, Serialize};

use super::expint::ExpIntegral;
use super::SampleData;
use crate::convex_lse::thomas;
use crate::error::{Error, Result};
use crate::pwl::{ModeBracket, PiecewiseLinearFunction, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogConcaveOptions {
    /// Outer knot-insertion iterations.
    pub max_iter: usize,
    /// Newton iterations per restricted problem.
    pub max_newton: usize,
    /// Stopping tolerance on the directional derivatives, relative to the sample range.
    pub tol: f64,
}

impl Default for LogConcaveOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            max_newton: 200,
            tol: 1e-10,
        }
    }
}

/// Log-concave density `exp(phi)` on the knot range of `phi`, zero outside.
#[derive(Debug, Clone, PartialEq)]
pub struct LogConcaveFit {
    phi: PiecewiseLinearFunction,
    n: usize,
    iterations: usize,
    objective_trace: Vec<f64>,
}

impl LogConcaveFit {
    /// Wraps an externally supplied concave log-density.
    pub fn new(phi: PiecewiseLinearFunction, n: usize) -> Result<Self> {
        if phi.shape() != Shape::Concave {
            return Err(Error::InvalidInput("log-density must be concave".into()));
        }
        Ok(Self {
            phi,
            n,
            iterations: 0,
            objective_trace: Vec::new(),
        })
    }

    pub fn phi(&self) -> &PiecewiseLinearFunction {
        &self.phi
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Criterion value after the initial fit and after every knot insertion round.
    pub fn objective_trace(&self) -> &[f64] {
        &self.objective_trace
    }

    pub fn support(&self) -> (f64, f64) {
        self.phi.domain()
    }

    pub fn density(&self, t: f64) -> f64 {
        self.phi.evaluate(t).map_or(0.0, f64::exp)
    }

    pub fn log_density(&self, t: f64) -> Result<f64> {
        self.phi.evaluate(t)
    }

    /// `int exp(phi)` in closed form.
    pub fn integral(&self) -> f64 {
        let (k, v) = (self.phi.knots(), self.phi.values());
        (0..k.len() - 1)
            .map(|j| (k[j + 1] - k[j]) * ExpIntegral::new(v[j], v[j + 1]).j)
            .sum()
    }

    pub fn mode(&self) -> f64 {
        self.phi.anti_mode()
    }

    pub fn mode_bracket(&self) -> ModeBracket {
        self.phi.mode_bracket(self.phi.kink_tolerance())
    }
}

/// `sum w_i phi(z_i) - int exp(phi)` for the knot-restricted parameterisation.
fn objective(z: &[f64], knots: &[usize], psi: &[f64], c: &[f64]) -> f64 {
    let lin: f64 = c.iter().zip(psi).map(|(a, b)| a * b).sum();
    let int: f64 = (0..knots.len() - 1)
        .map(|j| (z[knots[j + 1]] - z[knots[j]]) * ExpIntegral::new(psi[j], psi[j + 1]).j)
        .sum();
    lin - int
}

/// Weights pushed onto the hat basis of the knot set.
fn hat_weights(z: &[f64], w: &[f64], knots: &[usize]) -> Vec<f64> {
    let m = knots.len();
    let mut c = vec![0.0; m];
    for j in 0..m - 1 {
        let (a, b) = (knots[j], knots[j + 1]);
        let h = z[b] - z[a];
        let end = if j + 2 == m { b + 1 } else { b };
        for i in a..end {
            let t = (z[i] - z[a]) / h;
            c[j] += w[i] * (1.0 - t);
            c[j + 1] += w[i] * t;
        }
    }
    c
}

/// Maximises the restricted criterion in place by damped Newton steps.
fn newton(z: &[f64], knots: &[usize], c: &[f64], psi: &mut [f64], max_iter: usize) -> Result<()> {
    let m = knots.len();
    let mut obj = objective(z, knots, psi, c);
    let mut trial = vec![0.0; m];
    for _ in 0..max_iter {
        let mut g = c.to_vec();
        let mut diag = vec![0.0; m];
        let mut off = vec![0.0; m - 1];
        for j in 0..m - 1 {
            let h = z[knots[j + 1]] - z[knots[j]];
            let e = ExpIntegral::new(psi[j], psi[j + 1]);
            g[j] -= h * e.ja;
            g[j + 1] -= h * e.jb;
            diag[j] += h * e.jaa;
            diag[j + 1] += h * e.jbb;
            off[j] = h * e.jab;
        }
        let mut p = g.clone();
        thomas(&mut diag, &off, &mut p);
        let dec: f64 = g.iter().zip(&p).map(|(a, b)| a * b).sum();
        if !dec.is_finite() {
            break;
        }
        if dec < 1e-26 {
            return Ok(());
        }
        let mut t = 1.0;
        loop {
            for k in 0..m {
                trial[k] = psi[k] + t * p[k];
            }
            let o = objective(z, knots, &trial, c);
            if o >= obj + 1e-4 * t * dec || (dec < 1e-14 && o >= obj - 1e-15 * obj.abs()) {
                psi.copy_from_slice(&trial);
                obj = o.max(obj);
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Ok(());
            }
        }
    }
    let g = objective(z, knots, psi, c);
    if g.is_finite() {
        Ok(())
    } else {
        Err(Error::NonConvergence {
            iterations: max_iter,
            residual: f64::NAN,
        })
    }
}

fn slope_changes(z: &[f64], knots: &[usize], psi: &[f64]) -> Vec<f64> {
    let s: Vec<f64> = (0..knots.len() - 1)
        .map(|j| (psi[j + 1] - psi[j]) / (z[knots[j + 1]] - z[knots[j]]))
        .collect();
    s.windows(2).map(|w| w[1] - w[0]).collect()
}

fn interpolate(z: &[f64], knots: &[usize], psi: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; z.len()];
    for j in 0..knots.len() - 1 {
        let (a, b) = (knots[j], knots[j + 1]);
        let s = (psi[j + 1] - psi[j]) / (z[b] - z[a]);
        for i in a..b {
            out[i] = psi[j] + s * (z[i] - z[a]);
        }
    }
    out[z.len() - 1] = psi[psi.len() - 1];
    out
}

/// `d_j = sum_i w_i (z_i - z_j)_+ - int (x - z_j)_+ exp(phi(x)) dx` at every distinct point.
/// Negative values mark points where a new kink raises the criterion.
fn directional(z: &[f64], w: &[f64], phi: &[f64]) -> Vec<f64> {
    let m = z.len();
    let mut d = vec![0.0; m];
    let (mut p, mut q, mut mass, mut wt) = (0.0, 0.0, 0.0, 0.0);
    for j in (0..m - 1).rev() {
        let h = z[j + 1] - z[j];
        let e = ExpIntegral::new(phi[j], phi[j + 1]);
        wt += w[j + 1];
        p += h * wt;
        q += h * h * e.jb + h * mass;
        mass += h * e.j;
        d[j] = p - q;
    }
    d
}

/// Log-concave maximum likelihood estimate by knot insertion with Newton steps on the
/// knot values; the knots of the returned `phi` are the active observations, always
/// including the sample minimum and maximum.
pub fn fit_log_concave_mle(data: &SampleData, opts: &LogConcaveOptions) -> Result<LogConcaveFit> {
    let (z, w) = data.weighted();
    let m = z.len();
    if m < 2 {
        return Err(Error::DegenerateData("all observations are equal".into()));
    }
    let range = z[m - 1] - z[0];
    let tol = opts.tol * range;

    let mut knots = vec![0, m - 1];
    let mut psi = vec![-range.ln(); 2];
    newton(&z, &knots, &hat_weights(&z, &w, &knots), &mut psi, opts.max_newton)?;
    let mut trace = vec![objective(&z, &knots, &psi, &hat_weights(&z, &w, &knots))];
    let mut single = false;
    let mut worst = 0.0;

    for iter in 0..opts.max_iter {
        let phi = interpolate(&z, &knots, &psi);
        let d = directional(&z, &w, &phi);
        worst = d.iter().fold(0.0_f64, |a, &b| a.min(b));

        let mut picks = Vec::new();
        let mut global: Option<(usize, f64)> = None;
        for g in knots.windows(2) {
            let best = (g[0] + 1..g[1])
                .filter(|&j| d[j] < -tol)
                .min_by(|&a, &b| d[a].total_cmp(&d[b]));
            if let Some(j) = best {
                picks.push(j);
                if global.is_none_or(|(_, v)| d[j] < v) {
                    global = Some((j, d[j]));
                }
            }
        }
        if single {
            picks = global.map(|(j, _)| vec![j]).unwrap_or_default();
        }
        if picks.is_empty() {
            return Ok(finish(z, knots, psi, data.n(), iter, trace));
        }

        let mut next: Vec<usize> = knots.iter().chain(&picks).copied().collect();
        next.sort_unstable();
        let mut current: Vec<f64> = next.iter().map(|&k| phi[k]).collect();
        loop {
            let c = hat_weights(&z, &w, &next);
            let mut target = current.clone();
            newton(&z, &next, &c, &mut target, opts.max_newton)?;
            let th_new = slope_changes(&z, &next, &target);
            if th_new.iter().all(|&t| t <= 0.0) {
                knots = next;
                psi = target;
                break;
            }
            let th_cur = slope_changes(&z, &next, &current);
            let ratio = |tn: f64, tc: f64| tc / (tc - tn);
            let step = th_new
                .iter()
                .zip(&th_cur)
                .filter(|(tn, _)| **tn > 0.0)
                .map(|(tn, tc)| ratio(*tn, *tc))
                .fold(1.0_f64, f64::min)
                .max(0.0);
            for (a, b) in current.iter_mut().zip(&target) {
                *a += step * (b - *a);
            }
            let cut = step * (1.0 + 1e-12) + 1e-300;
            let mut keep = vec![true; next.len()];
            for (k, (tn, tc)) in th_new.iter().zip(&th_cur).enumerate() {
                if *tn > 0.0 && ratio(*tn, *tc) <= cut {
                    keep[k + 1] = false;
                }
            }
            let mut it = keep.iter();
            next.retain(|_| *it.next().unwrap());
            let mut it = keep.iter();
            current.retain(|_| *it.next().unwrap());
        }

        let obj = objective(&z, &knots, &psi, &hat_weights(&z, &w, &knots));
        if obj <= trace[trace.len() - 1] {
            single = true;
        }
        trace.push(obj);
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual: -worst,
    })
}

fn finish(
    z: Vec<f64>,
    knots: Vec<usize>,
    mut psi: Vec<f64>,
    n: usize,
    iterations: usize,
    objective_trace: Vec<f64>,
) -> LogConcaveFit {
    let total: f64 = (0..knots.len() - 1)
        .map(|j| (z[knots[j + 1]] - z[knots[j]]) * ExpIntegral::new(psi[j], psi[j + 1]).j)
        .sum();
    let shift = total.ln();
    for v in &mut psi {
        *v -= shift;
    }
    let at: Vec<f64> = knots.iter().map(|&k| z[k]).collect();
    let phi = PiecewiseLinearFunction::new(at, psi, Shape::Concave)
        .expect("solver output is concave by construction");
    LogConcaveFit {
        phi,
        n,
        iterations,
        objective_trace,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogConcaveCharacterization {
    /// `max (H_n - Y_n)` over the evaluation grid; must not exceed `tolerance`.
    pub max_gap: f64,
    /// `max |H_n - Y_n|` over kinks of `phi`.
    pub max_kink_gap: f64,
    /// `|int exp(phi) - 1|`.
    pub mass_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl LogConcaveCharacterization {
    pub fn default_tolerance(data: &SampleData) -> f64 {
        1e-8 * (data.max() - data.min()).max(f64::MIN_POSITIVE)
    }
}

/// Compares `H_n(t) = int_{-inf}^t (t - x) exp(phi(x)) dx` with
/// `Y_n(t) = (1/n) sum (t - X_i)_+` on the observations, the knots of `phi` and the
/// midpoints between consecutive grid points.
pub fn check_logconcave_characterization(
    fit: &LogConcaveFit,
    data: &SampleData,
    tol: f64,
) -> LogConcaveCharacterization {
    let phi = fit.phi();
    let (z, w) = data.weighted();
    let mut grid: Vec<f64> = z.iter().chain(phi.knots()).copied().collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let log_dens = |t: f64| phi.evaluate(t).ok();
    let kinks = phi.kinks(phi.kink_tolerance());

    let (mut h, mut mass) = (0.0, 0.0);
    let (mut wsum, mut wx, mut zi) = (0.0, 0.0, 0);
    let mut max_gap = f64::NEG_INFINITY;
    let mut max_kink_gap: f64 = 0.0;
    let mut ki = 0;

    for k in 0..grid.len() {
        let t = grid[k];
        while zi < z.len() && z[zi] <= t {
            wsum += w[zi];
            wx += w[zi] * z[zi];
            zi += 1;
        }
        let gap = h - (t * wsum - wx);
        max_gap = max_gap.max(gap);
        while ki < kinks.len() && kinks[ki] < t {
            ki += 1;
        }
        if ki < kinks.len() && kinks[ki] == t {
            max_kink_gap = max_kink_gap.max(gap.abs());
        }
        if k + 1 == grid.len() {
            break;
        }
        let next = grid[k + 1];
        let delta = next - t;
        let (a, b) = (log_dens(t), log_dens(next));
        if let (Some(a), Some(b)) = (a, b) {
            let s = 0.5 * delta;
            let mid_val = 0.5 * (a + b);
            let h_mid = h + s * mass + s * s * ExpIntegral::new(a, mid_val).ja;
            max_gap = max_gap.max(h_mid - ((t + s) * wsum - wx));
            let e = ExpIntegral::new(a, b);
            h += delta * mass + delta * delta * e.ja;
            mass += delta * e.j;
        } else {
            h += delta * mass;
        }
    }
    let mass_residual = (fit.integral() - 1.0).abs();
    LogConcaveCharacterization {
        max_gap,
        max_kink_gap,
        mass_residual,
        tolerance: tol,
        passed: max_gap <= tol && max_kink_gap <= tol && mass_residual <= tol,
    }
}
