use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::SampleData;
use crate::error::{Error, Result};
use crate::pwl::{PiecewiseLinearFunction, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexDensityOptions {
    pub max_iter: usize,
    /// Stopping tolerance on the directional derivatives, relative to the largest observation.
    pub tol: f64,
}

impl Default for ConvexDensityOptions {
    fn default() -> Self {
        Self {
            max_iter: 5_000,
            tol: 1e-10,
        }
    }
}

/// `int_0^inf (s - x)_+ (l - x)_+ dx`.
fn gram(s: f64, l: f64) -> f64 {
    let (s, l) = if s <= l { (s, l) } else { (l, s) };
    0.5 * l * s * s - s * s * s / 6.0
}

/// Cumulative weights and first moments over the sorted distinct observations.
struct Ecdf {
    z: Vec<f64>,
    w: Vec<f64>,
    cw: Vec<f64>,
    cwz: Vec<f64>,
}

impl Ecdf {
    fn new(data: &SampleData) -> Self {
        let (z, w) = data.weighted();
        let mut cw = Vec::with_capacity(z.len() + 1);
        let mut cwz = Vec::with_capacity(z.len() + 1);
        let (mut a, mut b) = (0.0, 0.0);
        cw.push(0.0);
        cwz.push(0.0);
        for (zi, wi) in z.iter().zip(&w) {
            a += wi;
            b += wi * zi;
            cw.push(a);
            cwz.push(b);
        }
        Self { z, w, cw, cwz }
    }

    /// `Y(t) = sum w_i (t - z_i)_+`.
    fn y(&self, t: f64) -> f64 {
        let k = self.z.partition_point(|&v| v <= t);
        t * self.cw[k] - self.cwz[k]
    }
}

/// `f(x) = sum theta_j (tau_j - x)_+` with `tau` sorted ascending.
#[derive(Debug, Clone)]
struct Mixture {
    tau: Vec<f64>,
    theta: Vec<f64>,
}

impl Mixture {
    fn value(&self, x: f64) -> f64 {
        self.tau
            .iter()
            .zip(&self.theta)
            .map(|(t, th)| th * (t - x).max(0.0))
            .sum()
    }

    /// Drops knots carrying negligible mass and re-solves.
    fn pruned(self, e: &Ecdf) -> Self {
        let keep: Vec<bool> = self
            .tau
            .iter()
            .zip(&self.theta)
            .map(|(t, th)| 0.5 * th * t * t > 1e-15)
            .collect();
        if keep.iter().all(|&k| k) || !keep.iter().any(|&k| k) {
            return self;
        }
        let tau: Vec<f64> = self.tau.iter().zip(&keep).filter(|p| *p.1).map(|p| *p.0).collect();
        match solve_restricted(&tau, e) {
            Some(theta) if theta.iter().all(|&v| v >= 0.0) => Self { tau, theta },
            _ => self,
        }
    }

    fn mass(&self) -> f64 {
        self.tau
            .iter()
            .zip(&self.theta)
            .map(|(t, th)| 0.5 * th * t * t)
            .sum()
    }
}

/// Local minimisers of `D(t) = H(t) - Y(t)` on `(0, inf)`, one per interval between
/// consecutive observations and knots, paired with the value of `D` there.
fn stationary_points(f: &Mixture, e: &Ecdf) -> Vec<(f64, f64)> {
    let mut brk: Vec<f64> = e.z.iter().chain(&f.tau).copied().filter(|&v| v > 0.0).collect();
    brk.insert(0, 0.0);
    brk.sort_by(f64::total_cmp);
    brk.dedup();

    // suffix sums over knots strictly right of the current interval
    let (mut s0, mut s1): (f64, f64) = (
        f.theta.iter().sum(),
        f.tau.iter().zip(&f.theta).map(|(t, th)| t * th).sum(),
    );
    let (mut a2, mut a3) = (0.0, 0.0);
    let (mut ki, mut zi) = (0, 0);
    let (mut p, mut pz) = (0.0, 0.0);
    let d_at = |t: f64, s0: f64, s1: f64, a2: f64, a3: f64, p: f64, pz: f64| {
        let h = 0.5 * t * a2 - a3 / 6.0 + 0.5 * s1 * t * t - s0 * t * t * t / 6.0;
        h - (t * p - pz)
    };

    let mut out = Vec::new();
    for k in 0..brk.len() {
        let l = brk[k];
        while ki < f.tau.len() && f.tau[ki] <= l {
            let (t, th) = (f.tau[ki], f.theta[ki]);
            s0 -= th;
            s1 -= th * t;
            a2 += th * t * t;
            a3 += th * t * t * t;
            ki += 1;
        }
        while zi < e.z.len() && e.z[zi] <= l {
            p += e.w[zi];
            pz += e.w[zi] * e.z[zi];
            zi += 1;
        }
        let c = 0.5 * a2;
        let ff = |t: f64| c + t * s1 - 0.5 * t * t * s0;
        if k + 1 == brk.len() {
            if ff(l) < p * (1.0 - 1e-12) {
                let t = 2.0 * l.max(f64::MIN_POSITIVE);
                out.push((t, d_at(t, s0, s1, a2, a3, p, pz)));
            }
            break;
        }
        let r = brk[k + 1];
        let target = p - c;
        if ff(l) < p && ff(r) > p && s0 > 0.0 {
            let disc = (s1 * s1 - 2.0 * s0 * target).max(0.0);
            let t = (2.0 * target / (s1 + disc.sqrt())).clamp(l, r);
            if t > l && t < r {
                out.push((t, d_at(t, s0, s1, a2, a3, p, pz)));
            }
        }
    }
    out
}

fn solve_restricted(tau: &[f64], e: &Ecdf) -> Option<Vec<f64>> {
    let k = tau.len();
    // unit-diagonal scaling keeps spikes near zero from wrecking the conditioning
    let sc: Vec<f64> = tau.iter().map(|&t| gram(t, t).sqrt().recip()).collect();
    let g = DMatrix::from_fn(k, k, |i, j| gram(tau[i], tau[j]) * sc[i] * sc[j]);
    let b = DVector::from_iterator(k, tau.iter().zip(&sc).map(|(&t, s)| e.y(t) * s));
    let sol = match g.clone().cholesky() {
        Some(ch) => ch.solve(&b),
        None => g.lu().solve(&b)?,
    };
    let theta: Vec<f64> = sol.iter().zip(&sc).map(|(v, s)| v * s).collect();
    theta.iter().all(|v| v.is_finite()).then_some(theta)
}

impl Ecdf {
    /// Right-continuous empirical distribution function.
    fn cdf(&self, t: f64) -> f64 {
        self.cw[self.z.partition_point(|&v| v <= t)]
    }

    /// Index of the open gap between observations that contains `t`.
    fn gap(&self, t: f64) -> usize {
        self.z.partition_point(|&v| v < t)
    }
}

impl Mixture {
    /// `int_0^t f`.
    fn cdf(&self, t: f64) -> f64 {
        self.tau
            .iter()
            .zip(&self.theta)
            .map(|(s, th)| {
                let m = t.min(*s);
                th * (s * m - 0.5 * m * m)
            })
            .sum()
    }
}

/// Collapses adjacent knots sharing a gap between observations into their
/// `theta`-weighted centre; an optimum never has two knots in one gap because `D` is
/// strictly convex there.
fn merge_same_gap(f: &Mixture, e: &Ecdf) -> Option<Mixture> {
    let mut tau: Vec<f64> = Vec::with_capacity(f.tau.len());
    let mut weight: Vec<f64> = Vec::with_capacity(f.tau.len());
    for (&t, &th) in f.tau.iter().zip(&f.theta) {
        match tau.last() {
            Some(&prev) if e.gap(prev) == e.gap(t) && !e.z.contains(&t) => {
                let w = weight.last_mut().unwrap();
                let last = tau.last_mut().unwrap();
                if *w + th > 0.0 {
                    *last = (*last * *w + t * th) / (*w + th);
                }
                *w += th;
            }
            _ => {
                tau.push(t);
                weight.push(th);
            }
        }
    }
    if tau.len() == f.tau.len() {
        return None;
    }
    let theta = solve_restricted(&tau, e)?;
    theta.iter().all(|&v| v >= 0.0).then_some(Mixture { tau, theta })
}

/// Newton iterations on the knot locations for `int_0^tau_j f = F_n(tau_j)`, with the slope
/// changes re-solved at every trial point. Knots stay inside their gaps.
fn polish(f: &Mixture, e: &Ecdf) -> Mixture {
    let k = f.tau.len();
    let gaps: Vec<usize> = f.tau.iter().map(|&t| e.gap(t)).collect();
    let resid = |m: &Mixture| -> Vec<f64> { m.tau.iter().map(|&t| m.cdf(t) - e.cdf(t)).collect() };
    let norm = |r: &[f64]| r.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    let valid = |tau: &[f64]| {
        tau.windows(2).all(|w| w[0] < w[1])
            && tau.iter().zip(&gaps).all(|(&t, &g)| t > 0.0 && e.gap(t) == g && !e.z.contains(&t))
    };
    let build = |tau: Vec<f64>| -> Option<Mixture> {
        let theta = solve_restricted(&tau, e)?;
        theta.iter().all(|&v| v >= 0.0).then_some(Mixture { tau, theta })
    };

    let mut best = f.clone();
    let mut r = resid(&best);
    for _ in 0..60 {
        let r0 = norm(&r);
        if r0 < 1e-14 {
            break;
        }
        let mut jac = DMatrix::zeros(k, k);
        for j in 0..k {
            let t = best.tau[j];
            let lo = if gaps[j] > 0 { e.z[gaps[j] - 1] } else { 0.0 };
            let hi = e.z.get(gaps[j]).copied().unwrap_or(f64::INFINITY);
            let h = (1e-7 * t).min(0.25 * (t - lo)).min(0.25 * (hi - t));
            let mut tp = best.tau.clone();
            tp[j] = t + h;
            let mut tm = best.tau.clone();
            tm[j] = t - h;
            let (Some(mp), Some(mm)) = (build(tp), build(tm)) else {
                return best;
            };
            let (rp, rm) = (resid(&mp), resid(&mm));
            for i in 0..k {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let Some(step) = jac.lu().solve(&DVector::from_column_slice(&r)) else {
            return best;
        };
        let mut alpha = 1.0;
        let mut moved = false;
        while alpha > 1e-6 {
            let tau: Vec<f64> = best.tau.iter().zip(step.iter()).map(|(t, s)| t - alpha * s).collect();
            if valid(&tau) {
                if let Some(m) = build(tau) {
                    let rn = resid(&m);
                    if norm(&rn) < r0 {
                        best = m;
                        r = rn;
                        moved = true;
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }
    best
}

fn initial_triangle(e: &Ecdf) -> Mixture {
    let zmax = e.z[e.z.len() - 1].max(f64::MIN_POSITIVE);
    let cands = e
        .z
        .iter()
        .copied()
        .filter(|&t| t > 0.0)
        .chain((1..=16).map(|k| zmax * (1.0 + k as f64 / 8.0)));
    let (mut best, mut score) = (zmax * 1.5, f64::NEG_INFINITY);
    for t in cands {
        let b = e.y(t);
        let s = 3.0 * b * b / (t * t * t);
        if s > score {
            best = t;
            score = s;
        }
    }
    let theta = 3.0 * e.y(best) / (best * best * best);
    Mixture {
        tau: vec![best],
        theta: vec![theta],
    }
}

fn to_function(f: &Mixture) -> Result<PiecewiseLinearFunction> {
    let mut knots = vec![0.0];
    knots.extend(f.tau.iter().copied().filter(|&t| t > 0.0));
    let values: Vec<f64> = knots.iter().map(|&t| f.value(t)).collect();
    let mut values = values;
    let last = values.len() - 1;
    values[last] = 0.0;
    PiecewiseLinearFunction::new(knots, values, Shape::Convex)
}

/// Least-squares convex nonincreasing density on `[0, inf)`.
///
/// The returned function is supported on `[0, last knot]` and vanishes at its last knot;
/// use [`convex_density_value`] to evaluate it on the whole half-line.
pub fn fit_convex_density_lse(
    data: &SampleData,
    opts: &ConvexDensityOptions,
) -> Result<PiecewiseLinearFunction> {
    data.require_nonnegative()?;
    let e = Ecdf::new(data);
    if e.z[e.z.len() - 1] <= 0.0 {
        return Err(Error::DegenerateData("all observations are zero".into()));
    }
    let tol = opts.tol * e.z[e.z.len() - 1];
    let mut f = initial_triangle(&e);
    let mut worst = f64::NEG_INFINITY;
    let mut polishes = 0;
    let mut prev: Option<Mixture> = None;

    for _ in 0..opts.max_iter {
        let cands = stationary_points(&f, &e);
        worst = cands.iter().map(|c| c.1).fold(0.0, f64::min);
        // most violating candidate in every gap between knots
        let mut picks: Vec<f64> = Vec::new();
        let mut gap_best: Option<(f64, f64)> = None;
        let mut gap = 0;
        for &(t, d) in &cands {
            while gap < f.tau.len() && f.tau[gap] < t {
                if let Some((bt, _)) = gap_best.take() {
                    picks.push(bt);
                }
                gap += 1;
            }
            if d < -tol && gap_best.is_none_or(|(_, bd)| d < bd) {
                gap_best = Some((t, d));
            }
        }
        if let Some((bt, _)) = gap_best {
            picks.push(bt);
        }
        let spacing = 1e-13 * e.z[e.z.len() - 1];
        picks.retain(|t| f.tau.iter().all(|k| (k - t).abs() > spacing));
        let stalled = prev.as_ref().is_some_and(|p: &Mixture| p.tau == f.tau && p.theta == f.theta);
        prev = Some(f.clone());
        if picks.is_empty() || stalled {
            if polishes == 3 {
                // a stall this close to the optimum is a rounding floor, not a failure
                if picks.is_empty() || worst >= -1e4 * tol {
                    return to_function(&f);
                }
                break;
            }
            polishes += 1;
            while let Some(m) = merge_same_gap(&f, &e) {
                f = m;
            }
            f = polish(&f, &e);
            continue;
        }

        let mut next: Vec<(f64, f64)> = f
            .tau
            .iter()
            .copied()
            .zip(f.theta.iter().copied())
            .chain(picks.into_iter().map(|t| (t, 0.0)))
            .collect();
        next.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (mut tau, mut current): (Vec<f64>, Vec<f64>) = next.into_iter().unzip();
        loop {
            let target = solve_restricted(&tau, &e).ok_or(Error::NonConvergence {
                iterations: 0,
                residual: -worst,
            })?;
            if target.iter().all(|&t| t >= 0.0) {
                f = Mixture { tau, theta: target }.pruned(&e);
                break;
            }
            let ratio = |tn: f64, tc: f64| tc / (tc - tn);
            let step = target
                .iter()
                .zip(&current)
                .filter(|(tn, _)| **tn < 0.0)
                .map(|(tn, tc)| ratio(*tn, *tc))
                .fold(1.0_f64, f64::min)
                .max(0.0);
            let cut = step * (1.0 + 1e-12) + 1e-300;
            let keep: Vec<bool> = target
                .iter()
                .zip(&current)
                .map(|(tn, tc)| !(*tn < 0.0 && ratio(*tn, *tc) <= cut))
                .collect();
            for (c, t) in current.iter_mut().zip(&target) {
                *c += step * (t - *c);
            }
            let mut it = keep.iter();
            tau.retain(|_| *it.next().unwrap());
            let mut it = keep.iter();
            current.retain(|_| *it.next().unwrap());
            if tau.is_empty() {
                return Err(Error::NonConvergence {
                    iterations: 0,
                    residual: -worst,
                });
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual: -worst,
    })
}

/// Value of a fitted convex density anywhere on the real line (zero off its support).
pub fn convex_density_value(f: &PiecewiseLinearFunction, t: f64) -> f64 {
    let (lo, hi) = f.domain();
    if t < lo || t > hi {
        0.0
    } else {
        f.evaluate(t).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexDensityCharacterization {
    /// `min (H_n - Y_n)` over all local minimisers; must not fall below `-tolerance`.
    pub min_gap: f64,
    /// `max |H_n - Y_n|` over interior kinks.
    pub max_kink_gap: f64,
    /// `|int f - 1|`.
    pub mass_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl ConvexDensityCharacterization {
    pub fn default_tolerance(data: &SampleData) -> f64 {
        1e-8 * data.max().max(1.0)
    }
}

/// Checks `H_n(t) = int_0^t (t - x) f(x) dx >= Y_n(t)` on `(0, inf)` with equality at kinks.
pub fn check_convex_density_characterization(
    f: &PiecewiseLinearFunction,
    data: &SampleData,
    tol: f64,
) -> Result<ConvexDensityCharacterization> {
    if f.domain().0 != 0.0 {
        return Err(Error::InvalidInput("convex density must start at 0".into()));
    }
    if f.values().windows(2).any(|w| w[1] > w[0]) || f.values().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidInput("density must be nonnegative and nonincreasing".into()));
    }
    let e = Ecdf::new(data);
    // recover the mixture representation from the slope changes
    let k = f.knots();
    let mut slopes = f.slopes();
    slopes.push(0.0);
    let mut tau = Vec::new();
    let mut theta = Vec::new();
    for j in 1..k.len() {
        let th = slopes[j] - slopes[j - 1];
        if th != 0.0 {
            tau.push(k[j]);
            theta.push(th);
        }
    }
    let m = Mixture { tau, theta };
    let min_gap = stationary_points(&m, &e)
        .into_iter()
        .map(|c| c.1)
        .fold(f64::INFINITY, f64::min);
    let kink_gap = |t: f64| {
        let h: f64 = m.tau.iter().zip(&m.theta).map(|(s, th)| th * gram(*s, t)).sum();
        (h - e.y(t)).abs()
    };
    let kinks = f.kinks(f.kink_tolerance());
    let max_kink_gap = kinks[1..].iter().map(|&t| kink_gap(t)).fold(0.0, f64::max);
    let mass_residual = (m.mass() - 1.0).abs();
    let min_gap = if min_gap.is_finite() { min_gap } else { 0.0 };
    Ok(ConvexDensityCharacterization {
        min_gap,
        max_kink_gap,
        mass_residual,
        tolerance: tol,
        passed: min_gap >= -tol && max_kink_gap <= tol && mass_residual <= tol.max(1e-6),
    })
}
