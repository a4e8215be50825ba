//! Independent reference solutions shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Convex LSE by exhaustive enumeration of active sets.
///
/// Every subset of interior design points is tried as the set of allowed kinks. The
/// restricted least-squares fit is computed from the hat basis by a dense solve and kept
/// if it is convex; the convex candidate of smallest RSS is the LSE. Feasible for n <= 12.
pub fn brute_force_convex_lse(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    assert!((2..=12).contains(&n));
    let interior = n.saturating_sub(2);
    let scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << interior) {
        let mut knots = vec![0];
        knots.extend((0..interior).filter(|b| mask >> b & 1 == 1).map(|b| b + 1));
        knots.push(n - 1);
        let m = knots.len();
        let mut basis = DMatrix::<f64>::zeros(n, m);
        for i in 0..n {
            let j = knots.partition_point(|&k| k <= i).min(m - 1).max(1);
            let (a, b) = (knots[j - 1], knots[j]);
            let w = (x[i] - x[a]) / (x[b] - x[a]);
            basis[(i, j - 1)] += 1.0 - w;
            basis[(i, j)] += w;
        }
        let rhs = DVector::from_column_slice(y);
        let gram = basis.transpose() * &basis;
        let Some(theta) = gram.lu().solve(&(basis.transpose() * rhs)) else {
            continue;
        };
        let fitted: Vec<f64> = (&basis * &theta).iter().copied().collect();
        let slopes: Vec<f64> = knots
            .windows(2)
            .map(|w| (fitted[w[1]] - fitted[w[0]]) / (x[w[1]] - x[w[0]]))
            .collect();
        if slopes.windows(2).any(|s| s[1] < s[0] - 1e-10 * scale) {
            continue;
        }
        let rss: f64 = fitted.iter().zip(y).map(|(f, v)| (f - v).powi(2)).sum();
        if best.as_ref().is_none_or(|(r, _)| rss < *r) {
            best = Some((rss, fitted));
        }
    }
    best.expect("the affine fit is always convex").1
}

/// Linear interpolation through `(xs, vs)`.
pub fn interp(xs: &[f64], vs: &[f64], t: f64) -> f64 {
    let j = xs.partition_point(|&k| k <= t).clamp(1, xs.len() - 1);
    let w = (t - xs[j - 1]) / (xs[j] - xs[j - 1]);
    vs[j - 1] + w * (vs[j] - vs[j - 1])
}

/// Composite Simpson rule with `m` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `int exp(phi)` of a piecewise-linear `phi`, by Simpson quadrature per segment.
pub fn exp_integral_quadrature(knots: &[f64], vals: &[f64]) -> f64 {
    knots
        .windows(2)
        .enumerate()
        .map(|(j, w)| {
            simpson(
                |t| (vals[j] + (t - w[0]) / (w[1] - w[0]) * (vals[j + 1] - vals[j])).exp(),
                w[0],
                w[1],
                64,
            )
        })
        .sum()
}

/// Log-likelihood `mean phi(X_i)` of a normalised log-density given at `knots`.
pub fn log_likelihood(knots: &[f64], vals: &[f64], obs: &[f64]) -> f64 {
    obs.iter().map(|&t| interp(knots, vals, t)).sum::<f64>() / obs.len() as f64
}

/// Best normalised tent density for two observations at 0 and 1.
///
/// Nested grid over the interior knot location and the three log-values; each candidate is
/// normalised by quadrature before its log-likelihood is compared. Returns the winning
/// density on `[0, 1]` as `(knots, log-values)`.
pub fn two_point_tent_oracle() -> (Vec<f64>, Vec<f64>) {
    let mut best = (f64::NEG_INFINITY, vec![], vec![]);
    let grid: Vec<f64> = (-8..=8).map(|i| i as f64 * 0.25).collect();
    for k in [0.25, 0.5, 0.75] {
        for &p in &grid {
            for &q in &grid {
                let line = p + k * (q - p);
                for lift in [0.0, 0.125, 0.25, 0.5, 1.0] {
                    let knots = vec![0.0, k, 1.0];
                    let mut vals = vec![p, line + lift, q];
                    let c = exp_integral_quadrature(&knots, &vals).ln();
                    vals.iter_mut().for_each(|v| *v -= c);
                    let ll = log_likelihood(&knots, &vals, &[0.0, 1.0]);
                    if ll > best.0 + 1e-12 {
                        best = (ll, knots, vals);
                    }
                }
            }
        }
    }
    (best.1, best.2)
}

/// Random concave log-density on `knots`, normalised by quadrature.
pub fn random_concave_candidate<R: Rng>(rng: &mut R, knots: &[f64]) -> Vec<f64> {
    let m = knots.len();
    let mut slopes: Vec<f64> = (0..m - 1).map(|_| rng.gen_range(-12.0..12.0)).collect();
    slopes.sort_by(|a, b| b.total_cmp(a));
    let mut vals = vec![0.0; m];
    for j in 1..m {
        vals[j] = vals[j - 1] + slopes[j - 1] * (knots[j] - knots[j - 1]);
    }
    let c = exp_integral_quadrature(knots, &vals).ln();
    vals.iter_mut().for_each(|v| *v -= c);
    vals
}

/// `0.5 int f^2 - mean f(X_i)` for a piecewise-linear `f` vanishing beyond its last knot.
pub fn convex_density_criterion(knots: &[f64], vals: &[f64], obs: &[f64]) -> f64 {
    let sq: f64 = knots
        .windows(2)
        .enumerate()
        .map(|(j, w)| (w[1] - w[0]) * (vals[j].powi(2) + vals[j] * vals[j + 1] + vals[j + 1].powi(2)) / 3.0)
        .sum();
    let last = *knots.last().unwrap();
    let lin: f64 = obs
        .iter()
        .map(|&t| if t <= last { interp(knots, vals, t) } else { 0.0 })
        .sum::<f64>()
        / obs.len() as f64;
    0.5 * sq - lin
}

/// Convex nonincreasing density LSE restricted to a fixed knot grid.
///
/// `f = sum theta_j (tau_j - x)_+` with `theta >= 0`, where the `tau_j` split every gap
/// between consecutive order statistics (and `0`) into `per_gap` pieces and continue past
/// the sample maximum up to five times its value. The quadratic criterion is minimised by the Lawson-Hanson
/// active-set method. Returns the criterion value and the fit on `[0, tau_1, ...]`.
pub fn grid_nnls_convex_density(obs: &[f64], per_gap: usize) -> (f64, Vec<f64>, Vec<f64>) {
    let mut sorted = obs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut ends = vec![0.0];
    ends.extend(&sorted);
    let last = *ends.last().unwrap();
    ends.push(5.0 * last);
    let mut tau: Vec<f64> = Vec::new();
    for (i, w) in ends.windows(2).enumerate() {
        let pieces = if i + 2 == ends.len() { 8 * per_gap } else { per_gap };
        for k in 1..=pieces {
            tau.push(w[0] + (w[1] - w[0]) * k as f64 / pieces as f64);
        }
    }
    tau.dedup();
    tau.retain(|&t| t > 0.0);
    let m = tau.len();
    let n = obs.len() as f64;
    let b: Vec<f64> = tau
        .iter()
        .map(|&t| obs.iter().map(|&x| (t - x).max(0.0)).sum::<f64>() / n)
        .collect();
    let gram = |s: f64, l: f64| l * s * s / 2.0 - s * s * s / 6.0;
    let g = DMatrix::from_fn(m, m, |i, j| gram(tau[i].min(tau[j]), tau[i].max(tau[j])));
    let bv = DVector::from_vec(b);
    let mut theta = DVector::<f64>::zeros(m);
    let mut passive: Vec<usize> = Vec::new();
    let tol = 1e-14 * bv.amax().max(1e-300);
    for _ in 0..10 * m {
        let w = &bv - &g * &theta;
        let cand = (0..m)
            .filter(|j| !passive.contains(j))
            .max_by(|&a, &c| w[a].total_cmp(&w[c]));
        match cand {
            Some(j) if w[j] > tol => passive.push(j),
            _ => break,
        }
        loop {
            let k = passive.len();
            let gp = DMatrix::from_fn(k, k, |a, c| g[(passive[a], passive[c])]);
            let bp = DVector::from_fn(k, |a, _| bv[passive[a]]);
            let z = gp.lu().solve(&bp).expect("positive definite");
            if z.iter().all(|&v| v > 0.0) {
                for (a, &j) in passive.iter().enumerate() {
                    theta[j] = z[a];
                }
                break;
            }
            let mut alpha = 1.0f64;
            for (a, &j) in passive.iter().enumerate() {
                if z[a] <= 0.0 {
                    alpha = alpha.min(theta[j] / (theta[j] - z[a]));
                }
            }
            for (a, &j) in passive.iter().enumerate() {
                theta[j] += alpha * (z[a] - theta[j]);
            }
            passive.retain(|&j| theta[j] > 1e-15);
            for j in 0..m {
                if !passive.contains(&j) {
                    theta[j] = 0.0;
                }
            }
        }
    }
    let mut knots = vec![0.0];
    knots.extend(&tau);
    let vals: Vec<f64> = knots
        .iter()
        .map(|&x| tau.iter().zip(theta.iter()).map(|(&t, &w)| w * (t - x).max(0.0)).sum())
        .collect();
    let crit = convex_density_criterion(&knots, &vals, obs);
    (crit, knots, vals)
}
