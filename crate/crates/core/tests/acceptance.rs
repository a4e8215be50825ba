//! One test per acceptance criterion, each at its stated tolerance.
//!
//! Run with `cargo test --release --test acceptance -- --nocapture` to see the measured values.

mod common;

use std::sync::OnceLock;

use convex_lne::ci::{regression_intervals, regression_mode_interval};
use convex_lne::convex_lse::{check_lse_characterization, default_characterization_tolerance, fit_values};
use convex_lne::coverage::{length_rate_check, run_coverage, CoverageReport, ExperimentConfig};
use convex_lne::density::LogConcaveOptions;
use convex_lne::sim::{ks_distance, oracle_table, pivotal_table, simulate_samples, LneSample, SimulationConfig};
use convex_lne::truth::{standard_normal, DensityTruth, RegressionTruth};
use convex_lne::{
    fit_convex_lse, fit_log_concave_mle, CriticalValueTable, NuisanceScale, RegressionData, SampleData,
    SolverOptions, Statistic, Target,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, usize::from)
}

struct Run {
    samples: Vec<LneSample>,
    pivotal: CriticalValueTable,
    oracle: CriticalValueTable,
}

fn simulate(f0: RegressionTruth) -> Run {
    let config = SimulationConfig {
        f0,
        x0: 0.5,
        n: 10_000,
        b: 10_000,
        seed: 20_240_601,
        sigma: 1.0,
        workers: workers(),
        ..Default::default()
    };
    let samples = simulate_samples(&config).expect("simulation");
    let pivotal = pivotal_table(&config, &samples).unwrap();
    let oracle = oracle_table(&config, &samples).unwrap();
    Run {
        samples,
        pivotal,
        oracle,
    }
}

fn main_run() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| simulate(RegressionTruth::Quadratic { c: 12.0, m: 0.5 }))
}

fn check(label: &str, got: f64, want: f64, tol: f64) -> bool {
    let ok = (got - want).abs() <= tol;
    println!("{label}: {got:.4} (target {want} ± {tol}) {}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn check_range(label: &str, got: f64, lo: f64, hi: f64) -> bool {
    let ok = (lo..=hi).contains(&got);
    println!("{label}: {got:.4} (range [{lo}, {hi}]) {}", if ok { "PASS" } else { "FAIL" });
    ok
}

#[test]
fn criterion_1_pivotal_critical_values() {
    let t = &main_run().pivotal;
    let q = |s| t.quantile(s, 0.05).unwrap();
    let results = [
        check("c.05 |L0|", q(Statistic::AbsL0), 2.13, 0.15),
        check("c.05 |L1|", q(Statistic::AbsL1), 9.00, 0.80),
        check("c.05 |M|", q(Statistic::AbsM), 0.61, 0.06),
    ];
    assert!(results.iter().all(|&b| b));
}

#[test]
fn criterion_2_oracle_critical_values() {
    let t = &main_run().oracle;
    let q = |s| t.quantile(s, 0.05).unwrap();
    let results = [
        check("c.05 |H2|", q(Statistic::AbsH2), 2.58, 0.20),
        check("c.05 |H3|", q(Statistic::AbsH3), 11.14, 1.00),
        check("c.05 |H2 mode|", q(Statistic::AbsH2Mode), 0.46, 0.05),
    ];
    assert!(results.iter().all(|&b| b));
}

#[test]
fn criterion_3_universality_across_truths() {
    let other = simulate(RegressionTruth::Quadratic { c: 6.0, m: 0.2 });
    let b = 10_000.0f64;
    // Two-sample KS critical value at the 1% level with equal sample sizes.
    let threshold = (-(0.005f64).ln() / 2.0).sqrt() * (2.0 / b).sqrt();
    let mut ok = true;
    for stat in [Statistic::L0, Statistic::L1, Statistic::M] {
        let d = ks_distance(&main_run().pivotal, &other.pivotal, stat).unwrap();
        let pass = d < threshold;
        println!("KS {stat}: {d:.4} (threshold {threshold:.4}) {}", if pass { "PASS" } else { "FAIL" });
        ok &= pass;
    }
    assert!(other.samples.iter().all(|s| s.certified));
    assert!(ok);
}

fn coverage(text: &str) -> CoverageReport {
    let mut cfg = ExperimentConfig::from_kv(text).unwrap();
    cfg.workers = workers();
    let report = run_coverage(&cfg, &CriticalValueTable::builtin()).expect("coverage run");
    for r in &report.rows {
        assert_eq!(r.uncertified, 0, "uncertified fits in {r:?}");
        assert_eq!(r.invariant_violations, 0, "{r:?}");
    }
    report
}

#[test]
fn criterion_4_regression_coverage() {
    let report = coverage(
        "model = convex-regression\nf0 = circle-arc(20,0.5)\nx0 = 0.5\nn = 1000\nreps = 2000\nlevel = 0.95\nsigma = 1\nseed = 4\n",
    );
    let mut ok = true;
    for t in Target::ALL {
        let r = report.row(t, 1000, 0.95).unwrap();
        ok &= check_range(&format!("coverage {}", t.name()), r.coverage, 0.93, 0.97);
    }
    assert!(ok);
}

#[test]
fn criterion_5_log_concave_mode_coverage() {
    let report = coverage("model = log-concave\nf0 = beta(2,3)\ntargets = mode\nn = 100\nreps = 2000\nlevel = 0.80, 0.95\nseed = 5\n");
    let a = check("mode coverage at 0.80", report.row(Target::Mode, 100, 0.80).unwrap().coverage, 0.74, 0.025);
    let b = check("mode coverage at 0.95", report.row(Target::Mode, 100, 0.95).unwrap().coverage, 0.93, 0.025);
    assert!(a && b);
}

#[test]
fn criterion_6_length_rates() {
    let report = coverage(
        "model = convex-regression\nf0 = circle-arc(20,0.5)\nx0 = 0.5\nn = 500, 2000, 8000\nreps = 400\nlevel = 0.95\nseed = 6\n",
    );
    let slope = |t| length_rate_check(&report, t, 0.95).unwrap();
    let results = [
        check("value slope", slope(Target::Value), -0.4, 0.15),
        check("derivative slope", slope(Target::Derivative), -0.2, 0.1),
        check("mode slope", slope(Target::Mode), -0.2, 0.1),
    ];
    assert!(results.iter().all(|&b| b));
}

fn noisy_quadratic(rng: &mut ChaCha8Rng, n: usize) -> RegressionData {
    let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let y = x.iter().map(|t| 12.0 * (t - 0.5f64).powi(2) + standard_normal(rng)).collect();
    RegressionData::new(x, y).unwrap()
}

#[test]
fn criterion_7a_lse_matches_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let n = 2 + case % 7;
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        x.sort_by(f64::total_cmp);
        x.dedup();
        let y: Vec<f64> = x.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d = RegressionData::new(x.clone(), y.clone()).unwrap();
        let got = fit_values(&d, &SolverOptions::default()).unwrap();
        let want = common::brute_force_convex_lse(&x, &y);
        worst = got.iter().zip(&want).fold(worst, |m, (a, b)| m.max((a - b).abs()));
    }
    println!("max discrepancy {worst:e}");
    assert!(worst < 1e-8);
}

#[test]
fn criterion_7b_all_simulated_fits_certified() {
    let bad = main_run().samples.iter().filter(|s| !s.certified).count();
    println!("uncertified simulated fits: {bad}");
    assert_eq!(bad, 0);
}

#[test]
fn criterion_7c_equivariance_and_interval_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(73);
    let table = CriticalValueTable::builtin();
    let opts = SolverOptions::default();
    for _ in 0..50 {
        let n = rng.gen_range(20..500);
        let d = noisy_quadratic(&mut rng, n);
        let (c, a, b) = (rng.gen_range(0.1..10.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let base = fit_convex_lse(&d, &opts).unwrap();
        let y2: Vec<f64> = d.x().iter().zip(d.y()).map(|(t, v)| c * v + a + b * t).collect();
        let moved = fit_convex_lse(&RegressionData::new(d.x().to_vec(), y2.clone()).unwrap(), &opts).unwrap();
        let scale = y2.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for ((m, f), t) in moved.values().iter().zip(base.values()).zip(d.x()) {
            assert!((m - (c * f + a + b * t)).abs() < 1e-7 * scale);
        }
        let scaled =
            fit_convex_lse(&RegressionData::new(d.x().to_vec(), d.y().iter().map(|v| c * v).collect()).unwrap(), &opts)
                .unwrap();
        assert_eq!(base.kinks(base.kink_tolerance()), scaled.kinks(scaled.kink_tolerance()));
        let (m1, m2) = (regression_mode_interval(&base, 0.05, &table), regression_mode_interval(&scaled, 0.05, &table));
        if let (Ok(m1), Ok(m2)) = (&m1, &m2) {
            assert_eq!((m1.lower, m1.upper), (m2.lower, m2.upper));
        } else {
            assert_eq!(m1.is_ok(), m2.is_ok());
        }

        let sigma = NuisanceScale::new(1.0).unwrap();
        let x0 = rng.gen_range(0.05..0.95);
        if let (Ok(w), Ok(s)) = (
            regression_intervals(&base, x0, n, sigma, 0.05, &table),
            regression_intervals(&base, x0, n, sigma, 0.20, &table),
        ) {
            for (w, s) in [(w.value, s.value), (w.derivative, s.derivative)] {
                assert!(w.lower <= s.lower && s.upper <= w.upper);
                let (l, u) = (w.estimate - w.lower, w.upper - w.estimate);
                assert!((l - u).abs() <= 1e-12 * l.abs().max(1.0));
            }
        }
        let ch = check_lse_characterization(&base, &d, default_characterization_tolerance(&d)).unwrap();
        assert!(ch.passed);
    }
}

#[test]
fn criterion_7d_worker_count_determinism() {
    let base = SimulationConfig {
        n: 500,
        b: 200,
        seed: 9,
        ..Default::default()
    };
    let one = simulate_samples(&SimulationConfig { workers: 1, ..base.clone() }).unwrap();
    let many = simulate_samples(&SimulationConfig { workers: 4, ..base.clone() }).unwrap();
    assert_eq!(one, many);

    let text = "model = log-concave\nn = 50, 100\nreps = 30\nlevel = 0.8, 0.95\nseed = 2\n";
    let mut cfg = ExperimentConfig::from_kv(text).unwrap();
    let table = CriticalValueTable::builtin();
    let r1 = run_coverage(&cfg, &table).unwrap();
    cfg.workers = 3;
    assert_eq!(r1, run_coverage(&cfg, &table).unwrap());
}

#[test]
fn criterion_7e_log_concave_mle_properties() {
    let opts = LogConcaveOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(75);
    for n in [2, 3, 10, 100, 1000] {
        let obs = DensityTruth::Normal { mean: 0.0, sd: 1.0 }.sample(&mut rng, n);
        let fit = fit_log_concave_mle(&SampleData::new(obs.clone()).unwrap(), &opts).unwrap();
        let mass = common::exp_integral_quadrature(fit.phi().knots(), fit.phi().values());
        assert!((fit.integral() - 1.0).abs() < 1e-8 && (mass - 1.0).abs() < 1e-8, "n = {n}");

        let (mu, s) = (rng.gen_range(-3.0..3.0), rng.gen_range(0.3..3.0));
        let moved: Vec<f64> = obs.iter().map(|x| s * x + mu).collect();
        let g = fit_log_concave_mle(&SampleData::new(moved).unwrap(), &opts).unwrap();
        let (lo, hi) = fit.support();
        let (a, b) = g.support();
        for i in 0..=20 {
            let t = (lo + (hi - lo) * i as f64 / 20.0).min(hi);
            let want = fit.density(t) / s;
            let got = g.density((s * t + mu).clamp(a, b));
            assert!((got - want).abs() < 1e-6 * (1.0 + want), "n = {n}, t = {t}");
        }
    }

    let fit = fit_log_concave_mle(&SampleData::new(vec![0.0, 1.0]).unwrap(), &opts).unwrap();
    let (k, v) = common::two_point_tent_oracle();
    let worst = (0..=40)
        .map(|i| i as f64 / 40.0)
        .map(|t| (fit.density(t) - common::interp(&k, &v, t).exp()).abs())
        .fold(0.0, f64::max);
    println!("n = 2 oracle discrepancy {worst:e}");
    assert!(worst < 1e-4);
}
