use convex_lne::ci::{
    ci_generic, estimate_sigma, logconcave_intervals, logconcave_mode_interval, nuisance_a_random_design,
    regression_intervals, regression_mode_interval,
};
use convex_lne::density::LogConcaveOptions;
use convex_lne::truth::{standard_normal, DensityTruth};
use convex_lne::{
    fit_convex_lse, fit_log_concave_mle, CriticalValueTable, Domain, LinearPiece, NuisanceScale, RegressionData,
    SampleData, SolverOptions,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn regression(seed: u64, n: usize, c: f64) -> RegressionData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let y = x.iter().map(|t| c * (12.0 * (t - 0.5f64).powi(2) + standard_normal(&mut rng))).collect();
    RegressionData::new(x, y).unwrap()
}

#[test]
fn sigma_estimate_on_pure_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 100_000;
    let x: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    let y = (0..n).map(|_| standard_normal(&mut rng)).collect();
    let s = estimate_sigma(&RegressionData::new(x, y).unwrap()).unwrap();
    assert!((0.99..=1.01).contains(&s), "sigma_hat = {s}");
}

#[test]
fn random_design_scale_tracks_local_density() {
    // X = sqrt(U) has density 2x, which is 1 at the centre of the piece.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x: Vec<f64> = (0..100_000).map(|_| rng.gen::<f64>().sqrt()).collect();
    let piece = LinearPiece {
        u_hat: 0.45,
        v_hat: 0.55,
        slope: 0.0,
        intercept: 0.0,
        at_kink: false,
    };
    let a = nuisance_a_random_design(&x, &piece, 2.0).unwrap().get();
    assert!((a / 2.0 - 1.0).abs() < 0.02, "a = {a}");
}

#[test]
fn two_point_uniform_scale_is_one() {
    let fit = fit_log_concave_mle(&SampleData::new(vec![0.0, 1.0]).unwrap(), &LogConcaveOptions::default()).unwrap();
    let a = convex_lne::ci::nuisance_logconcave(&fit, 0.5).unwrap().get();
    assert!((a - 1.0).abs() < 1e-6, "a = {a}");
    let table = CriticalValueTable::builtin();
    let p = logconcave_intervals(&fit, 0.5, 0.05, &table).unwrap();
    assert!(p.value.lower >= 0.0);
    assert!(p.value.covers(1.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn intervals_nest_and_are_symmetric(seed in 0u64..10_000, n in 30usize..400, x0 in 0.05f64..0.95) {
        let d = regression(seed, n, 1.0);
        let fit = fit_convex_lse(&d, &SolverOptions::default()).unwrap();
        let table = CriticalValueTable::builtin();
        let scale = NuisanceScale::new(1.0).unwrap();
        let (Ok(wide), Ok(narrow)) = (
            regression_intervals(&fit, x0, n, scale, 0.05, &table),
            regression_intervals(&fit, x0, n, scale, 0.20, &table),
        ) else {
            return Ok(());
        };
        for (w, s) in [(wide.value, narrow.value), (wide.derivative, narrow.derivative)] {
            prop_assert!(w.lower <= s.lower && s.upper <= w.upper);
            prop_assert!(w.lower <= w.estimate && w.estimate <= w.upper);
            let (l, u) = (w.estimate - w.lower, w.upper - w.estimate);
            prop_assert!((l - u).abs() <= 1e-12 * l.abs().max(1.0));
        }
        let (mw, ms) = (
            regression_mode_interval(&fit, 0.05, &table),
            regression_mode_interval(&fit, 0.20, &table),
        );
        if let (Ok(mw), Ok(ms)) = (mw, ms) {
            prop_assert!(mw.lower <= ms.lower && ms.upper <= mw.upper);
        }
    }

    #[test]
    fn generic_builder_reproduces_regression_intervals(seed in 0u64..10_000, n in 30usize..400, x0 in 0.05f64..0.95, a in 0.1f64..3.0) {
        let d = regression(seed, n, 1.0);
        let fit = fit_convex_lse(&d, &SolverOptions::default()).unwrap();
        let table = CriticalValueTable::builtin();
        let scale = NuisanceScale::new(a).unwrap();
        let Ok(p) = regression_intervals(&fit, x0, n, scale, 0.05, &table) else {
            return Ok(());
        };
        let est = (fit.evaluate(x0).unwrap(), p.piece.slope);
        let (v, s) = ci_generic(est, &p.piece, x0, n, scale, 0.05, &table, Domain::Real).unwrap();
        prop_assert_eq!(v, p.value);
        prop_assert_eq!(s, p.derivative);
    }

    #[test]
    fn regression_mode_interval_is_scale_free(seed in 0u64..10_000, n in 30usize..400, c in 0.1f64..10.0) {
        let table = CriticalValueTable::builtin();
        let f1 = fit_convex_lse(&regression(seed, n, 1.0), &SolverOptions::default()).unwrap();
        let f2 = fit_convex_lse(&regression(seed, n, c), &SolverOptions::default()).unwrap();
        let (a, b) = (regression_mode_interval(&f1, 0.05, &table), regression_mode_interval(&f2, 0.05, &table));
        prop_assert_eq!(a.is_ok(), b.is_ok());
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert_eq!((a.lower, a.upper), (b.lower, b.upper));
        }
    }

    #[test]
    fn logconcave_mode_interval_translates(seed in 0u64..10_000, n in 20usize..300, mu in -5.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = DensityTruth::Beta { a: 2.0, b: 3.0 }.sample(&mut rng, n);
        let moved: Vec<f64> = base.iter().map(|x| x + mu).collect();
        let opts = LogConcaveOptions::default();
        let f0 = fit_log_concave_mle(&SampleData::new(base).unwrap(), &opts).unwrap();
        let f1 = fit_log_concave_mle(&SampleData::new(moved).unwrap(), &opts).unwrap();
        let table = CriticalValueTable::builtin();
        let (a, b) = (logconcave_mode_interval(&f0, 0.05, &table), logconcave_mode_interval(&f1, 0.05, &table));
        prop_assert_eq!(a.is_ok(), b.is_ok());
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!((a.lower + mu - b.lower).abs() < 1e-7);
            prop_assert!((a.upper + mu - b.upper).abs() < 1e-7);
        }
    }
}
