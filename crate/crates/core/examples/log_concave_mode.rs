//! Log-concave MLE of a Beta(2,3) sample with a mode interval.

use convex_lne::ci::{logconcave_intervals, logconcave_mode_interval};
use convex_lne::density::LogConcaveOptions;
use convex_lne::sim::replication_rng;
use convex_lne::truth::DensityTruth;
use convex_lne::{fit_log_concave_mle, CriticalValueTable, SampleData};

fn main() -> convex_lne::Result<()> {
    let truth = DensityTruth::Beta { a: 2.0, b: 3.0 };
    let obs = truth.sample(&mut replication_rng(3, 0), 500);
    let fit = fit_log_concave_mle(&SampleData::new(obs)?, &LogConcaveOptions::default())?;
    println!("{} knots, {} Newton steps, integral {:.10}", fit.phi().len(), fit.iterations(), fit.integral());

    let table = CriticalValueTable::builtin();
    for level in [0.80, 0.95] {
        let ci = logconcave_mode_interval(&fit, 1.0 - level, &table)?;
        println!("mode {level}: [{:.4}, {:.4}] (estimate {:.4}, truth {:.4})", ci.lower, ci.upper, ci.estimate, truth.mode());
    }

    let p = logconcave_intervals(&fit, 0.6, 0.05, &table)?;
    println!("density at 0.6: [{:.4}, {:.4}] (truth {:.4})", p.value.lower, p.value.upper, truth.pdf(0.6));
    Ok(())
}
