//! Convex nonincreasing density estimate of exponential data.

use convex_lne::ci::convex_density_intervals;
use convex_lne::density::{check_convex_density_characterization, ConvexDensityCharacterization, ConvexDensityOptions};
use convex_lne::sim::replication_rng;
use convex_lne::truth::DensityTruth;
use convex_lne::{fit_convex_density_lse, CriticalValueTable, SampleData};

fn main() -> convex_lne::Result<()> {
    let truth = DensityTruth::Exponential { rate: 1.0 };
    let data = SampleData::new(truth.sample(&mut replication_rng(5, 0), 2000))?;
    let fit = fit_convex_density_lse(&data, &ConvexDensityOptions::default())?;
    let cert = check_convex_density_characterization(&fit, &data, ConvexDensityCharacterization::default_tolerance(&data))?;
    println!("{} knots, mass residual {:.2e}, certified {}", fit.len(), cert.mass_residual, cert.passed);

    for (t, v) in fit.knots().iter().zip(fit.values()).step_by((fit.len() / 8).max(1)) {
        println!("  f({t:.3}) = {v:.4}");
    }

    let table = CriticalValueTable::builtin();
    let p = convex_density_intervals(&fit, data.n(), 0.5, 0.05, &table)?;
    println!("f(0.5):  [{:.4}, {:.4}] (truth {:.4})", p.value.lower, p.value.upper, truth.pdf(0.5));
    println!("f'(0.5): [{:.4}, {:.4}] (truth {:.4})", p.derivative.lower, p.derivative.upper, truth.derivative(0.5));
    Ok(())
}
