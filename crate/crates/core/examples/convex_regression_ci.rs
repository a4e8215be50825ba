//! Fit a convex regression and report value, slope and anti-mode intervals.

use convex_lne::ci::{estimate_sigma, regression_intervals, regression_mode_interval};
use convex_lne::convex_lse::{check_lse_characterization, default_characterization_tolerance};
use convex_lne::sim::{regression_sample, replication_rng, Design};
use convex_lne::truth::RegressionTruth;
use convex_lne::{fit_convex_lse, CriticalValueTable, NuisanceScale, SolverOptions};

fn main() -> convex_lne::Result<()> {
    let truth = RegressionTruth::CircleArc { s: 20.0, m: 0.5 };
    let mut rng = replication_rng(7, 0);
    let data = regression_sample(&truth, Design::Fixed, 2000, 1.0, &mut rng)?;

    let fit = fit_convex_lse(&data, &SolverOptions::default())?;
    let cert = check_lse_characterization(&fit, &data, default_characterization_tolerance(&data))?;
    println!("{} kinks, certified: {}", fit.kinks(fit.kink_tolerance()).len(), cert.passed);

    let sigma = estimate_sigma(&data)?;
    println!("sigma_hat = {sigma:.4}");

    let table = CriticalValueTable::builtin();
    let x0 = 0.3;
    let p = regression_intervals(&fit, x0, data.n(), NuisanceScale::new(sigma)?, 0.05, &table)?;
    println!("piece [{:.4}, {:.4}]", p.piece.u_hat, p.piece.v_hat);
    println!("f(0.3):  [{:.4}, {:.4}]  truth {:.4}", p.value.lower, p.value.upper, truth.value(x0));
    println!("f'(0.3): [{:.4}, {:.4}]  truth {:.4}", p.derivative.lower, p.derivative.upper, truth.derivative(x0));

    let m = regression_mode_interval(&fit, 0.05, &table)?;
    println!("anti-mode: [{:.4}, {:.4}]  truth {}", m.lower, m.upper, truth.anti_mode());
    Ok(())
}
