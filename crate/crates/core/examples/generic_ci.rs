//! Intervals from externally supplied estimates and a user-chosen scale.
//!
//! The random-design regression case needs the local design density, which enters
//! through the scale. A hazard-type estimate uses the same builder with its own scale.

use convex_lne::ci::{ci_generic, estimate_sigma, nuisance_a_random_design, nuisance_hazard};
use convex_lne::sim::{regression_sample, replication_rng, Design};
use convex_lne::truth::RegressionTruth;
use convex_lne::{fit_convex_lse, CriticalValueTable, Domain, LinearPiece, SolverOptions};

fn main() -> convex_lne::Result<()> {
    let table = CriticalValueTable::builtin();
    let truth = RegressionTruth::Quadratic { c: 12.0, m: 0.5 };
    let data = regression_sample(&truth, Design::Uniform, 3000, 0.5, &mut replication_rng(1, 0))?;
    let fit = fit_convex_lse(&data, &SolverOptions::default())?;

    let x0 = 0.7;
    let piece = fit.linear_piece_containing(x0, fit.kink_tolerance())?;
    let scale = nuisance_a_random_design(data.x(), &piece, estimate_sigma(&data)?)?;
    let est = (fit.evaluate(x0)?, piece.slope);
    let (v, d) = ci_generic(est, &piece, x0, data.n(), scale, 0.05, &table, Domain::Real)?;
    println!("random design: f(0.7) in [{:.4}, {:.4}], f'(0.7) in [{:.4}, {:.4}]", v.lower, v.upper, d.lower, d.upper);

    // Monotone hazard estimate at x0 = 1.2, affine on [0.9, 1.6], with F_n(1.2) = 0.55.
    let piece = LinearPiece { u_hat: 0.9, v_hat: 1.6, slope: 0.4, intercept: 0.2, at_kink: false };
    let h = piece.value_at(1.2);
    let (v, d) = ci_generic((h, piece.slope), &piece, 1.2, 800, nuisance_hazard(h, 0.55)?, 0.05, &table, Domain::NonNegative)?;
    println!("hazard: h(1.2) in [{:.4}, {:.4}], h'(1.2) in [{:.4}, {:.4}]", v.lower, v.upper, d.lower, d.upper);
    Ok(())
}
