//! Shape-constrained estimation with tuning-free pivotal confidence intervals.
//!
//! Estimators: convex least-squares regression ([`convex_lse`]), the log-concave density
//! MLE and the convex nonincreasing density LSE ([`density`]). Intervals built from the
//! fitted linear pieces live in [`ci`]; critical values come from [`tables`] or are
//! simulated with [`sim`]; [`coverage`] runs end-to-end experiments.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ci;
pub mod cli;
pub mod convex_lse;
pub mod coverage;
pub mod density;
pub mod error;
pub mod pwl;
pub mod sim;
pub mod tables;
pub mod truth;

pub use convex_lse::{
    check_lse_characterization, fit_convex_lse, LseCharacterization, RegressionData,
    SolverOptions,
};
pub use density::{
    fit_convex_density_lse, fit_log_concave_mle, LogConcaveFit, SampleData,
};
pub use error::{Error, Result};
pub use pwl::{LinearPiece, ModeBracket, PiecewiseLinearFunction, Shape, Side};
pub use tables::{CriticalValueTable, Statistic};
pub use ci::{ConfidenceInterval, Domain, NuisanceScale, Target};
