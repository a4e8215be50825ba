//! Confidence intervals built from the maximal linear piece of a fit.
//!
//! Every interval is `estimate ± half_width` followed by an optional intersection with a
//! model domain. The value and derivative intervals of all models go through the same
//! arithmetic, so [`ci_generic`] with the model's scale reproduces the specialised builders
//! exactly.

use serde::{Deserialize, Serialize};

use crate::convex_lse::RegressionData;
use crate::density::LogConcaveFit;
use crate::error::{Error, Result};
use crate::pwl::{LinearPiece, ModeBracket, PiecewiseLinearFunction};
use crate::tables::{CriticalValueTable, Statistic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Value,
    Derivative,
    Mode,
}

impl Target {
    pub const ALL: [Target; 3] = [Target::Value, Target::Derivative, Target::Mode];

    /// Absolute pivotal statistic whose upper quantile calibrates this target.
    pub fn statistic(self) -> Statistic {
        match self {
            Target::Value => Statistic::AbsL0,
            Target::Derivative => Statistic::AbsL1,
            Target::Mode => Statistic::AbsM,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Target::Value => "value",
            Target::Derivative => "derivative",
            Target::Mode => "mode",
        }
    }
}

impl std::str::FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Target::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown target {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub target: Target,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub clamped: bool,
    /// The linear piece, or the mode bracket, that normalised the interval.
    pub piece: Span,
}

impl ConfidenceInterval {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn covers(&self, t: f64) -> bool {
        self.lower <= t && t <= self.upper
    }
}

/// White-noise scale `a`; zero is allowed and yields a degenerate interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuisanceScale(f64);

impl NuisanceScale {
    pub fn new(a: f64) -> Result<Self> {
        if a.is_finite() && a >= 0.0 {
            Ok(Self(a))
        } else {
            Err(Error::InvalidInput(format!("nuisance scale must be finite and >= 0, got {a}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Set the interval is intersected with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Real,
    NonNegative,
    Interval(f64, f64),
}

impl Domain {
    fn bounds(self) -> (f64, f64) {
        match self {
            Domain::Real => (f64::NEG_INFINITY, f64::INFINITY),
            Domain::NonNegative => (0.0, f64::INFINITY),
            Domain::Interval(lo, hi) => (lo, hi),
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLevel(delta))
    }
}

fn build(
    target: Target,
    x0: Option<f64>,
    estimate: f64,
    half: f64,
    delta: f64,
    domain: Domain,
    piece: Span,
) -> ConfidenceInterval {
    let (lo, hi) = domain.bounds();
    let (raw_l, raw_u) = (estimate - half, estimate + half);
    let (lower, upper) = (raw_l.max(lo), raw_u.min(hi));
    ConfidenceInterval {
        target,
        x0,
        estimate,
        lower,
        upper: upper.max(lower),
        level: 1.0 - delta,
        clamped: lower != raw_l || upper != raw_u,
        piece,
    }
}

fn piece_width(piece: &LinearPiece, x0: f64) -> Result<f64> {
    let w = piece.width();
    if !(w > 0.0) {
        return Err(Error::ZeroWidthPiece(x0));
    }
    let slack = 1e-12 * w.max(x0.abs());
    if x0 < piece.u_hat - slack || x0 > piece.v_hat + slack {
        return Err(Error::OutOfRange {
            t: x0,
            lo: piece.u_hat,
            hi: piece.v_hat,
        });
    }
    Ok(w)
}

#[allow(clippy::too_many_arguments)]
fn local_interval(
    target: Target,
    estimate: f64,
    piece: &LinearPiece,
    x0: f64,
    n: usize,
    scale: NuisanceScale,
    delta: f64,
    table: &CriticalValueTable,
    domain: Domain,
) -> Result<ConfidenceInterval> {
    check_delta(delta)?;
    let w = piece_width(piece, x0)?;
    let c = table.quantile(target.statistic(), delta)?;
    let norm = match target {
        Target::Value => (n as f64 * w).sqrt(),
        Target::Derivative => (n as f64 * w.powi(3)).sqrt(),
        Target::Mode => unreachable!("mode intervals are bracket based"),
    };
    let span = Span {
        u: piece.u_hat,
        v: piece.v_hat,
    };
    Ok(build(target, Some(x0), estimate, scale.get() * c / norm, delta, domain, span))
}

/// First-difference variance estimate `sum (Y_{i+1} - Y_i)^2 / (2(n-1))`, square-rooted.
pub fn estimate_sigma(data: &RegressionData) -> Result<f64> {
    let y = data.y();
    if y.len() < 2 {
        return Err(Error::TooFewPoints {
            required: 2,
            got: y.len(),
        });
    }
    let ss: f64 = y.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok((ss / (2.0 * (y.len() - 1) as f64)).sqrt())
}

/// `f(x0) ± a c / sqrt(n (v - u))` for a regression fit.
pub fn ci_value(
    fit: &PiecewiseLinearFunction,
    piece: &LinearPiece,
    x0: f64,
    n: usize,
    scale: NuisanceScale,
    delta: f64,
    table: &CriticalValueTable,
) -> Result<ConfidenceInterval> {
    let est = fit.evaluate(x0)?;
    local_interval(Target::Value, est, piece, x0, n, scale, delta, table, Domain::Real)
}

/// `slope ± a c / sqrt(n (v - u)^3)` for a regression fit.
pub fn ci_derivative(
    piece: &LinearPiece,
    x0: f64,
    n: usize,
    scale: NuisanceScale,
    delta: f64,
    table: &CriticalValueTable,
) -> Result<ConfidenceInterval> {
    local_interval(Target::Derivative, piece.slope, piece, x0, n, scale, delta, table, Domain::Real)
}

/// `m ± c (v_m - u_m)`; needs no scale estimate.
pub fn ci_mode(
    bracket: &ModeBracket,
    delta: f64,
    table: &CriticalValueTable,
    domain: Domain,
) -> Result<ConfidenceInterval> {
    check_delta(delta)?;
    let w = bracket.width();
    if !(w > 0.0) {
        return Err(Error::ZeroWidthPiece(bracket.m_hat));
    }
    let c = table.quantile(Statistic::AbsM, delta)?;
    let span = Span {
        u: bracket.u_m,
        v: bracket.v_m,
    };
    Ok(build(Target::Mode, None, bracket.m_hat, c * w, delta, domain, span))
}

/// Value and derivative intervals from externally supplied estimates and geometry.
#[allow(clippy::too_many_arguments)]
pub fn ci_generic(
    estimates: (f64, f64),
    piece: &LinearPiece,
    x0: f64,
    n: usize,
    scale: NuisanceScale,
    delta: f64,
    table: &CriticalValueTable,
    value_domain: Domain,
) -> Result<(ConfidenceInterval, ConfidenceInterval)> {
    let value = local_interval(
        Target::Value,
        estimates.0,
        piece,
        x0,
        n,
        scale,
        delta,
        table,
        value_domain,
    )?;
    let deriv = local_interval(
        Target::Derivative,
        estimates.1,
        piece,
        x0,
        n,
        scale,
        delta,
        table,
        Domain::Real,
    )?;
    Ok((value, deriv))
}

/// `sigma * sqrt(n (v - u) / k)` with `k` the number of design points in the piece.
pub fn nuisance_a_random_design(x: &[f64], piece: &LinearPiece, sigma: f64) -> Result<NuisanceScale> {
    let k = x.iter().filter(|&&t| piece.u_hat <= t && t <= piece.v_hat).count();
    if k == 0 {
        return Err(Error::EmptyPiece {
            u: piece.u_hat,
            v: piece.v_hat,
        });
    }
    NuisanceScale::new(sigma * (x.len() as f64 * piece.width() / k as f64).sqrt())
}

/// `sqrt(f(x0))` for a log-concave fit.
pub fn nuisance_logconcave(fit: &LogConcaveFit, x0: f64) -> Result<NuisanceScale> {
    let (lo, hi) = fit.support();
    if !(lo..=hi).contains(&x0) {
        return Err(Error::OutOfRange { t: x0, lo, hi });
    }
    NuisanceScale::new(fit.density(x0).sqrt())
}

/// `sqrt(h(x0) / (1 - F_n(x0)))` for hazard estimates.
pub fn nuisance_hazard(hazard: f64, ecdf: f64) -> Result<NuisanceScale> {
    if !(0.0..1.0).contains(&ecdf) {
        return Err(Error::InvalidInput(format!("ecdf value must lie in [0, 1), got {ecdf}")));
    }
    NuisanceScale::new((hazard / (1.0 - ecdf)).sqrt())
}

/// `sqrt(g(x0)) / k(0)` for deconvolution estimates.
pub fn nuisance_deconvolution(g: f64, k0: f64) -> Result<NuisanceScale> {
    if !(k0 > 0.0) {
        return Err(Error::InvalidInput(format!("kernel value k(0) must be positive, got {k0}")));
    }
    NuisanceScale::new(g.sqrt() / k0)
}

/// Value and derivative intervals at one point together with the piece used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointIntervals {
    pub piece: LinearPiece,
    pub value: ConfidenceInterval,
    pub derivative: ConfidenceInterval,
}

pub fn regression_intervals(
    fit: &PiecewiseLinearFunction,
    x0: f64,
    n: usize,
    scale: NuisanceScale,
    delta: f64,
    table: &CriticalValueTable,
) -> Result<PointIntervals> {
    let piece = fit.linear_piece_containing(x0, fit.kink_tolerance())?;
    Ok(PointIntervals {
        piece,
        value: ci_value(fit, &piece, x0, n, scale, delta, table)?,
        derivative: ci_derivative(&piece, x0, n, scale, delta, table)?,
    })
}

/// Anti-mode interval of a regression fit, kept inside the design range.
pub fn regression_mode_interval(
    fit: &PiecewiseLinearFunction,
    delta: f64,
    table: &CriticalValueTable,
) -> Result<ConfidenceInterval> {
    let (lo, hi) = fit.domain();
    ci_mode(&fit.mode_bracket(fit.kink_tolerance()), delta, table, Domain::Interval(lo, hi))
}

/// Density intervals with the piece taken from the log-density.
pub fn logconcave_intervals(
    fit: &LogConcaveFit,
    x0: f64,
    delta: f64,
    table: &CriticalValueTable,
) -> Result<PointIntervals> {
    let scale = nuisance_logconcave(fit, x0)?;
    let phi = fit.phi();
    let piece = phi.linear_piece_containing(x0, phi.kink_tolerance())?;
    let f = fit.density(x0);
    let (value, derivative) = ci_generic(
        (f, f * piece.slope),
        &piece,
        x0,
        fit.n(),
        scale,
        delta,
        table,
        Domain::NonNegative,
    )?;
    Ok(PointIntervals {
        piece,
        value,
        derivative,
    })
}

pub fn logconcave_mode_interval(
    fit: &LogConcaveFit,
    delta: f64,
    table: &CriticalValueTable,
) -> Result<ConfidenceInterval> {
    ci_mode(&fit.mode_bracket(), delta, table, Domain::Real)
}

/// Density intervals for a convex nonincreasing fit, with `a = sqrt(f(x0))`.
pub fn convex_density_intervals(
    fit: &PiecewiseLinearFunction,
    n: usize,
    x0: f64,
    delta: f64,
    table: &CriticalValueTable,
) -> Result<PointIntervals> {
    let f = fit.evaluate(x0)?;
    let piece = fit.linear_piece_containing(x0, fit.kink_tolerance())?;
    let scale = NuisanceScale::new(f.max(0.0).sqrt())?;
    let (value, derivative) = ci_generic(
        (f, piece.slope),
        &piece,
        x0,
        n,
        scale,
        delta,
        table,
        Domain::NonNegative,
    )?;
    Ok(PointIntervals {
        piece,
        value,
        derivative,
    })
}
