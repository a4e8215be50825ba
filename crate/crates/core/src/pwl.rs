//! Piecewise-linear functions and the geometry the interval builders read off them:
//! kinks, the maximal linear piece around a point, the (anti-)mode and its bracket.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the shape check performed when a function is built.
pub const SLOPE_TOLERANCE: f64 = 1e-7;

/// Relative tolerance used by [`PiecewiseLinearFunction::kink_tolerance`].
pub const KINK_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Convex,
    Concave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A continuous piecewise-linear function stored by its values at strictly increasing knots.
///
/// Between knots the function is the linear interpolant; outside `[knots[0], knots[last]]`
/// it is undefined and evaluation returns [`Error::OutOfRange`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinearFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
    shape: Shape,
}

/// Maximal interval `[u_hat, v_hat]` on which a fit is affine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPiece {
    pub u_hat: f64,
    pub v_hat: f64,
    pub slope: f64,
    pub intercept: f64,
    /// The query point was itself a kink and the piece was chosen by the tie rule.
    pub at_kink: bool,
}

impl LinearPiece {
    pub fn width(&self) -> f64 {
        self.v_hat - self.u_hat
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.intercept + self.slope * t
    }
}

/// (Anti-)mode of a fit together with the nearest kinks on either side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeBracket {
    pub m_hat: f64,
    pub u_m: f64,
    pub v_m: f64,
}

impl ModeBracket {
    pub fn width(&self) -> f64 {
        self.v_m - self.u_m
    }
}

impl PiecewiseLinearFunction {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, shape: Shape) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "{} knots but {} values",
                knots.len(),
                values.len()
            )));
        }
        if knots.len() < 2 {
            return Err(Error::TooFewPoints {
                required: 2,
                got: knots.len(),
            });
        }
        for (i, (k, v)) in knots.iter().zip(&values).enumerate() {
            if !k.is_finite() || !v.is_finite() {
                return Err(Error::NonFinite(i));
            }
        }
        if let Some(i) = knots.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NotIncreasing(i + 1));
        }
        let f = Self {
            knots,
            values,
            shape,
        };
        let slopes = f.slopes();
        let tol = SLOPE_TOLERANCE * (max_abs(&slopes) + 1.0);
        for (i, w) in slopes.windows(2).enumerate() {
            let change = w[1] - w[0];
            let bad = match shape {
                Shape::Convex => change < -tol,
                Shape::Concave => change > tol,
            };
            if bad {
                return Err(Error::InvalidInput(format!(
                    "slope change {change:e} at knot {} violates {shape:?} shape",
                    i + 1
                )));
            }
        }
        Ok(f)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// Slopes of the segments between consecutive knots.
    pub fn slopes(&self) -> Vec<f64> {
        self.knots
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(k, v)| (v[1] - v[0]) / (k[1] - k[0]))
            .collect()
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        if t.is_nan() || t < lo || t > hi {
            return Err(Error::OutOfRange { t, lo, hi });
        }
        Ok(())
    }

    /// Linear interpolation; exact at knots.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        match self.knots.binary_search_by(|k| k.total_cmp(&t)) {
            Ok(i) => Ok(self.values[i]),
            Err(j) => {
                let (k0, k1) = (self.knots[j - 1], self.knots[j]);
                let (v0, v1) = (self.values[j - 1], self.values[j]);
                let w = (t - k0) / (k1 - k0);
                Ok(v0 + w * (v1 - v0))
            }
        }
    }

    /// Slope of the segment adjacent to `t` on the requested side.
    pub fn one_sided_derivative(&self, t: f64, side: Side) -> Result<f64> {
        self.check_domain(t)?;
        let last = self.knots.len() - 1;
        let segment = match self.knots.binary_search_by(|k| k.total_cmp(&t)) {
            Ok(i) => match side {
                Side::Left if i == 0 => return Err(Error::SideUnavailable("left")),
                Side::Left => i - 1,
                Side::Right if i == last => return Err(Error::SideUnavailable("right")),
                Side::Right => i,
            },
            Err(j) => j - 1,
        };
        let dk = self.knots[segment + 1] - self.knots[segment];
        Ok((self.values[segment + 1] - self.values[segment]) / dk)
    }

    /// Default kink threshold: `1e-8 * (max |slope| + 1)`.
    pub fn kink_tolerance(&self) -> f64 {
        KINK_TOLERANCE * (max_abs(&self.slopes()) + 1.0)
    }

    /// Indices of knots that are kinks: both boundary knots plus every interior knot whose
    /// slope change exceeds `tol` in absolute value and the rounding noise of the stored
    /// values across very short segments.
    pub fn kink_indices(&self, tol: f64) -> Vec<usize> {
        let slopes = self.slopes();
        let (k, v) = (&self.knots, &self.values);
        let last = k.len() - 1;
        let mut out = Vec::with_capacity(8);
        out.push(0);
        for i in 1..last {
            let noise = 16.0
                * f64::EPSILON
                * ((v[i - 1].abs() + v[i].abs()) / (k[i] - k[i - 1])
                    + (v[i].abs() + v[i + 1].abs()) / (k[i + 1] - k[i]));
            if (slopes[i] - slopes[i - 1]).abs() > tol.max(noise) {
                out.push(i);
            }
        }
        out.push(last);
        out
    }

    pub fn kinks(&self, tol: f64) -> Vec<f64> {
        self.kink_indices(tol)
            .into_iter()
            .map(|i| self.knots[i])
            .collect()
    }

    /// Maximal linear piece containing `x0`.
    ///
    /// When `x0` is itself a kink the longer adjacent piece is returned, the right one on an
    /// exact tie, and `at_kink` is set.
    pub fn linear_piece_containing(&self, x0: f64, tol: f64) -> Result<LinearPiece> {
        self.check_domain(x0)?;
        let kinks = self.kink_indices(tol);
        let kx: Vec<f64> = kinks.iter().map(|&i| self.knots[i]).collect();
        let (a, b, at_kink) = match kx.binary_search_by(|k| k.total_cmp(&x0)) {
            Ok(0) => (0, 1, true),
            Ok(j) if j == kx.len() - 1 => (j - 1, j, true),
            Ok(j) => {
                let left = kx[j] - kx[j - 1];
                let right = kx[j + 1] - kx[j];
                if left > right {
                    (j - 1, j, true)
                } else {
                    (j, j + 1, true)
                }
            }
            Err(j) => (j - 1, j, false),
        };
        let (iu, iv) = (kinks[a], kinks[b]);
        let (u, v) = (self.knots[iu], self.knots[iv]);
        let slope = (self.values[iv] - self.values[iu]) / (v - u);
        Ok(LinearPiece {
            u_hat: u,
            v_hat: v,
            slope,
            intercept: self.values[iu] - slope * u,
            at_kink,
        })
    }

    fn mode_index(&self) -> usize {
        let tol = self.kink_tolerance();
        let slopes = self.slopes();
        let first = match self.shape {
            Shape::Convex => slopes.iter().position(|&s| s > -tol),
            Shape::Concave => slopes.iter().position(|&s| s < tol),
        };
        first.unwrap_or(self.knots.len() - 1)
    }

    /// Smallest minimizer for a convex function, smallest maximizer for a concave one.
    pub fn anti_mode(&self) -> f64 {
        self.knots[self.mode_index()]
    }

    /// The (anti-)mode with the first kink strictly on each side; a missing side collapses
    /// onto the mode itself.
    pub fn mode_bracket(&self, tol: f64) -> ModeBracket {
        let im = self.mode_index();
        let kinks = self.kink_indices(tol);
        let u = kinks.iter().rev().find(|&&i| i < im).copied().unwrap_or(im);
        let v = kinks.iter().find(|&&i| i > im).copied().unwrap_or(im);
        ModeBracket {
            m_hat: self.knots[im],
            u_m: self.knots[u],
            v_m: self.knots[v],
        }
    }
}

pub(crate) fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}
