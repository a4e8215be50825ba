//! Density estimators from i.i.d. samples: the log-concave MLE and the convex
//! nonincreasing density least-squares estimator.

mod convex_density;
pub mod expint;
mod logconcave;

pub use convex_density::{
    check_convex_density_characterization, convex_density_value, fit_convex_density_lse,
    ConvexDensityCharacterization, ConvexDensityOptions,
};
pub use logconcave::{
    check_logconcave_characterization, fit_log_concave_mle, LogConcaveCharacterization,
    LogConcaveFit, LogConcaveOptions,
};

use crate::error::{Error, Result};

/// Sorted i.i.d. observations.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleData {
    obs: Vec<f64>,
}

impl SampleData {
    /// Sorts the observations; at least two finite values are required.
    pub fn new(mut obs: Vec<f64>) -> Result<Self> {
        if obs.len() < 2 {
            return Err(Error::TooFewPoints {
                required: 2,
                got: obs.len(),
            });
        }
        if let Some(i) = obs.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        obs.sort_by(f64::total_cmp);
        Ok(Self { obs })
    }

    pub fn obs(&self) -> &[f64] {
        &self.obs
    }

    pub fn n(&self) -> usize {
        self.obs.len()
    }

    pub fn min(&self) -> f64 {
        self.obs[0]
    }

    pub fn max(&self) -> f64 {
        self.obs[self.obs.len() - 1]
    }

    /// Errors on the first negative observation.
    pub fn require_nonnegative(&self) -> Result<()> {
        match self.obs.iter().position(|&v| v < 0.0) {
            Some(index) => Err(Error::NegativeObservation {
                index,
                value: self.obs[index],
            }),
            None => Ok(()),
        }
    }

    /// Distinct values with weights `multiplicity / n`.
    pub fn weighted(&self) -> (Vec<f64>, Vec<f64>) {
        let w = 1.0 / self.obs.len() as f64;
        let mut z: Vec<f64> = Vec::with_capacity(self.obs.len());
        let mut wt: Vec<f64> = Vec::with_capacity(self.obs.len());
        for &v in &self.obs {
            if z.last() == Some(&v) {
                *wt.last_mut().unwrap() += w;
            } else {
                z.push(v);
                wt.push(w);
            }
        }
        (z, wt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_collapse_to_weights() {
        let d = SampleData::new(vec![2.0, 1.0, 2.0, 3.0]).unwrap();
        let (z, w) = d.weighted();
        assert_eq!(z, vec![1.0, 2.0, 3.0]);
        assert_eq!(w, vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn validation() {
        assert!(SampleData::new(vec![1.0]).is_err());
        assert!(matches!(
            SampleData::new(vec![1.0, f64::INFINITY]),
            Err(Error::NonFinite(1))
        ));
        let d = SampleData::new(vec![0.5, -0.1]).unwrap();
        assert!(matches!(
            d.require_nonnegative(),
            Err(Error::NegativeObservation { index: 0, .. })
        ));
    }
}
