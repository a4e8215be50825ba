//! Known truths used by the simulation drivers.
//!
//! Each family parses from and prints to a compact spec such as `quadratic(12,0.5)` or
//! `beta(2,3)`, so configuration files and table metadata round-trip.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Beta, Distribution, Exp, Gamma, Weibull};
use statrs::distribution::{Continuous, ContinuousCDF};
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

/// Standard normal draw by inversion of one uniform on the open unit interval.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u = ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

fn parse_call(s: &str) -> Result<(String, Vec<f64>)> {
    let s = s.trim();
    let bad = || Error::Config(format!("cannot parse truth spec {s:?}"));
    let (name, args) = match s.find('(') {
        Some(i) => {
            let inner = s[i + 1..].strip_suffix(')').ok_or_else(bad)?;
            let args = if inner.trim().is_empty() {
                Vec::new()
            } else {
                inner
                    .split(',')
                    .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
                    .collect::<Result<Vec<_>>>()?
            };
            (&s[..i], args)
        }
        None => (s, Vec::new()),
    };
    if args.iter().any(|a| !a.is_finite()) {
        return Err(bad());
    }
    Ok((name.trim().to_ascii_lowercase(), args))
}

fn arity(name: &str, args: &[f64], k: usize) -> Result<()> {
    if args.len() == k {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} takes {k} parameters, got {}", args.len())))
    }
}

/// Convex regression functions on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegressionTruth {
    /// `c (x - m)^2`
    Quadratic { c: f64, m: f64 },
    /// `s - s sqrt(1 - (x - m)^2)`
    CircleArc { s: f64, m: f64 },
    /// `x + 2 / (x + 1)`
    Rational,
}

impl RegressionTruth {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Self::Quadratic { c, m } => c * (x - m).powi(2),
            Self::CircleArc { s, m } => s - s * (1.0 - (x - m).powi(2)).sqrt(),
            Self::Rational => x + 2.0 / (x + 1.0),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Self::Quadratic { c, m } => 2.0 * c * (x - m),
            Self::CircleArc { s, m } => s * (x - m) / (1.0 - (x - m).powi(2)).sqrt(),
            Self::Rational => 1.0 - 2.0 / (x + 1.0).powi(2),
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match *self {
            Self::Quadratic { c, .. } => 2.0 * c,
            Self::CircleArc { s, m } => s / (1.0 - (x - m).powi(2)).powf(1.5),
            Self::Rational => 4.0 / (x + 1.0).powi(3),
        }
    }

    /// Minimiser over `[0, 1]`.
    pub fn anti_mode(&self) -> f64 {
        match *self {
            Self::Quadratic { m, .. } | Self::CircleArc { m, .. } => m.clamp(0.0, 1.0),
            Self::Rational => std::f64::consts::SQRT_2 - 1.0,
        }
    }
}

impl FromStr for RegressionTruth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, a) = parse_call(s)?;
        let t = match name.as_str() {
            "quadratic" => {
                arity(&name, &a, 2)?;
                Self::Quadratic { c: a[0], m: a[1] }
            }
            "circle-arc" => {
                arity(&name, &a, 2)?;
                Self::CircleArc { s: a[0], m: a[1] }
            }
            "rational" => {
                arity(&name, &a, 0)?;
                Self::Rational
            }
            _ => return Err(Error::Config(format!("unknown regression truth {name:?}"))),
        };
        match t {
            Self::Quadratic { c, .. } if c <= 0.0 => {
                Err(Error::Config("quadratic needs c > 0".into()))
            }
            Self::CircleArc { s, m } if s <= 0.0 || !(0.0..=1.0).contains(&m) => {
                Err(Error::Config("circle-arc needs s > 0 and centre in [0, 1]".into()))
            }
            t => Ok(t),
        }
    }
}

impl fmt::Display for RegressionTruth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Quadratic { c, m } => write!(f, "quadratic({c},{m})"),
            Self::CircleArc { s, m } => write!(f, "circle-arc({s},{m})"),
            Self::Rational => f.write_str("rational"),
        }
    }
}

/// Densities for the log-concave and convex nonincreasing models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityTruth {
    Beta { a: f64, b: f64 },
    /// Shape `k`, scale `theta`.
    Gamma { k: f64, theta: f64 },
    ChiSquared { k: f64 },
    /// Shape `k`, scale `lambda`.
    Weibull { k: f64, lambda: f64 },
    Normal { mean: f64, sd: f64 },
    Exponential { rate: f64 },
}

impl DensityTruth {
    fn gamma_params(&self) -> Option<(f64, f64)> {
        match *self {
            Self::Gamma { k, theta } => Some((k, theta)),
            Self::ChiSquared { k } => Some((k / 2.0, 2.0)),
            _ => None,
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            Self::Beta { .. } => (0.0, 1.0),
            Self::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            _ => (0.0, f64::INFINITY),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(lo..=hi).contains(&x) {
            return 0.0;
        }
        if let Some((k, theta)) = self.gamma_params() {
            return statrs::distribution::Gamma::new(k, 1.0 / theta).expect("validated").pdf(x);
        }
        match *self {
            Self::Beta { a, b } => statrs::distribution::Beta::new(a, b).expect("validated").pdf(x),
            Self::Weibull { k, lambda } => {
                statrs::distribution::Weibull::new(k, lambda).expect("validated").pdf(x)
            }
            Self::Normal { mean, sd } => {
                statrs::distribution::Normal::new(mean, sd).expect("validated").pdf(x)
            }
            Self::Exponential { rate } => rate * (-rate * x).exp(),
            Self::Gamma { .. } | Self::ChiSquared { .. } => unreachable!(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if let Some((k, theta)) = self.gamma_params() {
            return statrs::distribution::Gamma::new(k, 1.0 / theta).expect("validated").cdf(x);
        }
        match *self {
            Self::Beta { a, b } => statrs::distribution::Beta::new(a, b).expect("validated").cdf(x),
            Self::Weibull { k, lambda } => {
                statrs::distribution::Weibull::new(k, lambda).expect("validated").cdf(x)
            }
            Self::Normal { mean, sd } => {
                statrs::distribution::Normal::new(mean, sd).expect("validated").cdf(x)
            }
            Self::Exponential { rate } => (1.0 - (-rate * x).exp()).max(0.0),
            Self::Gamma { .. } | Self::ChiSquared { .. } => unreachable!(),
        }
    }

    /// First and second derivatives of `log f`.
    pub fn log_derivatives(&self, x: f64) -> (f64, f64) {
        if let Some((k, theta)) = self.gamma_params() {
            return ((k - 1.0) / x - 1.0 / theta, -(k - 1.0) / (x * x));
        }
        match *self {
            Self::Beta { a, b } => (
                (a - 1.0) / x - (b - 1.0) / (1.0 - x),
                -(a - 1.0) / (x * x) - (b - 1.0) / (1.0 - x).powi(2),
            ),
            Self::Weibull { k, lambda } => {
                let z = (x / lambda).powf(k);
                ((k - 1.0 - k * z) / x, -(k - 1.0) * (1.0 + k * z) / (x * x))
            }
            Self::Normal { mean, sd } => (-(x - mean) / (sd * sd), -1.0 / (sd * sd)),
            Self::Exponential { rate } => (-rate, 0.0),
            Self::Gamma { .. } | Self::ChiSquared { .. } => unreachable!(),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.pdf(x) * self.log_derivatives(x).0
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let (d1, d2) = self.log_derivatives(x);
        self.pdf(x) * (d2 + d1 * d1)
    }

    pub fn mode(&self) -> f64 {
        if let Some((k, theta)) = self.gamma_params() {
            return ((k - 1.0) * theta).max(0.0);
        }
        match *self {
            Self::Beta { a, b } => (a - 1.0) / (a + b - 2.0),
            Self::Weibull { k, lambda } => lambda * ((k - 1.0) / k).powf(1.0 / k),
            Self::Normal { mean, .. } => mean,
            Self::Exponential { .. } => 0.0,
            Self::Gamma { .. } | Self::ChiSquared { .. } => unreachable!(),
        }
    }

    pub fn is_log_concave(&self) -> bool {
        match *self {
            Self::Beta { a, b } => a >= 1.0 && b >= 1.0,
            Self::Weibull { k, .. } => k >= 1.0,
            Self::Normal { .. } | Self::Exponential { .. } => true,
            _ => self.gamma_params().is_some_and(|(k, _)| k >= 1.0),
        }
    }

    /// Convex and nonincreasing on `[0, inf)`.
    pub fn is_convex_decreasing(&self) -> bool {
        match *self {
            Self::Exponential { .. } => true,
            Self::Beta { a, b } => a == 1.0 && (b == 1.0 || b >= 2.0),
            Self::Weibull { k, .. } => k <= 1.0,
            _ => self.gamma_params().is_some_and(|(k, _)| k <= 1.0),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        match *self {
            Self::Beta { a, b } => {
                let d = Beta::new(a, b).expect("validated");
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Self::Gamma { .. } | Self::ChiSquared { .. } => {
                let (k, theta) = self.gamma_params().expect("gamma family");
                let d = Gamma::new(k, theta).expect("validated");
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Self::Weibull { k, lambda } => {
                let d = Weibull::new(lambda, k).expect("validated");
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Self::Normal { mean, sd } => (0..n).map(|_| mean + sd * standard_normal(rng)).collect(),
            Self::Exponential { rate } => {
                let d = Exp::new(rate).expect("validated");
                (0..n).map(|_| d.sample(rng)).collect()
            }
        }
    }
}

impl FromStr for DensityTruth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, a) = parse_call(s)?;
        let t = match name.as_str() {
            "beta" => {
                arity(&name, &a, 2)?;
                Self::Beta { a: a[0], b: a[1] }
            }
            "gamma" => {
                arity(&name, &a, 2)?;
                Self::Gamma { k: a[0], theta: a[1] }
            }
            "chisq" => {
                arity(&name, &a, 1)?;
                Self::ChiSquared { k: a[0] }
            }
            "weibull" => {
                arity(&name, &a, 2)?;
                Self::Weibull { k: a[0], lambda: a[1] }
            }
            "normal" => {
                arity(&name, &a, 2)?;
                Self::Normal { mean: a[0], sd: a[1] }
            }
            "exponential" => {
                arity(&name, &a, 1)?;
                Self::Exponential { rate: a[0] }
            }
            _ => return Err(Error::Config(format!("unknown density truth {name:?}"))),
        };
        let positive = match t {
            Self::Normal { sd, .. } => sd > 0.0,
            _ => a.iter().all(|&v| v > 0.0),
        };
        if positive {
            Ok(t)
        } else {
            Err(Error::Config(format!("{name} needs positive parameters")))
        }
    }
}

impl fmt::Display for DensityTruth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Beta { a, b } => write!(f, "beta({a},{b})"),
            Self::Gamma { k, theta } => write!(f, "gamma({k},{theta})"),
            Self::ChiSquared { k } => write!(f, "chisq({k})"),
            Self::Weibull { k, lambda } => write!(f, "weibull({k},{lambda})"),
            Self::Normal { mean, sd } => write!(f, "normal({mean},{sd})"),
            Self::Exponential { rate } => write!(f, "exponential({rate})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> (f64, f64) {
        let h = 1e-4;
        (
            (f(x + h) - f(x - h)) / (2.0 * h),
            (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h),
        )
    }

    #[test]
    fn regression_derivatives_match_differences() {
        for spec in ["quadratic(12,0.5)", "circle-arc(20,0.5)", "rational", "quadratic(6,0.2)"] {
            let t: RegressionTruth = spec.parse().unwrap();
            assert_eq!(t.to_string(), spec);
            for x in [0.1, 0.37, 0.5, 0.8] {
                let (d1, d2) = fd(|s| t.value(s), x);
                assert!((d1 - t.derivative(x)).abs() < 1e-6, "{spec} {x}");
                assert!((d2 - t.second_derivative(x)).abs() < 1e-4, "{spec} {x}");
            }
            assert!(t.derivative(t.anti_mode()).abs() < 1e-12);
        }
    }

    #[test]
    fn density_derivatives_match_differences() {
        for spec in ["beta(2,3)", "gamma(3,1)", "chisq(4)", "weibull(1.5,1)", "normal(0,1)", "exponential(2)"] {
            let t: DensityTruth = spec.parse().unwrap();
            assert_eq!(t.to_string(), spec);
            for x in [0.3, 0.5, 0.7] {
                let (d1, d2) = fd(|s| t.pdf(s), x);
                assert!((d1 - t.derivative(x)).abs() < 1e-6, "{spec} {x}");
                assert!((d2 - t.second_derivative(x)).abs() < 1e-4, "{spec} {x}");
            }
        }
    }

    #[test]
    fn beta23_constants() {
        let t = DensityTruth::Beta { a: 2.0, b: 3.0 };
        assert!((t.pdf(0.5) - 12.0 * 0.5 * 0.25).abs() < 1e-12);
        assert!((t.mode() - 1.0 / 3.0).abs() < 1e-15);
        let phi2 = -1.0 / 0.25 - 2.0 / 0.25;
        assert!((t.log_derivatives(0.5).1 - phi2).abs() < 1e-12);
        assert!(t.derivative(t.mode()).abs() < 1e-12);
    }

    #[test]
    fn modes_are_stationary() {
        for spec in ["gamma(3,1)", "chisq(4)", "weibull(1.5,1)", "normal(0,1)"] {
            let t: DensityTruth = spec.parse().unwrap();
            assert!(t.derivative(t.mode()).abs() < 1e-12, "{spec}");
            assert!(t.is_log_concave());
        }
        assert!(DensityTruth::Exponential { rate: 1.0 }.is_convex_decreasing());
    }

    #[test]
    fn sample_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = DensityTruth::Beta { a: 2.0, b: 3.0 };
        let s = t.sample(&mut rng, 20000);
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        assert!((mean - 0.4).abs() < 0.01);
        let z: Vec<f64> = (0..20000).map(|_| standard_normal(&mut rng)).collect();
        let m = z.iter().sum::<f64>() / z.len() as f64;
        let v = z.iter().map(|x| (x - m).powi(2)).sum::<f64>() / z.len() as f64;
        assert!(m.abs() < 0.03 && (v - 1.0).abs() < 0.05);
    }

    #[test]
    fn bad_specs() {
        assert!("quadratic(1)".parse::<RegressionTruth>().is_err());
        assert!("quadratic(-1,0.5)".parse::<RegressionTruth>().is_err());
        assert!("cubic(1,2)".parse::<RegressionTruth>().is_err());
        assert!("beta(0,3)".parse::<DensityTruth>().is_err());
        assert!("beta(2,3".parse::<DensityTruth>().is_err());
    }
}
