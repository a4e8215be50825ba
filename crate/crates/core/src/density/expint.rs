//! Integrals of `exp` of an affine function over the unit interval, and their partial
//! derivatives with respect to the endpoint values.
//!
//! `J(a, b) = int_0^1 exp((1 - t) a + t b) dt`. Every routine factors out the larger of the
//! two endpoint exponentials so only `exp(d)` with `d <= 0` is ever formed.

const SERIES_RADIUS: f64 = 1.0;

/// `j_k(d) = int_0^1 t^k e^{d t} dt` for `k = 0, 1, 2` and `d <= 0`.
fn moments(d: f64) -> [f64; 3] {
    if d.abs() < SERIES_RADIUS {
        // sum_m d^m / (m! (m + k + 1))
        let mut out = [0.0; 3];
        let mut term = 1.0;
        for m in 0..30 {
            let mf = m as f64;
            out[0] += term / (mf + 1.0);
            out[1] += term / (mf + 2.0);
            out[2] += term / (mf + 3.0);
            term *= d / (mf + 1.0);
        }
        out
    } else {
        let e = d.exp();
        let d2 = d * d;
        [
            d.exp_m1() / d,
            (e * (d - 1.0) + 1.0) / d2,
            (e * (d2 - 2.0 * d + 2.0) - 2.0) / (d2 * d),
        ]
    }
}

/// Value and derivatives of `J` at `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpIntegral {
    pub j: f64,
    /// `int (1 - t) e^{...}`
    pub ja: f64,
    /// `int t e^{...}`
    pub jb: f64,
    pub jaa: f64,
    pub jab: f64,
    pub jbb: f64,
}

impl ExpIntegral {
    pub fn new(a: f64, b: f64) -> Self {
        if b <= a {
            let [m0, m1, m2] = moments(b - a);
            let s = a.exp();
            Self {
                j: s * m0,
                ja: s * (m0 - m1),
                jb: s * m1,
                jaa: s * (m0 - 2.0 * m1 + m2),
                jab: s * (m1 - m2),
                jbb: s * m2,
            }
        } else {
            let r = Self::new(b, a);
            Self {
                j: r.j,
                ja: r.jb,
                jb: r.ja,
                jaa: r.jbb,
                jab: r.jab,
                jbb: r.jaa,
            }
        }
    }
}

pub fn j(a: f64, b: f64) -> f64 {
    ExpIntegral::new(a, b).j
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(f: impl Fn(f64) -> f64) -> f64 {
        // composite Simpson, fine enough for smooth integrands on [0, 1]
        let m = 2000;
        let h = 1.0 / m as f64;
        let mut s = f(0.0) + f(1.0);
        for i in 1..m {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn matches_quadrature_across_regimes() {
        for &(a, b) in &[
            (0.0, 0.0),
            (0.3, 0.3 + 1e-9),
            (1.0, 0.2),
            (-2.0, 3.0),
            (0.5, -0.49),
            (0.0, 0.999),
            (0.0, 1.001),
            (-1.0, -30.0),
        ] {
            let e = ExpIntegral::new(a, b);
            let g = |t: f64| ((1.0 - t) * a + t * b).exp();
            let checks = [
                (e.j, quad(g)),
                (e.ja, quad(|t| (1.0 - t) * g(t))),
                (e.jb, quad(|t| t * g(t))),
                (e.jaa, quad(|t| (1.0 - t) * (1.0 - t) * g(t))),
                (e.jab, quad(|t| t * (1.0 - t) * g(t))),
                (e.jbb, quad(|t| t * t * g(t))),
            ];
            for (got, want) in checks {
                assert!(
                    (got - want).abs() <= 1e-10 * want.abs().max(1.0),
                    "({a},{b}): {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn continuous_across_series_switch() {
        let below = ExpIntegral::new(0.0, -(1.0 - 1e-12));
        let above = ExpIntegral::new(0.0, -(1.0 + 1e-12));
        assert!((below.j - above.j).abs() < 1e-11);
        assert!((below.jbb - above.jbb).abs() < 1e-11);
    }

    #[test]
    fn symmetric_under_swap() {
        let e = ExpIntegral::new(0.7, -1.3);
        let r = ExpIntegral::new(-1.3, 0.7);
        assert_eq!(e.j, r.j);
        assert_eq!(e.ja, r.jb);
        assert_eq!(e.jaa, r.jbb);
    }

    #[test]
    fn no_overflow_for_steep_segments() {
        let e = ExpIntegral::new(-800.0, 5.0);
        assert!(e.j.is_finite() && e.j > 0.0);
        assert!((e.j - 5f64.exp() / 805.0).abs() < 1e-12 * e.j);
    }
}
