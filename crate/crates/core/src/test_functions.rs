//! Smooth test functions on the non-negative half-line, bundled with exact
//! derivative evaluators and certified sup-norms for each derivative order.
//!
//! The certified norms are part of the value, not recomputed on use: bound
//! formulas must be fed exact constants rather than grid estimates.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Family {
    /// cos(ωx); k-th derivative is ω^k cos(ωx + kπ/2), sup-norm ω^k.
    Cosine { omega: f64 },
    /// e^{-x}; every derivative has sup-norm 1.
    DampedExponential,
    /// Logistic sigmoid 1/(1 + e^{-cx}); derivatives are polynomials in the
    /// sigmoid value with integer coefficients.
    Logistic { scale: f64, rows: Vec<Vec<f64>>, norms: Vec<f64> },
    /// Piecewise-quadratic indicator smoothing: 1 below z, a quadratic splice
    /// on [z, z+α], 0 above. Second derivative defined a.e.; the evaluator
    /// returns left-limit values at the knots.
    SmoothIndicator { z: f64, alpha: f64 },
}

/// A test function h with derivative evaluators up to `max_order` and
/// certified sup-norms per order.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    family: Family,
    max_order: usize,
    descriptor: String,
}

const BUILTIN_ORDER: usize = 8;

impl TestFunction {
    pub fn cosine(omega: f64) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::invalid("omega", "must be positive and finite"));
        }
        Ok(TestFunction {
            family: Family::Cosine { omega },
            max_order: BUILTIN_ORDER,
            descriptor: format!("cos:{omega}"),
        })
    }

    pub fn damped_exponential() -> Self {
        TestFunction {
            family: Family::DampedExponential,
            max_order: BUILTIN_ORDER,
            descriptor: "exp".to_string(),
        }
    }

    pub fn logistic(scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::invalid("scale", "must be positive and finite"));
        }
        // Derivatives of σ are polynomials in σ: Dσ^j = j σ^j - j σ^{j+1}.
        // rows[k][j-1] is the coefficient of σ^j in the k-th derivative.
        let mut rows: Vec<Vec<f64>> = vec![vec![1.0]];
        for k in 0..BUILTIN_ORDER {
            let prev = &rows[k];
            let mut next = vec![0.0; prev.len() + 1];
            for (idx, &c) in prev.iter().enumerate() {
                let j = (idx + 1) as f64;
                next[idx] += c * j;
                next[idx + 1] -= c * j;
            }
            rows.push(next);
        }
        let norms = rows
            .iter()
            .enumerate()
            .map(|(k, row)| scale.powi(k as i32) * poly_sup_on_unit(row))
            .collect();
        Ok(TestFunction {
            family: Family::Logistic { scale, rows, norms },
            max_order: BUILTIN_ORDER,
            descriptor: format!("logistic:{scale}"),
        })
    }

    /// The smoothing kernel: 1 for x <= z, quadratic splice on [z, z+α],
    /// 0 for x >= z+α. Certified norms 1, 2/α, 4/α².
    pub fn smooth_indicator(z: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::invalid("alpha", "must be positive and finite"));
        }
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::invalid("z", "must be positive and finite"));
        }
        Ok(TestFunction {
            family: Family::SmoothIndicator { z, alpha },
            max_order: 2,
            descriptor: format!("halpha:{z},{alpha}"),
        })
    }

    /// Parse a CLI descriptor: `cos:OMEGA`, `exp`, `logistic:SCALE`,
    /// `halpha:Z,ALPHA`.
    pub fn parse(desc: &str) -> Result<Self> {
        let bad = || Error::UnknownTestFunction(desc.to_string());
        let (name, args) = match desc.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (desc, None),
        };
        match (name, args) {
            ("exp", None) => Ok(Self::damped_exponential()),
            ("cos", Some(a)) => Self::cosine(a.parse().map_err(|_| bad())?),
            ("logistic", Some(a)) => Self::logistic(a.parse().map_err(|_| bad())?),
            ("halpha", Some(a)) => {
                let (z, alpha) = a.split_once(',').ok_or_else(bad)?;
                Self::smooth_indicator(
                    z.trim().parse().map_err(|_| bad())?,
                    alpha.trim().parse().map_err(|_| bad())?,
                )
            }
            _ => Err(bad()),
        }
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// k-th derivative at x. Panics if `k > max_order`.
    pub fn eval(&self, k: usize, x: f64) -> f64 {
        assert!(
            k <= self.max_order,
            "derivative order {k} exceeds max_order {}",
            self.max_order
        );
        match &self.family {
            Family::Cosine { omega } => {
                omega.powi(k as i32) * (omega * x + k as f64 * std::f64::consts::FRAC_PI_2).cos()
            }
            Family::DampedExponential => {
                let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
                sign * (-x).exp()
            }
            Family::Logistic { scale, rows, .. } => {
                let s = sigmoid(scale * x);
                let mut p = 0.0;
                // Horner in σ from the highest power down.
                for &c in rows[k].iter().rev() {
                    p = p * s + c;
                }
                scale.powi(k as i32) * p * s
            }
            Family::SmoothIndicator { z, alpha } => smooth_indicator_eval(*z, *alpha, k, x),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(0, x)
    }

    /// Certified sup-norm of the k-th derivative, when one is available.
    pub fn certified_norm(&self, k: usize) -> Option<f64> {
        if k > self.max_order {
            return None;
        }
        match &self.family {
            Family::Cosine { omega } => Some(omega.powi(k as i32)),
            Family::DampedExponential => Some(1.0),
            Family::Logistic { norms, .. } => norms.get(k).copied(),
            Family::SmoothIndicator { alpha, .. } => match k {
                0 => Some(1.0),
                1 => Some(2.0 / alpha),
                2 => Some(4.0 / (alpha * alpha)),
                _ => None,
            },
        }
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Max of |Σ c_j σ^j| (j starting at 1) over σ in [0, 1], by dense scan plus
/// local golden-section polish, inflated by one ulp-scale margin so the value
/// certifies every grid estimate of the same polynomial.
fn poly_sup_on_unit(coeffs: &[f64]) -> f64 {
    let eval = |s: f64| {
        let mut p = 0.0;
        for &c in coeffs.iter().rev() {
            p = p * s + c;
        }
        (p * s).abs()
    };
    let n = 4096usize;
    let mut best = 0.0f64;
    let mut besti = 0usize;
    for i in 0..=n {
        let v = eval(i as f64 / n as f64);
        if v > best {
            best = v;
            besti = i;
        }
    }
    let a = ((besti.saturating_sub(1)) as f64) / n as f64;
    let b = ((besti + 1).min(n) as f64) / n as f64;
    #[allow(clippy::excessive_precision)]
    const INV_PHI: f64 = 0.618033988749894848;
    let (mut lo, mut hi) = (a, b);
    for _ in 0..90 {
        let x1 = hi - INV_PHI * (hi - lo);
        let x2 = lo + INV_PHI * (hi - lo);
        if eval(x1) < eval(x2) {
            lo = x1;
        } else {
            hi = x2;
        }
        best = best.max(eval(x1)).max(eval(x2));
    }
    best * (1.0 + 1e-12)
}

fn smooth_indicator_eval(z: f64, alpha: f64, k: usize, x: f64) -> f64 {
    let a2 = alpha * alpha;
    let mid = z + 0.5 * alpha;
    let top = z + alpha;
    match k {
        0 => {
            if x <= z {
                1.0
            } else if x <= mid {
                1.0 - 2.0 * (x - z) * (x - z) / a2
            } else if x <= top {
                2.0 * (x - top) * (x - top) / a2
            } else {
                0.0
            }
        }
        1 => {
            if x <= z {
                0.0
            } else if x <= mid {
                -4.0 * (x - z) / a2
            } else if x <= top {
                4.0 * (x - top) / a2
            } else {
                0.0
            }
        }
        2 => {
            if x <= z {
                0.0
            } else if x <= mid {
                -4.0 / a2
            } else if x <= top {
                4.0 / a2
            } else {
                0.0
            }
        }
        _ => unreachable!("max_order is 2"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{sup_norm_estimate, Interval};
    use rand::{Rng, SeedableRng};

    fn builtins() -> Vec<TestFunction> {
        vec![
            TestFunction::cosine(1.0).unwrap(),
            TestFunction::cosine(2.0).unwrap(),
            TestFunction::damped_exponential(),
            TestFunction::logistic(1.0).unwrap(),
            TestFunction::logistic(1.5).unwrap(),
        ]
    }

    #[test]
    fn certified_norms_builtin() {
        let c = TestFunction::cosine(1.0).unwrap();
        assert_eq!(c.certified_norm(5), Some(1.0));
        let c2 = TestFunction::cosine(2.0).unwrap();
        assert_eq!(c2.certified_norm(2), Some(4.0));
        let e = TestFunction::damped_exponential();
        assert_eq!(e.certified_norm(3), Some(1.0));
    }

    #[test]
    fn derivative_chain_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let step = 1e-4;
        for h in builtins() {
            for _ in 0..100 {
                let x: f64 = rng.gen_range(0.05..12.0);
                for k in 0..h.max_order().min(5) {
                    let fd = (h.eval(k, x + step) - h.eval(k, x - step)) / (2.0 * step);
                    let exact = h.eval(k + 1, x);
                    let tol = 1e-5 * exact.abs().max(1e-2);
                    assert!(
                        (fd - exact).abs() <= tol,
                        "{} k={k} x={x}: fd={fd} exact={exact}",
                        h.descriptor()
                    );
                }
            }
        }
    }

    #[test]
    fn grid_estimates_never_exceed_certified_norms() {
        for h in builtins() {
            for k in 0..=h.max_order().min(6) {
                let cert = h.certified_norm(k).unwrap();
                let est = sup_norm_estimate(
                    |x| h.eval(k, x),
                    Interval::half_line(0.0),
                    512,
                    true,
                )
                .unwrap();
                assert!(
                    est <= cert + 1e-9,
                    "{} order {k}: estimate {est} certified {cert}",
                    h.descriptor()
                );
            }
        }
    }

    #[test]
    fn smooth_indicator_values_and_norms() {
        let z = 2.0;
        let alpha = 1.0;
        let h = TestFunction::smooth_indicator(z, alpha).unwrap();
        assert_eq!(h.value(z), 1.0);
        assert_eq!(h.value(z + alpha), 0.0);
        assert!((h.value(z + alpha / 2.0) - 0.5).abs() < 1e-15);
        assert_eq!(h.certified_norm(0), Some(1.0));
        assert_eq!(h.certified_norm(1), Some(2.0));
        assert_eq!(h.certified_norm(2), Some(4.0));
        let h = TestFunction::smooth_indicator(1.0, 0.25).unwrap();
        assert_eq!(h.certified_norm(1), Some(8.0));
        // left limits at the knots
        assert_eq!(h.eval(2, 1.0), 0.0);
        assert_eq!(h.eval(2, 1.125), -64.0);
        assert_eq!(h.eval(2, 1.25), 64.0);
        assert!(TestFunction::smooth_indicator(1.0, 0.0).is_err());
        assert!(TestFunction::smooth_indicator(1.0, -2.0).is_err());
    }

    #[test]
    fn smooth_indicator_grid_confirms_norms() {
        // alpha = 0.5 pins the second-derivative norm 4/alpha² = 16
        let h = TestFunction::smooth_indicator(1.5, 0.5).unwrap();
        assert_eq!(h.certified_norm(2), Some(16.0));
        let dom = Interval::new(0.0, 3.0).unwrap();
        let est = sup_norm_estimate(|x| h.eval(2, x), dom, 2048, true).unwrap();
        assert!((est - 16.0).abs() < 1e-9);

        for (z, alpha) in [(2.0, 1.0), (1.0, 0.25), (3.0, 2.0)] {
            let h = TestFunction::smooth_indicator(z, alpha).unwrap();
            let dom = Interval::new(0.0, z + alpha + 1.0).unwrap();
            for k in 0..=2 {
                let est = sup_norm_estimate(|x| h.eval(k, x), dom, 2048, true).unwrap();
                let cert = h.certified_norm(k).unwrap();
                assert!(est <= cert + 1e-9);
                assert!(est >= 0.99 * cert, "k={k}: est {est} cert {cert}");
            }
        }
    }

    #[test]
    fn parse_roundtrip() {
        assert_eq!(
            TestFunction::parse("cos:1").unwrap(),
            TestFunction::cosine(1.0).unwrap()
        );
        assert_eq!(
            TestFunction::parse("exp").unwrap(),
            TestFunction::damped_exponential()
        );
        assert_eq!(
            TestFunction::parse("halpha:2,1").unwrap(),
            TestFunction::smooth_indicator(2.0, 1.0).unwrap()
        );
        assert!(TestFunction::parse("weird:1").is_err());
        assert!(TestFunction::parse("cos:abc").is_err());
    }
}
