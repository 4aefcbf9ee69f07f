//! Shared numerical kernels: adaptive Gauss-Kronrod quadrature on finite and
//! half-infinite intervals, the log-gamma and regularized incomplete gamma
//! functions, Gauss-Legendre nodes, and grid-based sup-norm estimation.
//!
//! Everything here is pure and re-entrant.

use crate::error::{Error, Result};

/// Result of an adaptive quadrature run.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

/// Integration interval `[lo, hi]`; `hi` may be `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || lo >= hi || hi.is_nan() {
            return Err(Error::invalid(
                "interval",
                format!("need finite lo < hi, got [{lo}, {hi}]"),
            ));
        }
        Ok(Interval { lo, hi })
    }

    /// The half-line `[lo, +inf)`.
    pub fn half_line(lo: f64) -> Self {
        Interval {
            lo,
            hi: f64::INFINITY,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_infinite(&self) -> bool {
        self.hi.is_infinite()
    }
}

/// Tuning knobs for [`integrate_opts`].
#[derive(Debug, Clone)]
pub struct QuadOptions {
    pub rel_tol: f64,
    /// Absolute floor below which the error target does not shrink.
    pub abs_floor: f64,
    pub max_segments: usize,
    /// Length scale of the substitution `x = lo + scale * t/(1-t)` used for
    /// the infinite tail segment.
    pub scale: f64,
    /// Interior points at which the domain is pre-split before refinement.
    pub breakpoints: Vec<f64>,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            rel_tol: 1e-12,
            abs_floor: 1e-14,
            max_segments: 4000,
            scale: 1.0,
            breakpoints: Vec::new(),
        }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        QuadOptions {
            rel_tol,
            ..Self::default()
        }
    }
}

// 15-point Kronrod nodes with the embedded 7-point Gauss rule (positive
// abscissae; the rule is symmetric).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss-Kronrod 15 pass over `[a, b]`. Returns (value, error estimate).
fn qk15(f: &mut dyn FnMut(f64) -> Result<f64>, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center)?;
    let mut result_gauss = WG[3] * fc;
    let mut result_kronrod = WGK[7] * fc;
    let mut fv = [0.0; 15];
    fv[7] = fc;

    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv[j] = f1;
        fv[14 - j] = f2;
        result_kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            result_gauss += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = result_kronrod * 0.5;
    let mut resasc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv[j] - mean).abs() + (fv[14 - j] - mean).abs());
    }
    resasc *= half.abs();

    let value = result_kronrod * half;
    let raw_err = ((result_kronrod - result_gauss) * half).abs();
    // QUADPACK-style error rescaling.
    let err = if resasc != 0.0 && raw_err != 0.0 {
        resasc * (200.0 * raw_err / resasc).powf(1.5).min(1.0)
    } else {
        raw_err
    };
    Ok((value, err))
}

#[derive(Debug, Clone, Copy)]
enum SegmentMap {
    /// Plain segment in x-space.
    Plain,
    /// Segment in t-space with x = lo + scale * t/(1-t).
    Tail { lo: f64, scale: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    map: SegmentMap,
    value: f64,
    error: f64,
}

fn eval_segment(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    b: f64,
    map: SegmentMap,
    evals: &mut usize,
) -> Result<Segment> {
    let mut g = |t: f64| -> Result<f64> {
        *evals += 1;
        let y = match map {
            SegmentMap::Plain => f(t),
            SegmentMap::Tail { lo, scale } => {
                let om = 1.0 - t;
                let x = lo + scale * t / om;
                f(x) * scale / (om * om)
            }
        };
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFiniteIntegrand { x: t })
        }
    };
    let (value, error) = qk15(&mut g, a, b)?;
    Ok(Segment {
        a,
        b,
        map,
        value,
        error,
    })
}

/// Adaptive integral of `f` over `domain`, with an infinite upper limit
/// handled by the monotone substitution `x = lo + scale * t/(1-t)`.
///
/// The returned error estimate satisfies
/// `abs_error <= max(rel_tol * |value|, abs_floor)` on success; otherwise a
/// [`Error::QuadratureFailed`] carries the best estimate reached.
pub fn integrate_opts(
    mut f: impl FnMut(f64) -> f64,
    domain: Interval,
    opts: &QuadOptions,
) -> Result<QuadratureResult> {
    let mut evals = 0usize;
    let mut segs: Vec<Segment> = Vec::new();

    // Pre-split at user breakpoints inside the domain.
    let mut cuts: Vec<f64> = opts
        .breakpoints
        .iter()
        .copied()
        .filter(|&x| x > domain.lo && x < domain.hi && x.is_finite())
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut lo = domain.lo;
    for &c in &cuts {
        segs.push(eval_segment(&mut f, lo, c, SegmentMap::Plain, &mut evals)?);
        lo = c;
    }
    if domain.is_infinite() {
        let map = SegmentMap::Tail {
            lo,
            scale: opts.scale,
        };
        segs.push(eval_segment(&mut f, 0.0, 1.0, map, &mut evals)?);
    } else {
        segs.push(eval_segment(
            &mut f,
            lo,
            domain.hi,
            SegmentMap::Plain,
            &mut evals,
        )?);
    }

    loop {
        let total: f64 = segs.iter().map(|s| s.value).sum();
        let err: f64 = segs.iter().map(|s| s.error).sum();
        let target = (opts.rel_tol * total.abs()).max(opts.abs_floor);
        // Never accept the very first pass over a segment list shorter than
        // the breakpoint structure suggests; one refinement round guards
        // against rules that straddle a feature without sampling it.
        if err <= target && segs.len() >= 2 * (cuts.len() + 1) {
            return Ok(QuadratureResult {
                value: total,
                abs_error_estimate: err,
                evaluations: evals,
            });
        }
        if segs.len() >= opts.max_segments {
            return Err(Error::QuadratureFailed {
                estimate: total,
                abs_error: err,
                evaluations: evals,
            });
        }
        // Split the worst segment.
        let (worst, _) = segs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .expect("segment list is non-empty");
        let s = segs.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        if mid <= s.a || mid >= s.b {
            // Interval exhausted at machine precision; keep it and stop
            // counting it as refinable by zeroing its error.
            segs.push(Segment { error: 0.0, ..s });
            continue;
        }
        segs.push(eval_segment(&mut f, s.a, mid, s.map, &mut evals)?);
        segs.push(eval_segment(&mut f, mid, s.b, s.map, &mut evals)?);
    }
}

/// Integral of `f` over `domain` at relative tolerance `rel_tol`.
pub fn integrate_semiaxis(
    f: impl FnMut(f64) -> f64,
    domain: Interval,
    rel_tol: f64,
) -> Result<QuadratureResult> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::invalid("rel_tol", "must lie in (0, 1)"));
    }
    integrate_opts(f, domain, &QuadOptions::with_rel_tol(rel_tol))
}

/// Natural log of the gamma function for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    #[allow(clippy::excessive_precision)]
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    const HALF_LN_2PI: f64 = 0.918938533204672741780329736406;

    if x < 0.5 {
        // Reflection: ln Γ(x) = ln(π / sin(πx)) − ln Γ(1 − x).
        let s = (std::f64::consts::PI * x).sin();
        return std::f64::consts::PI.ln() - s.abs().ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut series = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        series += c / (z + i as f64);
    }
    let t = z + G + 0.5;
    HALF_LN_2PI + (z + 0.5) * t.ln() - t + series.ln()
}

/// ln C(n, k) in the log domain.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Regularized lower incomplete gamma function P(r, x) for r > 0, x >= 0.
///
/// Series branch for x < r + 1, continued fraction for the complement
/// otherwise, both with the prefactor `exp(r ln x - x - ln Γ(r))` kept in the
/// log domain.
pub fn reg_lower_gamma(r: f64, x: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid("shape", format!("must be positive, got {r}")));
    }
    if !(x >= 0.0) {
        return Err(Error::invalid(
            "argument",
            format!("must be non-negative, got {x}"),
        ));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let log_pre = r * x.ln() - x - ln_gamma(r);

    if x < r + 1.0 {
        // P(r,x) = pre * Σ_{k>=0} x^k / (r (r+1) ... (r+k))
        let mut term = 1.0 / r;
        let mut sum = term;
        for k in 1..=700 {
            term *= x / (r + k as f64);
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        Ok((log_pre.exp() * sum).clamp(0.0, 1.0))
    } else {
        // Q(r,x) via Lentz's continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0 - r;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=700 {
            let an = -(i as f64) * (i as f64 - r);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        let q = log_pre.exp() * h;
        Ok((1.0 - q).clamp(0.0, 1.0))
    }
}

/// CDF of the chi-square distribution with `df` degrees of freedom.
pub fn chi_square_cdf(df: f64, z: f64) -> Result<f64> {
    if z <= 0.0 {
        return Ok(0.0);
    }
    reg_lower_gamma(0.5 * df, 0.5 * z)
}

/// Lower bound on `sup |f|` over `domain` from a `grid`-point scan; with
/// `refine` each local maximum is polished by golden-section search.
///
/// Only evaluated points enter the estimate, so the result never exceeds the
/// true supremum. An infinite upper endpoint is truncated to a window that is
/// doubled while the maximum keeps moving toward its edge.
pub fn sup_norm_estimate(
    f: impl Fn(f64) -> f64,
    domain: Interval,
    grid: usize,
    refine: bool,
) -> Result<f64> {
    if grid < 64 {
        return Err(Error::invalid("grid", "need at least 64 points"));
    }
    let lo = domain.lo();
    let mut hi = if domain.is_infinite() {
        lo + 128.0
    } else {
        domain.hi()
    };

    loop {
        let vals = scan_abs(&f, lo, hi, grid)?;
        let (idx, best) = vals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, v)| (i, *v))
            .expect("grid is non-empty");

        // Re-widen a truncated half-line while the max hugs the window edge.
        if domain.is_infinite() && idx >= grid - grid / 16 && hi - lo < 1e6 {
            hi = lo + (hi - lo) * 2.0;
            continue;
        }

        if !refine {
            return Ok(best);
        }
        let step = (hi - lo) / (grid - 1) as f64;
        let mut out = best;
        for (i, &v) in vals.iter().enumerate() {
            let left = if i > 0 { vals[i - 1] } else { f64::NEG_INFINITY };
            let right = if i + 1 < grid {
                vals[i + 1]
            } else {
                f64::NEG_INFINITY
            };
            if v >= left && v >= right {
                let x = lo + step * i as f64;
                let a = (x - step).max(lo);
                let b = (x + step).min(hi);
                out = out.max(golden_max(&f, a, b)?);
            }
        }
        return Ok(out);
    }
}

fn scan_abs(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, grid: usize) -> Result<Vec<f64>> {
    let step = (hi - lo) / (grid - 1) as f64;
    (0..grid)
        .map(|i| {
            let x = lo + step * i as f64;
            let v = f(x);
            if v.is_finite() {
                Ok(v.abs())
            } else {
                Err(Error::NonFiniteValue { x })
            }
        })
        .collect()
}

/// Golden-section maximization of |f| on [a, b].
fn golden_max(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    #[allow(clippy::excessive_precision)]
    const INV_PHI: f64 = 0.618033988749894848;
    let mut lo = a;
    let mut hi = b;
    let eval = |x: f64| -> Result<f64> {
        let v = f(x);
        if v.is_finite() {
            Ok(v.abs())
        } else {
            Err(Error::NonFiniteValue { x })
        }
    };
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    let mut best = f1.max(f2);
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = eval(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = eval(x1)?;
        }
        best = best.max(f1.max(f2));
        if hi - lo < 1e-13 * (1.0 + lo.abs()) {
            break;
        }
    }
    Ok(best)
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Newton iteration from the Chebyshev initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_normalization() {
        let r = integrate_semiaxis(|x| (-x).exp(), Interval::half_line(0.0), 1e-12).unwrap();
        assert!((r.value - 1.0).abs() < 1e-11);
        assert!(r.evaluations >= 1);
    }

    #[test]
    fn smoothing_kernel_u_integrals() {
        // ∫_0^∞ e^{-3u} (1 - e^{-2u})^k du = 2/15, 8/105, 16/315 for k = 1, 2, 3.
        let expected = [2.0 / 15.0, 8.0 / 105.0, 16.0 / 315.0];
        for (k, want) in (1..=3).zip(expected) {
            let r = integrate_semiaxis(
                |u| (-3.0 * u).exp() * (1.0 - (-2.0 * u).exp()).powi(k),
                Interval::half_line(0.0),
                1e-12,
            )
            .unwrap();
            assert!(
                (r.value - want).abs() < 1e-10,
                "k={k}: got {} want {want}",
                r.value
            );
        }
    }

    #[test]
    fn quadrature_failure_reports_best_estimate() {
        let opts = QuadOptions {
            max_segments: 3,
            rel_tol: 1e-15,
            abs_floor: 1e-300,
            ..QuadOptions::default()
        };
        let err = integrate_opts(|x: f64| (x * 40.0).sin() / (1.0 + x * x), Interval::new(0.0, 30.0).unwrap(), &opts)
            .unwrap_err();
        match err {
            Error::QuadratureFailed { evaluations, .. } => assert!(evaluations > 0),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn reg_lower_gamma_special_cases() {
        // P(1, x) = 1 - e^{-x}
        let v = reg_lower_gamma(1.0, 2.0).unwrap();
        assert!((v - (1.0 - (-2.0f64).exp())).abs() < 1e-14);
        // chi-square(1) CDF at 1 equals P(|Z| <= 1)
        let v = reg_lower_gamma(0.5, 0.5).unwrap();
        assert!((v - 0.682689492137086).abs() < 1e-12);
        assert_eq!(reg_lower_gamma(2.0, 0.0).unwrap(), 0.0);
        assert!((reg_lower_gamma(2.0, f64::INFINITY).unwrap() - 1.0).abs() < 1e-12);
        assert!(reg_lower_gamma(-1.0, 1.0).is_err());
    }

    #[test]
    fn reg_lower_gamma_series_oracle() {
        // Term-by-term series summation, independent of the branch split.
        fn series(r: f64, x: f64) -> f64 {
            let mut term = (r * x.ln() - x - ln_gamma(r + 1.0)).exp();
            let mut sum = term;
            for n in 1..2000 {
                term *= x / (r + n as f64);
                sum += term;
                if term < sum * 1e-18 {
                    break;
                }
            }
            sum
        }
        for (r, x) in [(3.7, 2.9), (3.7, 10.0), (0.5, 4.0), (12.0, 30.0)] {
            let got = reg_lower_gamma(r, x).unwrap();
            let want = series(r, x);
            assert!((got - want).abs() < 1e-12, "P({r},{x}): {got} vs {want}");
        }
        // frozen high-precision reference
        assert!((reg_lower_gamma(3.7, 2.9).unwrap() - 0.392489355717551233).abs() < 1e-13);
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        for n in 1..20u64 {
            let exact: f64 = (1..n).map(|k| (k as f64).ln()).sum();
            assert!((ln_gamma(n as f64) - exact).abs() < 1e-12 * (1.0 + exact.abs()));
        }
        assert!((ln_gamma(0.5) - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-14);
    }

    #[test]
    fn sup_norm_examples() {
        let v = sup_norm_estimate(|x| x.cos(), Interval::new(0.0, 20.0).unwrap(), 256, true).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let v = sup_norm_estimate(|x| x * (-x).exp(), Interval::half_line(0.0), 256, true).unwrap();
        assert!((v - 1.0 / std::f64::consts::E).abs() < 1e-12);
        assert!(v <= 1.0 / std::f64::consts::E + 1e-15);
        assert!(sup_norm_estimate(|x| x, Interval::new(0.0, 1.0).unwrap(), 10, false).is_err());
    }

    #[test]
    fn sup_norm_names_bad_abscissa() {
        let err =
            sup_norm_estimate(|x| 1.0 / x, Interval::new(0.0, 1.0).unwrap(), 64, false).unwrap_err();
        match err {
            Error::NonFiniteValue { x } => assert_eq!(x, 0.0),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn gauss_legendre_unit_moments() {
        // ∫_0^1 v^2 (1-v^2)^k dv equals the u-integral constants.
        let (nodes, weights) = gauss_legendre_unit(32);
        for (k, want) in [(1, 2.0 / 15.0), (2, 8.0 / 105.0), (3, 16.0 / 315.0)] {
            let got: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(&v, &w)| w * v * v * (1.0 - v * v).powi(k))
                .sum();
            assert!((got - want).abs() < 1e-14);
        }
    }
}
