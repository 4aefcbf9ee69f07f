//! Univariate and multivariate normal Stein machinery behind the symmetry
//! arguments: the solution ψ of ψ'(x) - xψ(x) = g(x) with its envelope
//! bounds, the constrained covariance Σ = I - √p√pᵀ with an exact-projection
//! sampler, the operator identity linking the multivariate normal and
//! chi-square Stein operators on the constraint surface, and closed-form
//! third partials of the two odd test functions with Monte Carlo estimates
//! of the corresponding solution derivatives.

use crate::bounds::Constants;
use crate::error::{Error, Result};
use crate::gamma_stein::Solution;
use crate::numerics::{gauss_legendre_unit, integrate_opts, Interval, QuadOptions};
use rand::Rng;
use rand_distr::Distribution;

/// Solution of ψ'(x) - xψ(x) = g(x) for a g with zero standard-normal mean:
///
/// ```text
/// ψ(x) = e^{x²/2} ∫_{-∞}^x g(s) e^{-s²/2} ds = -e^{x²/2} ∫_x^∞ g(s) e^{-s²/2} ds.
/// ```
///
/// Evaluation always integrates over the tail on the far side of x, written
/// as ∫_0^∞ g(x ± u) e^{∓xu - u²/2} du so the Gaussian prefactor never
/// overflows.
pub fn psi_univariate(g: impl Fn(f64) -> f64, x: f64) -> Result<f64> {
    // g is often itself quadrature-backed with ~1e-12 relative noise; the
    // error target must sit above that floor or subdivision never ends.
    let opts = QuadOptions {
        rel_tol: 1e-11,
        abs_floor: 1e-11,
        ..QuadOptions::default()
    };
    // skip g wherever the Gaussian weight has underflowed; g may be
    // quadrature-backed and arbitrarily expensive at extreme arguments
    if x > 0.0 {
        let res = integrate_opts(
            |u| {
                let log_w = -x * u - 0.5 * u * u;
                if log_w < -700.0 {
                    0.0
                } else {
                    g(x + u) * log_w.exp()
                }
            },
            Interval::half_line(0.0),
            &opts,
        )?;
        Ok(-res.value)
    } else {
        let res = integrate_opts(
            |u| {
                let log_w = x * u - 0.5 * u * u;
                if log_w < -700.0 {
                    0.0
                } else {
                    g(x - u) * log_w.exp()
                }
            },
            Interval::half_line(0.0),
            &opts,
        )?;
        Ok(res.value)
    }
}

/// The odd derivative 3s f''(s²) + 2s³ f⁽³⁾(s²) fed to the normal Stein
/// equation by the squared statistic.
pub fn odd_g3(f: &Solution, s: f64) -> Result<f64> {
    let w = s * s;
    let d = f.derivs_at(3, w)?;
    Ok(3.0 * s * d[2] + 2.0 * s * s * s * d[3])
}

/// Its derivative 3f''(s²) + 12s² f⁽³⁾(s²) + 4s⁴ f⁽⁴⁾(s²).
pub fn odd_g4(f: &Solution, s: f64) -> Result<f64> {
    let w = s * s;
    let d = f.derivs_at(4, w)?;
    Ok(3.0 * d[2] + 12.0 * w * d[3] + 4.0 * w * w * d[4])
}

/// ψ and ψ' together, ψ' by differentiating the integral representation
/// under the integral sign:
///
/// ```text
/// x > 0:  ψ'(x) = -∫_0^∞ [g'(x+u) - u g(x+u)] e^{-xu - u²/2} du
/// x <= 0: ψ'(x) =  ∫_0^∞ [g'(x-u) + u g(x-u)] e^{xu - u²/2} du
/// ```
///
/// Checking ψ'(x) - xψ(x) = g(x) against these two independent quadratures
/// exercises the integration-by-parts identity rather than re-deriving the
/// equation, so it serves as a residual oracle without finite differences.
pub fn psi_univariate_with_derivative(
    g: impl Fn(f64) -> f64,
    g_prime: impl Fn(f64) -> f64,
    x: f64,
) -> Result<(f64, f64)> {
    let opts = QuadOptions {
        rel_tol: 1e-11,
        abs_floor: 1e-11,
        ..QuadOptions::default()
    };
    if x > 0.0 {
        let v = integrate_opts(
            |u| {
                let log_w = -x * u - 0.5 * u * u;
                if log_w < -700.0 {
                    0.0
                } else {
                    g(x + u) * log_w.exp()
                }
            },
            Interval::half_line(0.0),
            &opts,
        )?;
        let dv = integrate_opts(
            |u| {
                let log_w = -x * u - 0.5 * u * u;
                if log_w < -700.0 {
                    0.0
                } else {
                    (g_prime(x + u) - u * g(x + u)) * log_w.exp()
                }
            },
            Interval::half_line(0.0),
            &opts,
        )?;
        Ok((-v.value, -dv.value))
    } else {
        let v = integrate_opts(
            |u| {
                let log_w = x * u - 0.5 * u * u;
                if log_w < -700.0 {
                    0.0
                } else {
                    g(x - u) * log_w.exp()
                }
            },
            Interval::half_line(0.0),
            &opts,
        )?;
        let dv = integrate_opts(
            |u| {
                let log_w = x * u - 0.5 * u * u;
                if log_w < -700.0 {
                    0.0
                } else {
                    (g_prime(x - u) + u * g(x - u)) * log_w.exp()
                }
            },
            Interval::half_line(0.0),
            &opts,
        )?;
        Ok((v.value, dv.value))
    }
}

/// Envelope bounds for |ψ|, |xψ'| and |ψ''| in terms of sup-norms of f'',
/// f⁽³⁾, f⁽⁴⁾, evaluated at x.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct PsiEnvelopes {
    pub sup: f64,
    pub x_slope: f64,
    pub second: f64,
}

pub fn psi_envelopes(f2: f64, f3: f64, f4: f64, x: f64) -> PsiEnvelopes {
    psi_envelopes_with(&Constants::published(), f2, f3, f4, x)
}

pub fn psi_envelopes_with(c: &Constants, f2: f64, f3: f64, f4: f64, x: f64) -> PsiEnvelopes {
    let x2 = x * x;
    let x4 = x2 * x2;
    PsiEnvelopes {
        sup: c.psi_sup[0] * f2 + c.psi_sup[1] * (x2 + c.psi_sup[2]) * f3,
        x_slope: c.psi_x_slope[0] * x2 * f2 + c.psi_x_slope[1] * x2 * (x2 + c.psi_x_slope[2]) * f3,
        second: c.psi_second[0] * (c.psi_second[1] * x2 + c.psi_second[2]) * f2
            + c.psi_second[3] * (c.psi_second[4] * x4 + c.psi_second[5] * x2 + c.psi_second[6]) * f3
            + c.psi_second[7] * x4 * f4,
    }
}

/// Zero-mean Gaussian with covariance σ_jj = 1 - p_j, σ_jk = -√(p_j p_k):
/// the weak limit of the standardized multinomial cell counts. √p spans the
/// null space, so every sample lies on the hyperplane Σ_j √(p_j) z_j = 0.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ConstrainedGaussian {
    p: Vec<f64>,
    sqrt_p: Vec<f64>,
}

impl ConstrainedGaussian {
    pub fn from_p(p: &[f64]) -> Result<Self> {
        if p.len() < 2 {
            return Err(Error::invalid("p", "need at least two cells"));
        }
        if p.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::invalid("p", "entries must be strictly positive"));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::ProbabilitySum { sum });
        }
        Ok(ConstrainedGaussian {
            sqrt_p: p.iter().map(|&x| x.sqrt()).collect(),
            p: p.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn covariance(&self, j: usize, k: usize) -> f64 {
        if j == k {
            1.0 - self.p[j]
        } else {
            -self.sqrt_p[j] * self.sqrt_p[k]
        }
    }

    pub fn covariance_matrix(&self) -> Vec<Vec<f64>> {
        let m = self.dim();
        (0..m)
            .map(|j| (0..m).map(|k| self.covariance(j, k)).collect())
            .collect()
    }

    /// Trace is m - 1; √p is a null vector.
    pub fn trace(&self) -> f64 {
        self.dim() as f64 - 1.0
    }

    /// Draw Z = G - (√p·G)√p for i.i.d. standard normal G: the projection
    /// onto the hyperplane orthogonal to √p, with covariance exactly
    /// I - √p√pᵀ.
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        let g: Vec<f64> = (0..self.dim())
            .map(|_| rand_distr::StandardNormal.sample(rng))
            .collect();
        let dot: f64 = g.iter().zip(&self.sqrt_p).map(|(a, b)| a * b).sum();
        g.iter()
            .zip(&self.sqrt_p)
            .map(|(gi, spi)| gi - dot * spi)
            .collect()
    }

    /// |Σ_j √(p_j) z_j| for a point z.
    pub fn constraint_deviation(&self, z: &[f64]) -> f64 {
        z.iter()
            .zip(&self.sqrt_p)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            .abs()
    }
}

/// Build the constrained covariance from cell probabilities.
pub fn sigma_from_p(p: &[f64]) -> Result<ConstrainedGaussian> {
    ConstrainedGaussian::from_p(p)
}

fn check_dim(model: &ConstrainedGaussian, s: &[f64]) -> Result<()> {
    if s.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            actual: s.len(),
        });
    }
    Ok(())
}

/// ∇ᵀΣ∇g(s) - sᵀ∇g(s) for g(s) = f(w)/4, w = Σ s_j², using the closed-form
/// partials of g.
pub fn mvn_operator_apply(
    f: &Solution,
    model: &ConstrainedGaussian,
    s: &[f64],
) -> Result<f64> {
    check_dim(model, s)?;
    let w: f64 = s.iter().map(|x| x * x).sum();
    let d = f.derivs_at(2, w)?;
    let (d1, d2) = (d[1], d[2]);
    let m = model.dim();
    // Σ_j σ_jj (f'/2 + s_j² f'') + Σ_{j≠k} σ_jk s_j s_k f'' - Σ_j s_j (s_j f'/2)
    let mut acc = 0.0;
    for j in 0..m {
        acc += model.covariance(j, j) * (0.5 * d1 + s[j] * s[j] * d2);
        for k in 0..m {
            if k != j {
                acc += model.covariance(j, k) * s[j] * s[k] * d2;
            }
        }
        acc -= 0.5 * s[j] * s[j] * d1;
    }
    Ok(acc)
}

/// The chi-square operator w f''(w) + (m - 1 - w) f'(w) / 2 at w = Σ s_j².
pub fn chi_square_operator_apply(
    f: &Solution,
    dim: usize,
    s: &[f64],
) -> Result<f64> {
    let w: f64 = s.iter().map(|x| x * x).sum();
    let d = f.derivs_at(2, w)?;
    Ok(w * d[2] + 0.5 * ((dim as f64 - 1.0) - w) * d[1])
}

/// Both operator values at a point on the constraint surface; they agree
/// there. Points off the surface (beyond 1e-12) are rejected.
pub fn operator_comparison(
    f: &Solution,
    model: &ConstrainedGaussian,
    s: &[f64],
) -> Result<(f64, f64)> {
    check_dim(model, s)?;
    let dev = model.constraint_deviation(s);
    if dev > 1e-12 {
        return Err(Error::ConstraintViolated { deviation: dev });
    }
    Ok((
        mvn_operator_apply(f, model, s)?,
        chi_square_operator_apply(f, model.dim(), s)?,
    ))
}

/// The two odd test functions driving the symmetry argument, both built from
/// a chi-square Stein solution f and a distinguished coordinate j:
/// `Linear` is s_j f''(w), `Cubic` is s_j³ f⁽³⁾(w), with w = Σ s_k².
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OddTestFunction {
    Linear,
    Cubic,
}

impl OddTestFunction {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "linear" | "h1" => Ok(Self::Linear),
            "cubic" | "h2" => Ok(Self::Cubic),
            other => Err(Error::invalid(
                "odd test function",
                format!("unknown `{other}` (expected linear|cubic)"),
            )),
        }
    }

    /// Highest f-derivative order used by third partials.
    pub fn max_f_order(&self) -> usize {
        match self {
            Self::Linear => 5,
            Self::Cubic => 6,
        }
    }

    pub fn value(&self, f: &Solution, j: usize, s: &[f64]) -> Result<f64> {
        let w: f64 = s.iter().map(|x| x * x).sum();
        match self {
            Self::Linear => Ok(s[j] * f.deriv(2, w)?),
            Self::Cubic => Ok(s[j].powi(3) * f.deriv(3, w)?),
        }
    }
}

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Closed-form partial derivative of g(s) = f(w)/4, w = Σ s_k², for one to
/// four indices.
pub fn g_partial(f: &Solution, indices: &[usize], s: &[f64]) -> Result<f64> {
    let w: f64 = s.iter().map(|x| x * x).sum();
    match *indices {
        [a] => {
            let d = f.derivs_at(1, w)?;
            Ok(0.5 * s[a] * d[1])
        }
        [a, b] => {
            let d = f.derivs_at(2, w)?;
            Ok(0.5 * delta(a, b) * d[1] + s[a] * s[b] * d[2])
        }
        [a, b, c] => {
            let d = f.derivs_at(3, w)?;
            Ok((delta(a, b) * s[c] + delta(a, c) * s[b] + delta(b, c) * s[a]) * d[2]
                + 2.0 * s[a] * s[b] * s[c] * d[3])
        }
        [a, b, c, e] => {
            let d = f.derivs_at(4, w)?;
            let pairs = delta(a, b) * delta(c, e) + delta(a, c) * delta(b, e)
                + delta(a, e) * delta(b, c);
            let quad = delta(a, b) * s[c] * s[e]
                + delta(a, c) * s[b] * s[e]
                + delta(a, e) * s[b] * s[c]
                + delta(b, c) * s[a] * s[e]
                + delta(b, e) * s[a] * s[c]
                + delta(c, e) * s[a] * s[b];
            Ok(pairs * d[2] + 2.0 * quad * d[3] + 4.0 * s[a] * s[b] * s[c] * s[e] * d[4])
        }
        _ => Err(Error::invalid("indices", "need one to four indices")),
    }
}

/// First partial ∂/∂s_a of the odd test function.
pub fn odd_partial1(
    kind: OddTestFunction,
    f: &Solution,
    j: usize,
    a: usize,
    s: &[f64],
) -> Result<f64> {
    let w: f64 = s.iter().map(|x| x * x).sum();
    match kind {
        OddTestFunction::Linear => {
            let d = f.derivs_at(3, w)?;
            Ok(delta(j, a) * d[2] + 2.0 * s[j] * s[a] * d[3])
        }
        OddTestFunction::Cubic => {
            let d = f.derivs_at(4, w)?;
            Ok(3.0 * s[j] * s[j] * delta(j, a) * d[3] + 2.0 * s[j].powi(3) * s[a] * d[4])
        }
    }
}

/// Second partial ∂²/∂s_a ∂s_b.
pub fn odd_partial2(
    kind: OddTestFunction,
    f: &Solution,
    j: usize,
    (a, b): (usize, usize),
    s: &[f64],
) -> Result<f64> {
    let w: f64 = s.iter().map(|x| x * x).sum();
    match kind {
        OddTestFunction::Linear => {
            let d = f.derivs_at(4, w)?;
            Ok(2.0 * (delta(j, a) * s[b] + delta(j, b) * s[a] + delta(a, b) * s[j]) * d[3]
                + 4.0 * s[j] * s[a] * s[b] * d[4])
        }
        OddTestFunction::Cubic => {
            let d = f.derivs_at(5, w)?;
            Ok(6.0 * s[j] * delta(j, a) * delta(j, b) * d[3]
                + (6.0 * s[j] * s[j] * (delta(j, a) * s[b] + delta(j, b) * s[a])
                    + 2.0 * s[j].powi(3) * delta(a, b))
                    * d[4]
                + 4.0 * s[j].powi(3) * s[a] * s[b] * d[5])
        }
    }
}

/// Exact third partial ∂³/∂s_a ∂s_b ∂s_c, with the full Kronecker-delta
/// structure.
pub fn odd_partial3(
    kind: OddTestFunction,
    f: &Solution,
    j: usize,
    (a, b, c): (usize, usize, usize),
    s: &[f64],
) -> Result<f64> {
    let w: f64 = s.iter().map(|x| x * x).sum();
    match kind {
        OddTestFunction::Linear => {
            let d = f.derivs_at(5, w)?;
            let (d3, d4, d5) = (d[3], d[4], d[5]);
            let deltas =
                delta(j, a) * delta(b, c) + delta(j, b) * delta(a, c) + delta(j, c) * delta(a, b);
            let quad = delta(j, a) * s[b] * s[c]
                + delta(j, b) * s[a] * s[c]
                + delta(j, c) * s[a] * s[b]
                + s[j] * (delta(a, b) * s[c] + delta(a, c) * s[b] + delta(b, c) * s[a]);
            Ok(2.0 * deltas * d3 + 4.0 * quad * d4 + 8.0 * s[j] * s[a] * s[b] * s[c] * d5)
        }
        OddTestFunction::Cubic => {
            let d = f.derivs_at(6, w)?;
            let (d3, d4, d5, d6) = (d[3], d[4], d[5], d[6]);
            let sj = s[j];
            let t4 = 12.0
                * sj
                * (delta(j, a) * delta(j, b) * s[c]
                    + delta(j, a) * delta(j, c) * s[b]
                    + delta(j, b) * delta(j, c) * s[a])
                + 6.0
                    * sj
                    * sj
                    * (delta(j, a) * delta(b, c)
                        + delta(j, b) * delta(a, c)
                        + delta(j, c) * delta(a, b));
            let t5 = 12.0
                * sj
                * sj
                * (delta(j, a) * s[b] * s[c]
                    + delta(j, b) * s[a] * s[c]
                    + delta(j, c) * s[a] * s[b])
                + 4.0 * sj.powi(3) * (delta(a, b) * s[c] + delta(a, c) * s[b] + delta(b, c) * s[a]);
            Ok(6.0 * delta(j, a) * delta(j, b) * delta(j, c) * d3
                + t4 * d4
                + t5 * d5
                + 8.0 * sj.powi(3) * s[a] * s[b] * s[c] * d6)
        }
    }
}

/// Envelope bound on the third partials of the MVN Stein solution for the
/// odd test function, in terms of sup-norms of f⁽³⁾..f⁽⁶⁾ (`norms[k]` holds
/// ‖f^(k)‖).
pub fn third_partial_envelope(
    kind: OddTestFunction,
    norms: &[f64],
    j: usize,
    (a, b, c): (usize, usize, usize),
    s: &[f64],
) -> f64 {
    third_partial_envelope_with(&Constants::published(), kind, norms, j, (a, b, c), s)
}

pub fn third_partial_envelope_with(
    k: &Constants,
    kind: OddTestFunction,
    norms: &[f64],
    j: usize,
    (a, b, c): (usize, usize, usize),
    s: &[f64],
) -> f64 {
    let sq = |i: usize| s[i] * s[i];
    let quart = |i: usize| sq(i) * sq(i);
    let six = |i: usize| sq(i) * quart(i);
    match kind {
        OddTestFunction::Linear => {
            let e = &k.odd_env_linear;
            e[0] * norms[3]
                + e[1] * (e[2] + e[3] * (sq(a) + sq(b) + sq(c) + sq(j))) * norms[4]
                + e[4] * (e[5] + e[6] * (quart(a) + quart(b) + quart(c) + quart(j))) * norms[5]
        }
        OddTestFunction::Cubic => {
            let e = &k.odd_env_cubic;
            e[0] * norms[3]
                + e[1] * (e[2] + sq(a) + sq(b) + sq(c) + e[3] * sq(j)) * norms[4]
                + e[4]
                    * (e[5] + e[6] * (e[7] * (quart(a) + quart(b) + quart(c)) + e[8] * quart(j)))
                    * norms[5]
                + (e[9] + e[10] * (six(a) + six(b) + six(c) + e[11] * six(j))) * norms[6]
        }
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub draws: usize,
}

/// Estimate of the third partial of the MVN Stein solution
///
/// ```text
/// ψ(s) = -∫_0^∞ E[h(e^{-u} s + √(1-e^{-2u}) Z)] du,
/// ∂³ψ = -∫_0^∞ e^{-3u} E[∂³h(e^{-u} s + √(1-e^{-2u}) Z)] du,
/// ```
///
/// by Gauss-Legendre quadrature in v = e^{-u} and Monte Carlo over Z, using
/// the exact closed-form partials of h. Substreams are indexed by draw chunk
/// so the result does not depend on evaluation order.
#[allow(clippy::too_many_arguments)]
pub fn mvn_third_derivative_estimate(
    kind: OddTestFunction,
    f: &Solution,
    j: usize,
    indices: (usize, usize, usize),
    s: &[f64],
    model: &ConstrainedGaussian,
    u_nodes: usize,
    mc_budget: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_dim(model, s)?;
    if mc_budget < 10_000 {
        return Err(Error::invalid("mc_budget", "need at least 10_000 draws"));
    }
    let (nodes, weights) = gauss_legendre_unit(u_nodes.max(8));
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let chunk = 4096usize;
    let mut point = vec![0.0; model.dim()];
    let mut rng = crate::substream_rng(seed, 0);
    for i in 0..mc_budget {
        if i % chunk == 0 {
            rng = crate::substream_rng(seed, (i / chunk) as u64);
        }
        let z = model.sample(&mut rng);
        // per-draw quadrature over the interpolation parameter
        let mut integral = 0.0;
        for (&v, &w) in nodes.iter().zip(&weights) {
            let mix = (1.0 - v * v).sqrt();
            for (pt, (&si, &zi)) in point.iter_mut().zip(s.iter().zip(&z)) {
                *pt = v * si + mix * zi;
            }
            integral += w * v * v * odd_partial3(kind, f, j, indices, &point)?;
        }
        let draw = -integral;
        sum += draw;
        sum_sq += draw * draw;
    }
    let b = mc_budget as f64;
    let mean = sum / b;
    let var = (sum_sq / b - mean * mean).max(0.0);
    Ok(McEstimate {
        value: mean,
        std_error: (var / b).sqrt(),
        draws: mc_budget,
    })
}

/// Σ_i w_i v_i² (1 - v_i²)^power: the quadrature rule applied to the
/// u-integrals ∫ e^{-3u} (1 - e^{-2u})^power du.
pub fn u_weight_integral(power: u32, u_nodes: usize) -> f64 {
    let (nodes, weights) = gauss_legendre_unit(u_nodes.max(8));
    nodes
        .iter()
        .zip(&weights)
        .map(|(&v, &w)| w * v * v * (1.0 - v * v).powi(power as i32))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamma_stein::{DerivativeTable, GammaParams};
    use crate::test_functions::TestFunction;
    use rand::SeedableRng;

    #[test]
    fn psi_for_linear_g_is_minus_one() {
        for x in [-3.0, -0.5, 0.0, 0.7, 4.0] {
            let v = psi_univariate(|s| s, x).unwrap();
            assert!((v + 1.0).abs() < 1e-10, "x={x}: {v}");
        }
    }

    #[test]
    fn psi_residual_for_solution_driven_g() {
        let h = TestFunction::cosine(1.0).unwrap();
        let params = GammaParams::chi_square(1.0).unwrap();
        let table = DerivativeTable::build(&h, params, 4).unwrap();
        let f = Solution::Table(&table);
        let g = |s: f64| odd_g3(&f, s).unwrap();
        let gp = |s: f64| odd_g4(&f, s).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x: f64 = rng.gen_range(-4.0..4.0);
            let (psi0, dpsi) = psi_univariate_with_derivative(g, gp, x).unwrap();
            let res = dpsi - x * psi0 - g(x);
            assert!(res.abs() <= 1e-8, "x={x}: residual {res:e}");
        }
    }

    #[test]
    fn psi_and_derivatives_within_envelopes() {
        let h = TestFunction::cosine(1.0).unwrap();
        let params = GammaParams::chi_square(1.0).unwrap();
        let table = DerivativeTable::build(&h, params, 4).unwrap();
        let f = Solution::Table(&table);
        let g = |s: f64| odd_g3(&f, s).unwrap();
        let f2 = table.sup_deriv(2, 512).unwrap();
        let f3 = table.sup_deriv(3, 512).unwrap();
        let f4 = table.sup_deriv(4, 512).unwrap();
        for i in 0..=24 {
            let x = -6.0 + 0.5 * i as f64;
            let d = 1e-2;
            let pm: Vec<f64> = [-2.0, -1.0, 0.0, 1.0, 2.0]
                .iter()
                .map(|&k| psi_univariate(g, x + k * d).unwrap())
                .collect();
            let psi0 = pm[2];
            let dpsi = (-pm[4] + 8.0 * pm[3] - 8.0 * pm[1] + pm[0]) / (12.0 * d);
            let d2psi = (-pm[4] + 16.0 * pm[3] - 30.0 * pm[2] + 16.0 * pm[1] - pm[0])
                / (12.0 * d * d);
            let env = psi_envelopes(f2, f3, f4, x);
            assert!(psi0.abs() <= env.sup + 1e-6, "x={x}: |psi| {}", psi0.abs());
            assert!(
                (x * dpsi).abs() <= env.x_slope + 1e-6,
                "x={x}: |x psi'| {}",
                (x * dpsi).abs()
            );
            assert!(
                d2psi.abs() <= env.second + 1e-6,
                "x={x}: |psi''| {} vs {}",
                d2psi.abs(),
                env.second
            );
        }
    }

    #[test]
    fn psi_envelope_arithmetic() {
        let e = psi_envelopes(1.0, 1.0, 1.0, 0.0);
        assert!((e.sup - 7.0).abs() < 1e-15); // 3 + 2·2
        assert_eq!(e.x_slope, 0.0);
        let e = psi_envelopes(1.0, 1.0, 1.0, 1.0);
        assert!((e.second - 48.0).abs() < 1e-15); // 18 + 26 + 4
    }

    #[test]
    fn constrained_gaussian_two_cells() {
        let g = sigma_from_p(&[0.5, 0.5]).unwrap();
        assert!((g.covariance(0, 0) - 0.5).abs() < 1e-15);
        assert!((g.covariance(0, 1) + 0.5).abs() < 1e-15);
        assert_eq!(g.trace(), 1.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let z = g.sample(&mut rng);
            assert!((z[0] + z[1]).abs() < 1e-12);
            assert!(g.constraint_deviation(&z) < 1e-12);
        }
        assert!(sigma_from_p(&[0.4, 0.4]).is_err());
    }

    #[test]
    fn sampler_covariance_matches() {
        let g = sigma_from_p(&[0.2, 0.3, 0.5]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let draws = 200_000;
        let m = g.dim();
        let mut acc = vec![vec![0.0; m]; m];
        for _ in 0..draws {
            let z = g.sample(&mut rng);
            for (row, &zj) in acc.iter_mut().zip(&z) {
                for (cell, &zk) in row.iter_mut().zip(&z) {
                    *cell += zj * zk;
                }
            }
        }
        for j in 0..m {
            for k in 0..m {
                let emp = acc[j][k] / draws as f64;
                let want = g.covariance(j, k);
                // var of z_j z_k is σ_jj σ_kk + σ_jk² for Gaussians
                let se = ((g.covariance(j, j) * g.covariance(k, k) + want * want)
                    / draws as f64)
                    .sqrt();
                assert!(
                    (emp - want).abs() <= 4.0 * se,
                    "({j},{k}): {emp} vs {want}"
                );
            }
        }
    }

    #[test]
    fn operator_identity_linear_quadratic() {
        let g = sigma_from_p(&[0.2, 0.3, 0.5]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let s = g.sample(&mut rng);
            let w: f64 = s.iter().map(|x| x * x).sum();
            let (a, b) = operator_comparison(&Solution::Identity, &g, &s).unwrap();
            // f(w) = w: both sides are (m-1)/2 - w/2
            assert!((a - (1.0 - 0.5 * w)).abs() < 1e-12);
            assert!((a - b).abs() < 1e-12);
            let (a, b) = operator_comparison(&Solution::Square, &g, &s).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
        // off-surface points are rejected
        let err = operator_comparison(&Solution::Identity, &g, &[1.0, 1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::ConstraintViolated { .. }));
    }

    #[test]
    fn operator_identity_solved_table() {
        let h = TestFunction::cosine(1.0).unwrap();
        let params = GammaParams::chi_square(2.0).unwrap();
        let table = DerivativeTable::build(&h, params, 2).unwrap();
        let f = Solution::Table(&table);
        let g = sigma_from_p(&[0.5, 0.5]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let s = g.sample(&mut rng);
            let (a, b) = operator_comparison(&f, &g, &s).unwrap();
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn odd_partials_match_finite_differences() {
        let h = TestFunction::cosine(1.0).unwrap();
        let params = GammaParams::chi_square(2.0).unwrap();
        let table = DerivativeTable::build(&h, params, 6).unwrap();
        let f = Solution::Table(&table);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let m = 3;
        let j = 1;
        for kind in [OddTestFunction::Linear, OddTestFunction::Cubic] {
            for _ in 0..6 {
                let s: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..1.5)).collect();
                for combo in [(0usize, 0usize, 0usize), (1, 1, 1), (0, 1, 2), (0, 1, 1)] {
                    let (a, b, c) = combo;
                    let d = 4e-3;
                    let mut sp = s.clone();
                    let mut p2 = |shift: f64| {
                        sp[c] = s[c] + shift;
                        odd_partial2(kind, &f, j, (a, b), &sp).unwrap()
                    };
                    // fourth-order stencil for the derivative in s_c
                    let fd = (-p2(2.0 * d) + 8.0 * p2(d) - 8.0 * p2(-d) + p2(-2.0 * d))
                        / (12.0 * d);
                    let exact = odd_partial3(kind, &f, j, combo, &s).unwrap();
                    assert!(
                        (fd - exact).abs() <= 1e-4 * exact.abs().max(1.0),
                        "{kind:?} {combo:?}: fd={fd} exact={exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn g_partials_match_finite_differences() {
        let h = TestFunction::cosine(1.0).unwrap();
        let params = GammaParams::chi_square(2.0).unwrap();
        let table = DerivativeTable::build(&h, params, 5).unwrap();
        let f = Solution::Table(&table);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..4 {
            let s: Vec<f64> = (0..3).map(|_| rng.gen_range(0.2..1.4)).collect();
            // differencing starts from the first partial: the solution is
            // defined only up to a constant, so g itself has no evaluator
            for idx in [
                vec![0usize, 1],
                vec![2, 2],
                vec![0, 1, 2],
                vec![1, 1, 2],
                vec![0, 1, 2, 2],
                vec![1, 1, 1, 1],
            ] {
                let (last, head) = idx.split_last().unwrap();
                let d = 4e-3;
                let mut sp = s.clone();
                let mut lower = |shift: f64| {
                    sp[*last] = s[*last] + shift;
                    g_partial(&f, head, &sp).unwrap()
                };
                let fd = (-lower(2.0 * d) + 8.0 * lower(d) - 8.0 * lower(-d)
                    + lower(-2.0 * d))
                    / (12.0 * d);
                let exact = g_partial(&f, &idx, &s).unwrap();
                assert!(
                    (fd - exact).abs() <= 1e-4 * exact.abs().max(1.0),
                    "{idx:?}: fd={fd} exact={exact}"
                );
            }
        }
    }

    #[test]
    fn distinct_off_j_indices_leave_only_the_top_term() {
        // a, b, c all distinct and different from j: every delta vanishes,
        // so the linear kind reduces to 8 s_j s_a s_b s_c f⁽⁵⁾(w).
        let h = TestFunction::cosine(1.0).unwrap();
        let params = GammaParams::chi_square(3.0).unwrap();
        let table = DerivativeTable::build(&h, params, 5).unwrap();
        let f = Solution::Table(&table);
        let s = vec![0.4, 0.7, -0.3, 0.9];
        let j = 3;
        let w: f64 = s.iter().map(|x| x * x).sum();
        let got = odd_partial3(OddTestFunction::Linear, &f, j, (0, 1, 2), &s).unwrap();
        let want = 8.0 * s[3] * s[0] * s[1] * s[2] * table.deriv(5, w).unwrap();
        assert!((got - want).abs() < 1e-12 * want.abs().max(1.0));
    }

    #[test]
    fn cubic_diagonal_collapses_at_zero() {
        // all indices equal j and s_j = 0: only the 6 f⁽³⁾(w) term survives.
        let g = sigma_from_p(&[1.0 / 3.0; 3]).unwrap();
        let _ = g;
        let f = Solution::Square; // f⁽³⁾ ≡ 0 for the quadratic
        let s = vec![0.0, 0.7, 0.3];
        let v = odd_partial3(OddTestFunction::Cubic, &f, 0, (0, 0, 0), &s).unwrap();
        assert_eq!(v, 0.0);
        // and for a solved table the value is 6 f⁽³⁾(Σ s²)
        let h = TestFunction::cosine(1.0).unwrap();
        let params = GammaParams::chi_square(2.0).unwrap();
        let table = DerivativeTable::build(&h, params, 6).unwrap();
        let ft = Solution::Table(&table);
        let w: f64 = s.iter().map(|x| x * x).sum();
        let v = odd_partial3(OddTestFunction::Cubic, &ft, 0, (0, 0, 0), &s).unwrap();
        let want = 6.0 * table.deriv(3, w).unwrap();
        assert!((v - want).abs() < 1e-12);
    }

    #[test]
    fn envelope_at_origin() {
        let norms = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let s = vec![0.0; 3];
        let v = third_partial_envelope(OddTestFunction::Linear, &norms, 0, (0, 1, 2), &s);
        let want = 0.5 + 32.0 / 5.0 + 512.0 / 35.0;
        assert!((v - want).abs() < 1e-12);
        let v = third_partial_envelope(OddTestFunction::Cubic, &norms, 0, (0, 1, 2), &s);
        let want = 0.5 + 2.4 * 4.0 + 8.0 / 35.0 * 384.0 + 4096.0 / 21.0;
        assert!((v - want).abs() < 1e-12);
    }

    #[test]
    fn u_weights_reproduce_exponential_integrals() {
        assert!((u_weight_integral(1, 32) - 2.0 / 15.0).abs() < 1e-12);
        assert!((u_weight_integral(2, 32) - 8.0 / 105.0).abs() < 1e-10);
        assert!((u_weight_integral(3, 32) - 16.0 / 315.0).abs() < 1e-10);
    }

    #[test]
    fn third_derivative_estimate_zero_for_constant_f() {
        // f quadratic makes the cubic kernel vanish identically
        let g = sigma_from_p(&[1.0 / 3.0; 3]).unwrap();
        let s = vec![0.0; 3];
        let est = mvn_third_derivative_estimate(
            OddTestFunction::Cubic,
            &Solution::Square,
            0,
            (0, 1, 2),
            &s,
            &g,
            16,
            10_000,
            3,
        )
        .unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn third_derivative_estimate_within_envelope() {
        let h = TestFunction::cosine(1.0).unwrap();
        let params = GammaParams::chi_square(2.0).unwrap();
        let table = DerivativeTable::build(&h, params, 6).unwrap();
        let f = Solution::Table(&table);
        let model = sigma_from_p(&[0.2, 0.3, 0.5]).unwrap();
        let mut norms = [0.0f64; 7];
        for (k, norm) in norms.iter_mut().enumerate().skip(3) {
            *norm = table.sup_deriv(k, 128).unwrap();
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let s = model.sample(&mut rng);
        for (kind, combo) in [
            (OddTestFunction::Linear, (0usize, 1usize, 2usize)),
            (OddTestFunction::Cubic, (1, 1, 1)),
        ] {
            let est = mvn_third_derivative_estimate(
                kind, &f, 1, combo, &s, &model, 24, 20_000, 7,
            )
            .unwrap();
            let env = third_partial_envelope(kind, &norms, 1, combo, &s);
            assert!(
                est.value.abs() <= env + 3.0 * est.std_error,
                "{kind:?}: |{}| vs envelope {env}",
                est.value
            );
        }
    }

    #[test]
    fn estimate_is_chunk_seeded_and_reproducible() {
        let model = sigma_from_p(&[0.5, 0.5]).unwrap();
        let s = vec![0.0, 0.0];
        let run = || {
            mvn_third_derivative_estimate(
                OddTestFunction::Linear,
                &Solution::Square,
                0,
                (0, 0, 0),
                &s,
                &model,
                16,
                12_000,
                42,
            )
            .unwrap()
            .value
        };
        assert_eq!(run(), run());
    }
}
