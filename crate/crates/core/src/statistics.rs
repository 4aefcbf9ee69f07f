//! Multinomial models, exact enumeration, the two squared statistics, and
//! closed-form moment identities with brute-force oracles.

use crate::bounds::MomentBundle;
use crate::error::{Error, Result};
use crate::numerics::ln_gamma;
use rand::Rng;
use rand_distr::Distribution;

/// n independent trials classified into m cells with probabilities p.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MultinomialModel {
    n: u64,
    p: Vec<f64>,
}

impl MultinomialModel {
    pub fn new(n: u64, p: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "need at least one trial"));
        }
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
        Ok(MultinomialModel { n, p })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn m(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn min_p(&self) -> f64 {
        self.p.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_np(&self) -> f64 {
        self.n as f64 * self.min_p()
    }

    pub fn all_np_at_least_one(&self) -> bool {
        self.min_np() >= 1.0
    }

    pub fn expected(&self, j: usize) -> f64 {
        self.n as f64 * self.p[j]
    }
}

/// Observed cell counts for one multinomial draw.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Counts(pub Vec<u64>);

impl Counts {
    pub fn validate(&self, model: &MultinomialModel) -> Result<()> {
        if self.0.len() != model.m() {
            return Err(Error::DimensionMismatch {
                expected: model.m(),
                actual: self.0.len(),
            });
        }
        let total: u64 = self.0.iter().sum();
        if total != model.n() {
            return Err(Error::invalid(
                "counts",
                format!("sum {} does not equal n = {}", total, model.n()),
            ));
        }
        Ok(())
    }
}

/// Pearson's statistic W = Σ_j (U_j - n p_j)² / (n p_j).
pub fn pearson_statistic(model: &MultinomialModel, counts: &Counts) -> Result<f64> {
    counts.validate(model)?;
    Ok(pearson_statistic_unchecked(model, &counts.0))
}

pub(crate) fn pearson_statistic_unchecked(model: &MultinomialModel, u: &[u64]) -> f64 {
    let n = model.n() as f64;
    u.iter()
        .zip(model.p())
        .map(|(&uj, &pj)| {
            let d = uj as f64 - n * pj;
            d * d / (n * pj)
        })
        .sum()
}

/// Standardized cell counts S_j = (U_j - n p_j) / √(n p_j); they satisfy
/// Σ_j √(p_j) S_j = 0 and W = Σ_j S_j².
pub fn standardized_cells(model: &MultinomialModel, counts: &Counts) -> Result<Vec<f64>> {
    counts.validate(model)?;
    let n = model.n() as f64;
    Ok(counts
        .0
        .iter()
        .zip(model.p())
        .map(|(&uj, &pj)| (uj as f64 - n * pj) / (n * pj).sqrt())
        .collect())
}

/// W_d = (1/n) Σ_j (Σ_i X_ij)² for a row-major n x d matrix.
pub fn squared_clt_statistic(data: &[f64], n: usize, d: usize) -> Result<f64> {
    if n == 0 || d == 0 || data.len() != n * d {
        return Err(Error::DimensionMismatch {
            expected: n * d,
            actual: data.len(),
        });
    }
    let mut w = 0.0;
    for j in 0..d {
        let col: f64 = (0..n).map(|i| data[i * d + j]).sum();
        w += col * col;
    }
    Ok(w / n as f64)
}

/// Number of compositions of n into m parts, saturating at `u128::MAX`.
pub fn enumeration_count(model: &MultinomialModel) -> u128 {
    let n = model.n() as u128;
    let k = (model.m() - 1) as u128;
    // C(n + m - 1, m - 1)
    let mut acc: u128 = 1;
    for i in 1..=k {
        acc = match acc.checked_mul(n + k - i + 1) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    acc
}

pub const DEFAULT_ENUMERATION_BUDGET: u128 = 10_000_000;

/// Streams every composition of n into m parts with its exact
/// log-probability. Multinomial coefficients are computed in the log domain.
#[derive(Debug)]
pub struct MultinomialEnumerator {
    current: Vec<u64>,
    ln_n_factorial: f64,
    ln_p: Vec<f64>,
    done: bool,
}

impl MultinomialEnumerator {
    pub fn new(model: &MultinomialModel, budget: u128) -> Result<Self> {
        let outcomes = enumeration_count(model);
        if outcomes > budget {
            return Err(Error::EnumerationBudget { outcomes, budget });
        }
        let mut current = vec![0u64; model.m()];
        current[0] = model.n();
        Ok(MultinomialEnumerator {
            current,
            ln_n_factorial: ln_gamma(model.n() as f64 + 1.0),
            ln_p: model.p().iter().map(|&x| x.ln()).collect(),
            done: false,
        })
    }

    fn log_prob(&self, u: &[u64]) -> f64 {
        let mut lp = self.ln_n_factorial;
        for (&uj, &lpj) in u.iter().zip(&self.ln_p) {
            lp += uj as f64 * lpj - ln_gamma(uj as f64 + 1.0);
        }
        lp
    }
}

impl Iterator for MultinomialEnumerator {
    type Item = (Counts, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = (
            Counts(self.current.clone()),
            self.log_prob(&self.current),
        );
        // Advance to the next composition: move one unit from the rightmost
        // non-terminal non-zero cell into its neighbor, sweeping whatever sat
        // in the last cell along with it.
        let m = self.current.len();
        match (0..m - 1).rev().find(|&i| self.current[i] > 0) {
            Some(i) => {
                let tail = self.current[m - 1];
                self.current[m - 1] = 0;
                self.current[i] -= 1;
                self.current[i + 1] += 1 + tail;
            }
            None => self.done = true,
        }
        Some(item)
    }
}

/// Visit every outcome without allocating per item.
pub fn visit_outcomes(
    model: &MultinomialModel,
    budget: u128,
    mut f: impl FnMut(&[u64], f64),
) -> Result<()> {
    let outcomes = enumeration_count(model);
    if outcomes > budget {
        return Err(Error::EnumerationBudget { outcomes, budget });
    }
    let ln_n_factorial = ln_gamma(model.n() as f64 + 1.0);
    let ln_p: Vec<f64> = model.p().iter().map(|&x| x.ln()).collect();
    let m = model.m();
    let mut u = vec![0u64; m];
    u[0] = model.n();
    loop {
        let mut lp = ln_n_factorial;
        for (&uj, &lpj) in u.iter().zip(&ln_p) {
            lp += uj as f64 * lpj - ln_gamma(uj as f64 + 1.0);
        }
        f(&u, lp);
        match (0..m - 1).rev().find(|&i| u[i] > 0) {
            Some(i) => {
                let tail = u[m - 1];
                u[m - 1] = 0;
                u[i] -= 1;
                u[i + 1] += 1 + tail;
            }
            None => return Ok(()),
        }
    }
}

/// One multinomial draw by sequential binomial conditioning.
pub fn sample_multinomial(model: &MultinomialModel, rng: &mut impl Rng) -> Counts {
    let m = model.m();
    let mut out = vec![0u64; m];
    let mut remaining = model.n();
    let mut mass = 1.0f64;
    for (j, slot) in out.iter_mut().enumerate().take(m - 1) {
        if remaining == 0 {
            break;
        }
        let cond = (model.p()[j] / mass).clamp(0.0, 1.0);
        let draw = rand_distr::Binomial::new(remaining, cond)
            .expect("conditional probability is in [0,1]")
            .sample(rng);
        *slot = draw;
        remaining -= draw;
        mass -= model.p()[j];
    }
    out[m - 1] = remaining;
    Counts(out)
}

/// Standardized i.i.d. entry distributions for the squared-CLT statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum IidDistribution {
    /// ±1 with equal probability.
    Rademacher,
    /// Uniform on {±1, ±3}/√5.
    UniformDiscrete,
    /// Exp(1) - 1 (standardized shifted exponential; skewed).
    ShiftedExponential,
}

impl IidDistribution {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rademacher" => Ok(Self::Rademacher),
            "uniform-discrete" => Ok(Self::UniformDiscrete),
            "shifted" => Ok(Self::ShiftedExponential),
            other => Err(Error::invalid(
                "distribution",
                format!("unknown `{other}` (expected rademacher|uniform-discrete|shifted)"),
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Rademacher => "rademacher",
            Self::UniformDiscrete => "uniform-discrete",
            Self::ShiftedExponential => "shifted",
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match self {
            Self::Rademacher => {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Self::UniformDiscrete => {
                const V: [f64; 4] = [-3.0, -1.0, 1.0, 3.0];
                V[rng.gen_range(0..4)] / 5.0f64.sqrt()
            }
            Self::ShiftedExponential => {
                let x: f64 = rand_distr::Exp1.sample(rng);
                x - 1.0
            }
        }
    }

    /// Exact absolute moments of the standardized entry.
    pub fn moments(&self) -> MomentBundle {
        match self {
            Self::Rademacher => MomentBundle::new(1.0, 1.0, 1.0, 1.0, 0.0).unwrap(),
            Self::UniformDiscrete => {
                // E|X|^k = (1 + 3^k)/(2 · 5^{k/2})
                let mk = |k: i32| (1.0 + 3.0f64.powi(k)) / (2.0 * 5.0f64.powi(k).sqrt());
                MomentBundle::new(mk(3), mk(4), mk(6), mk(8), 0.0).unwrap()
            }
            Self::ShiftedExponential => {
                // Central moments of Exp(1) are the derangement numbers;
                // E|X-1|³ = 12/e - 2.
                MomentBundle::new(
                    12.0 / std::f64::consts::E - 2.0,
                    9.0,
                    265.0,
                    14833.0,
                    2.0,
                )
                .unwrap()
            }
        }
    }
}

/// Row-major n x d matrix of i.i.d. standardized entries.
pub fn sample_iid_matrix(
    dist: IidDistribution,
    n: usize,
    d: usize,
    rng: &mut impl Rng,
) -> Vec<f64> {
    (0..n * d).map(|_| dist.sample(rng)).collect()
}

/// One draw of W_d. For Rademacher entries the column sum is 2K - n with
/// K ~ Bin(n, 1/2), which is sampled directly.
pub fn sample_squared_clt(dist: IidDistribution, n: u64, d: u32, rng: &mut impl Rng) -> f64 {
    let nf = n as f64;
    let mut w = 0.0;
    match dist {
        IidDistribution::Rademacher => {
            let bin = rand_distr::Binomial::new(n, 0.5).expect("valid binomial");
            for _ in 0..d {
                let k = bin.sample(rng) as f64;
                let s = 2.0 * k - nf;
                w += s * s;
            }
        }
        _ => {
            for _ in 0..d {
                let col: f64 = (0..n).map(|_| dist.sample(rng)).sum();
                w += col * col;
            }
        }
    }
    w / nf
}

/// Second, fourth, and sixth moments of the leave-one-out standardized count
/// S_j^{(i)} = S_j - I_j(i)/√(n p_j) = (V - n p_j)/√(n p_j), V ~ Bin(n-1, p_j).
///
/// Note the raw indicator is subtracted, not the centered one; the +p/n term
/// in the second moment only appears under this convention.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct LeaveOneOutMoments {
    pub m2: f64,
    pub m4: f64,
    pub m6: f64,
}

/// Closed forms. In powers of 1/(np) the sixth moment reads
///
/// ```text
/// 15(1-p)³ + Q₁(p)/(np) + Q₂(p)/(np)² + Q₃(p)/((np)² n)
/// Q₁(p) = 5(1-p)²(5 - 47p + 68p²)
/// Q₂(p) = (1-p)(1 - 86p + 724p² - 1626p³ + 1044p⁴)
/// Q₃(p) = -(1-2p)(1 - 60p + 420p² - 720p³ + 360p⁴)
/// ```
///
/// and similarly for m2 and m4. Those expansions cancel catastrophically in
/// floating point when np is small, so evaluation goes through the
/// algebraically identical route via the central moments of Bin(n-1, p),
/// whose terms share the scale of the result. The expanded form lives in
/// [`leave_one_out_moments_expanded`].
pub fn leave_one_out_moments(n: u64, p: f64) -> Result<LeaveOneOutMoments> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one trial"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p", "need 0 < p < 1"));
    }
    let nf = n as f64;
    let np = nf * p;
    // S^{(i)} = (V - (n-1)p - p)/√(np), V ~ Bin(n-1, p)
    let mu = |k: u32| binomial_central_moment(n - 1, p, k).expect("orders 1..6 supported");
    let p2 = p * p;
    let m2 = (mu(2) + p2) / np;
    let m4 = (mu(4) - 4.0 * p * mu(3) + 6.0 * p2 * mu(2) + p2 * p2) / (np * np);
    let m6 = (mu(6) - 6.0 * p * mu(5) + 15.0 * p2 * mu(4) - 20.0 * p2 * p * mu(3)
        + 15.0 * p2 * p2 * mu(2)
        + p2 * p2 * p2)
        / (np * np * np);
    Ok(LeaveOneOutMoments { m2, m4, m6 })
}

/// The displayed 1/(np)-power expansions of the same moments; exact in real
/// arithmetic but loses digits to cancellation at small np. Kept as an
/// algebraic cross-check of [`leave_one_out_moments`].
pub fn leave_one_out_moments_expanded(n: u64, p: f64) -> Result<LeaveOneOutMoments> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one trial"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p", "need 0 < p < 1"));
    }
    let nf = n as f64;
    let q = 1.0 - p;
    let np = nf * p;
    let m2 = (nf - 1.0) * q / nf + p / nf;
    let m4 = 3.0 * q * q * (nf - 1.0) / nf
        + (nf - 1.0) / (nf * nf * p) * q * (1.0 - 13.0 * p + 23.0 * p * p)
        + p * p / (nf * nf);
    let q1 = 5.0 * q * q * (5.0 + p * (-47.0 + 68.0 * p));
    let q2 = q * (1.0 + p * (-86.0 + p * (724.0 + p * (-1626.0 + 1044.0 * p))));
    let q3 = -(1.0 - 2.0 * p) * (1.0 + p * (-60.0 + p * (420.0 + p * (-720.0 + 360.0 * p))));
    let m6 = 15.0 * q * q * q + q1 / np + q2 / (np * np) + q3 / (np * np * nf);
    Ok(LeaveOneOutMoments { m2, m4, m6 })
}

/// The same moments by exact summation over Bin(n-1, p).
pub fn leave_one_out_moments_oracle(n: u64, p: f64) -> Result<LeaveOneOutMoments> {
    Ok(LeaveOneOutMoments {
        m2: leave_one_out_abs_moment_oracle(n, p, 2)?,
        m4: leave_one_out_abs_moment_oracle(n, p, 4)?,
        m6: leave_one_out_abs_moment_oracle(n, p, 6)?,
    })
}

/// E |S^{(i)}|^k by exact summation over Bin(n-1, p); even k recovers the
/// signed moment.
pub fn leave_one_out_abs_moment_oracle(n: u64, p: f64, k: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one trial"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p", "need 0 < p < 1"));
    }
    let nf = n as f64;
    let big_n = n - 1;
    let ln_q = (1.0 - p).ln();
    let ln_p = p.ln();
    let scale = (nf * p).sqrt();
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in 0..=big_n {
        let lp = crate::numerics::ln_binomial(big_n, v) + v as f64 * ln_p
            + (big_n - v) as f64 * ln_q;
        let s = (v as f64 - nf * p) / scale;
        let term = lp.exp() * s.abs().powi(k as i32);
        // Neumaier compensation
        let t = sum + term;
        comp += if sum.abs() >= term.abs() {
            (sum - t) + term
        } else {
            (term - t) + sum
        };
        sum = t;
    }
    Ok(sum + comp)
}

/// Central moment of Bin(n, p) for orders 1..=6.
pub fn binomial_central_moment(n: u64, p: f64, order: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("p", "need 0 <= p <= 1"));
    }
    let nf = n as f64;
    let pq = p * (1.0 - p);
    Ok(match order {
        1 => 0.0,
        2 => nf * pq,
        3 => nf * pq * (1.0 - 2.0 * p),
        4 => nf * pq * (1.0 + 3.0 * (nf - 2.0) * pq),
        5 => nf * pq * (1.0 - 2.0 * p) * (1.0 + 2.0 * (5.0 * nf - 6.0) * pq),
        6 => {
            nf * pq
                * (1.0
                    + 5.0 * (5.0 * nf - 6.0) * pq
                    + (15.0 * nf * nf - 130.0 * nf + 120.0) * pq * pq)
        }
        k => {
            return Err(Error::OrderTooHigh {
                requested: k as usize,
                available: 6,
            })
        }
    })
}

/// Central moment by exact pmf summation (oracle).
pub fn binomial_central_moment_oracle(n: u64, p: f64, order: u32) -> f64 {
    let nf = n as f64;
    let mean = nf * p;
    let ln_p = p.ln();
    let ln_q = (1.0 - p).ln();
    (0..=n)
        .map(|k| {
            let lp = crate::numerics::ln_binomial(n, k) + k as f64 * ln_p
                + (n - k) as f64 * ln_q;
            lp.exp() * (k as f64 - mean).powi(order as i32)
        })
        .sum()
}

/// How the Taylor placement θ in ξ_k = S_k^{(1)} + θ I_k(1)/√(n p_k) is
/// chosen for the Monte Carlo check.
#[derive(Debug, Clone, Copy)]
pub enum ThetaMode {
    /// Independent uniform draw per sample.
    Uniform,
    Fixed(f64),
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct IndicatorMomentCheck {
    pub estimate: f64,
    pub std_error: f64,
    /// c p_j with c the stored cap for this power.
    pub cap: f64,
    pub p_j: f64,
    pub power: u32,
    pub hypothesis_met: bool,
}

/// Monte Carlo estimate of E |I_j(1) ξ_k^power| against its cap c·p_j, for
/// power in {1, 2, 3, 4, 6} with caps {2, 4, 14, 27, 305}.
pub fn indicator_moment_check(
    model: &MultinomialModel,
    j: usize,
    k: usize,
    power: u32,
    theta: ThetaMode,
    budget: usize,
    seed: u64,
) -> Result<IndicatorMomentCheck> {
    indicator_moment_check_with(
        &crate::bounds::Constants::published(),
        model,
        j,
        k,
        power,
        theta,
        budget,
        seed,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn indicator_moment_check_with(
    constants: &crate::bounds::Constants,
    model: &MultinomialModel,
    j: usize,
    k: usize,
    power: u32,
    theta: ThetaMode,
    budget: usize,
    seed: u64,
) -> Result<IndicatorMomentCheck> {
    if j >= model.m() || k >= model.m() {
        return Err(Error::DimensionMismatch {
            expected: model.m(),
            actual: j.max(k) + 1,
        });
    }
    if budget == 0 {
        return Err(Error::invalid("budget", "must be positive"));
    }
    let cap_scale = match power {
        1 => constants.xi_caps[0],
        2 => constants.xi_caps[1],
        3 => constants.xi_caps[2],
        4 => constants.xi_caps[3],
        6 => constants.xi_caps[4],
        other => {
            return Err(Error::invalid(
                "power",
                format!("must be one of 1,2,3,4,6, got {other}"),
            ))
        }
    };
    let n = model.n();
    let p = model.p();
    let np_k = model.expected(k);
    let mut rng = crate::substream_rng(seed, 0);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    // thin the (n-1)-trial remainder to the k-th cell only; its count is
    // Bin(n-1, p_k) and is independent of trial 1.
    let rest = rand_distr::Binomial::new(n - 1, p[k]).expect("valid binomial");
    for _ in 0..budget {
        // trial 1 lands in cell j with probability p_j
        let first_cell_is_j = rng.gen::<f64>() < p[j];
        let val = if first_cell_is_j {
            let i_k = if j == k { 1.0 } else { 0.0 };
            let s_k = (rest.sample(&mut rng) as f64 - np_k) / np_k.sqrt();
            let th = match theta {
                ThetaMode::Uniform => rng.gen::<f64>(),
                ThetaMode::Fixed(t) => t,
            };
            let xi = s_k + th * i_k / np_k.sqrt();
            xi.abs().powi(power as i32)
        } else {
            0.0
        };
        sum += val;
        sum_sq += val * val;
    }
    let b = budget as f64;
    let mean = sum / b;
    let var = (sum_sq / b - mean * mean).max(0.0);
    Ok(IndicatorMomentCheck {
        estimate: mean,
        std_error: (var / b).sqrt(),
        cap: cap_scale * p[j],
        p_j: p[j],
        power,
        hypothesis_met: model.expected(j) >= 1.0 && np_k >= 1.0,
    })
}
