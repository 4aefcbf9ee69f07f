//! Measured distributional distances: smooth-test-function and Kolmogorov
//! distance between a squared statistic and its chi-square limit, exactly by
//! enumeration or by Monte Carlo, plus log-log rate-slope fitting.

use crate::error::{Error, Result};
use crate::gamma_stein::{gamma_expectation, GammaParams};
use crate::numerics::{chi_square_cdf, ln_binomial};
use crate::statistics::{
    sample_multinomial, sample_squared_clt, visit_outcomes, IidDistribution, MultinomialModel,
};
use crate::test_functions::TestFunction;

/// Exact or Monte Carlo evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Exact,
    MonteCarlo { budget: usize, seed: u64 },
}

/// A measured distance; `std_error` is zero exactly when the value is exact.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DistanceEstimate {
    pub value: f64,
    pub std_error: f64,
    pub exact: bool,
    pub n: u64,
    pub draws: usize,
    pub seed: Option<u64>,
}

/// Which squared statistic a distance refers to.
#[derive(Debug, Clone)]
pub enum StatisticKind {
    /// Pearson's statistic over a multinomial model; the reference law is
    /// chi-square with m - 1 degrees of freedom.
    Pearson(MultinomialModel),
    /// Squared column sums of an n x d matrix of i.i.d. standardized
    /// entries; the reference law is chi-square with d degrees of freedom.
    SquaredClt {
        dist: IidDistribution,
        n: u64,
        d: u32,
    },
}

impl StatisticKind {
    pub fn degrees(&self) -> f64 {
        match self {
            StatisticKind::Pearson(m) => (m.m() - 1) as f64,
            StatisticKind::SquaredClt { d, .. } => *d as f64,
        }
    }

    pub fn trials(&self) -> u64 {
        match self {
            StatisticKind::Pearson(m) => m.n(),
            StatisticKind::SquaredClt { n, .. } => *n,
        }
    }
}

/// Visit the exact atom distribution (w, probability) of the statistic.
fn visit_exact_atoms(
    stat: &StatisticKind,
    budget: u128,
    mut f: impl FnMut(f64, f64),
) -> Result<()> {
    match stat {
        StatisticKind::Pearson(model) => {
            let n = model.n() as f64;
            let p = model.p().to_vec();
            visit_outcomes(model, budget, |u, lp| {
                let mut w = 0.0;
                for (&uj, &pj) in u.iter().zip(&p) {
                    let dlt = uj as f64 - n * pj;
                    w += dlt * dlt / (n * pj);
                }
                f(w, lp.exp());
            })
        }
        StatisticKind::SquaredClt { dist, n, d } => {
            if *dist != IidDistribution::Rademacher {
                return Err(Error::invalid(
                    "mode",
                    "exact mode supports only the rademacher entry distribution",
                ));
            }
            let states = (*n as u128 + 1).checked_pow(*d).unwrap_or(u128::MAX);
            if states > budget {
                return Err(Error::EnumerationBudget {
                    outcomes: states,
                    budget,
                });
            }
            // column sum is 2K - n with K ~ Bin(n, 1/2); walk the product of
            // d independent binomials.
            let nf = *n as f64;
            let probs: Vec<f64> = (0..=*n)
                .map(|k| (ln_binomial(*n, k) - nf * std::f64::consts::LN_2).exp())
                .collect();
            let mut idx = vec![0u64; *d as usize];
            loop {
                let mut w = 0.0;
                let mut pr = 1.0;
                for &k in &idx {
                    let s = 2.0 * k as f64 - nf;
                    w += s * s;
                    pr *= probs[k as usize];
                }
                f(w / nf, pr);
                // odometer
                let mut pos = 0usize;
                loop {
                    if pos == idx.len() {
                        return Ok(());
                    }
                    if idx[pos] < *n {
                        idx[pos] += 1;
                        break;
                    }
                    idx[pos] = 0;
                    pos += 1;
                }
            }
        }
    }
}

fn mc_draw(stat: &StatisticKind, rng: &mut impl rand::Rng) -> f64 {
    match stat {
        StatisticKind::Pearson(model) => {
            let counts = sample_multinomial(model, rng);
            crate::statistics::pearson_statistic_unchecked(model, &counts.0)
        }
        StatisticKind::SquaredClt { dist, n, d } => sample_squared_clt(*dist, *n, *d, rng),
    }
}

/// |E h(W) - E h(Y)| for the chi-square reference Y, exactly (atom sum plus
/// quadrature reference) or by Monte Carlo.
pub fn smooth_distance(
    stat: &StatisticKind,
    h: &TestFunction,
    mode: Mode,
    enumeration_budget: u128,
) -> Result<DistanceEstimate> {
    let reference = gamma_expectation(h, GammaParams::chi_square(stat.degrees())?)?;
    match mode {
        Mode::Exact => {
            let mut sum = 0.0;
            let mut comp = 0.0;
            visit_exact_atoms(stat, enumeration_budget, |w, pr| {
                let term = pr * h.value(w);
                let t = sum + term;
                comp += if sum.abs() >= term.abs() {
                    (sum - t) + term
                } else {
                    (term - t) + sum
                };
                sum = t;
            })?;
            Ok(DistanceEstimate {
                value: (sum + comp - reference).abs(),
                std_error: 0.0,
                exact: true,
                n: stat.trials(),
                draws: 0,
                seed: None,
            })
        }
        Mode::MonteCarlo { budget, seed } => {
            if budget == 0 {
                return Err(Error::invalid("budget", "must be positive"));
            }
            let chunk = 65_536usize;
            let mut rng = crate::substream_rng(seed, 0);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for i in 0..budget {
                if i % chunk == 0 {
                    rng = crate::substream_rng(seed, (i / chunk) as u64);
                }
                let v = h.value(mc_draw(stat, &mut rng));
                sum += v;
                sum_sq += v * v;
            }
            let b = budget as f64;
            let mean = sum / b;
            let var = (sum_sq / b - mean * mean).max(0.0);
            Ok(DistanceEstimate {
                value: (mean - reference).abs(),
                std_error: (var / b).sqrt(),
                exact: false,
                n: stat.trials(),
                draws: budget,
                seed: Some(seed),
            })
        }
    }
}

/// sup_z |P(W <= z) - P(Y <= z)| against the chi-square reference.
///
/// Exact mode sorts the atoms of W and takes the larger of the left- and
/// right-limit gaps at every atom, which is where the supremum of a
/// piecewise comparison with a continuous CDF lives. Monte Carlo mode uses
/// the empirical CDF with a Dvoretzky-Kiefer-Wolfowitz radius at one-sigma
/// coverage as the reported standard error.
pub fn kolmogorov_distance(
    stat: &StatisticKind,
    mode: Mode,
    enumeration_budget: u128,
) -> Result<DistanceEstimate> {
    let df = stat.degrees();
    match mode {
        Mode::Exact => {
            let mut atoms: Vec<(f64, f64)> = Vec::new();
            visit_exact_atoms(stat, enumeration_budget, |w, pr| atoms.push((w, pr)))?;
            atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
            // merge numerically identical atoms
            let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
            for (w, pr) in atoms {
                match merged.last_mut() {
                    Some((w0, p0)) if (w - *w0).abs() <= 1e-9 * (1.0 + w.abs()) => *p0 += pr,
                    _ => merged.push((w, pr)),
                }
            }
            let mut cum = 0.0;
            let mut sup = 0.0f64;
            for (w, pr) in merged {
                let reference = chi_square_cdf(df, w)?;
                sup = sup.max((cum - reference).abs()); // left limit at w
                cum += pr;
                sup = sup.max((cum - reference).abs());
            }
            Ok(DistanceEstimate {
                value: sup,
                std_error: 0.0,
                exact: true,
                n: stat.trials(),
                draws: 0,
                seed: None,
            })
        }
        Mode::MonteCarlo { budget, seed } => {
            if budget == 0 {
                return Err(Error::invalid("budget", "must be positive"));
            }
            let chunk = 65_536usize;
            let mut rng = crate::substream_rng(seed, 0);
            let mut ws: Vec<f64> = Vec::with_capacity(budget);
            for i in 0..budget {
                if i % chunk == 0 {
                    rng = crate::substream_rng(seed, (i / chunk) as u64);
                }
                ws.push(mc_draw(stat, &mut rng));
            }
            ws.sort_by(f64::total_cmp);
            let b = budget as f64;
            let mut sup = 0.0f64;
            for (i, &w) in ws.iter().enumerate() {
                let reference = chi_square_cdf(df, w)?;
                sup = sup.max((i as f64 / b - reference).abs());
                sup = sup.max(((i + 1) as f64 / b - reference).abs());
            }
            // DKW: P(sup gap > eps) <= 2 exp(-2 B eps²); eps at 1-sigma
            // two-sided coverage 0.3173.
            let dkw = ((2.0f64 / 0.3173).ln() / (2.0 * b)).sqrt();
            Ok(DistanceEstimate {
                value: sup,
                std_error: dkw,
                exact: false,
                n: stat.trials(),
                draws: budget,
                seed: Some(seed),
            })
        }
    }
}

/// Monte Carlo estimate of the first Wasserstein distance between the
/// statistic and its chi-square reference, via matched order statistics of
/// equal-size samples. Offered for exploration only; nothing downstream
/// depends on it.
pub fn wasserstein_distance_mc(
    stat: &StatisticKind,
    budget: usize,
    seed: u64,
) -> Result<DistanceEstimate> {
    if budget == 0 {
        return Err(Error::invalid("budget", "must be positive"));
    }
    let df = stat.degrees();
    let chunk = 65_536usize;
    let mut rng = crate::substream_rng(seed, 0);
    let mut ws: Vec<f64> = Vec::with_capacity(budget);
    for i in 0..budget {
        if i % chunk == 0 {
            rng = crate::substream_rng(seed, (i / chunk) as u64);
        }
        ws.push(mc_draw(stat, &mut rng));
    }
    ws.sort_by(f64::total_cmp);
    // reference sample at matched plotting positions via the quantile
    // function, inverted from the CDF by bisection
    let quantile = |u: f64| -> Result<f64> {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while chi_square_cdf(df, hi)? < u {
            hi *= 2.0;
            if hi > 1e9 {
                break;
            }
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if chi_square_cdf(df, mid)? < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    };
    let b = budget as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for (i, &w) in ws.iter().enumerate() {
        let q = quantile((i as f64 + 0.5) / b)?;
        let v = (w - q).abs();
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / b;
    let var = (sum_sq / b - mean * mean).max(0.0);
    Ok(DistanceEstimate {
        value: mean,
        std_error: (var / b).sqrt(),
        exact: false,
        n: stat.trials(),
        draws: budget,
        seed: Some(seed),
    })
}

/// Exact central atom of the Rademacher squared statistic at zero, its
/// Stirling approximation √(2/(πn)), and their ratio.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct AtomCheck {
    pub exact: f64,
    pub stirling: f64,
    pub ratio: f64,
}

/// P(W = 0) for W = (Σ_i X_i)²/n with Rademacher X_i and even n: the central
/// binomial probability C(n, n/2) 2^{-n}, computed in the log domain.
pub fn rademacher_atom_check(n: u64) -> Result<AtomCheck> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::invalid("n", "need a positive even trial count"));
    }
    if n > 10_000 {
        return Err(Error::invalid("n", "supported up to 10000"));
    }
    let exact = (ln_binomial(n, n / 2) - n as f64 * std::f64::consts::LN_2).exp();
    let stirling = (2.0 / (std::f64::consts::PI * n as f64)).sqrt();
    Ok(AtomCheck {
        exact,
        stirling,
        ratio: exact / stirling,
    })
}

/// Least-squares slope of log(distance) against log(n).
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SlopeEstimate {
    pub slope: f64,
    pub std_error: f64,
    pub intercept: f64,
}

pub fn rate_slope(points: &[(f64, f64)]) -> Result<SlopeEstimate> {
    if points.len() < 3 {
        return Err(Error::invalid("points", "need at least three points"));
    }
    if points.iter().any(|&(n, d)| !(n > 0.0) || !(d > 0.0)) {
        return Err(Error::invalid(
            "points",
            "trial counts and distances must be positive",
        ));
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| n.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, d)| d.ln()).collect();
    let k = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / k;
    let ybar = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let dof = (points.len() - 2) as f64;
    let std_error = if dof > 0.0 {
        (ss_res / dof / sxx).sqrt()
    } else {
        0.0
    };
    Ok(SlopeEstimate {
        slope,
        std_error,
        intercept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statistics::DEFAULT_ENUMERATION_BUDGET;

    fn pearson(n: u64, p: &[f64]) -> StatisticKind {
        StatisticKind::Pearson(MultinomialModel::new(n, p.to_vec()).unwrap())
    }

    #[test]
    fn effectively_constant_h_gives_zero_distance() {
        // a smoothing kernel with its ramp far beyond all atoms and beyond
        // the reference tail is constant 1 on everything that matters
        let stat = pearson(4, &[0.5, 0.5]);
        let h = TestFunction::smooth_indicator(150.0, 1.0).unwrap();
        let d = smooth_distance(&stat, &h, Mode::Exact, DEFAULT_ENUMERATION_BUDGET).unwrap();
        assert!(d.exact && d.std_error == 0.0);
        assert!(d.value < 1e-12, "got {}", d.value);
    }

    #[test]
    fn exact_vs_mc_agreement() {
        let stat = pearson(50, &[0.5, 0.5]);
        let h = TestFunction::cosine(1.0).unwrap();
        let exact = smooth_distance(&stat, &h, Mode::Exact, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let mc = smooth_distance(
            &stat,
            &h,
            Mode::MonteCarlo {
                budget: 400_000,
                seed: 12,
            },
            0,
        )
        .unwrap();
        assert!(
            (exact.value - mc.value).abs() <= 3.0 * mc.std_error,
            "exact {} mc {} se {}",
            exact.value,
            mc.value,
            mc.std_error
        );
    }

    #[test]
    fn kolmogorov_hand_enumeration_small_case() {
        // n = 4, p = (1/2, 1/2): W = (U_1 - 2)² over {0, 1, 4} with masses
        // 6/16, 8/16, 2/16; the sup gap sits at the W = 0 atom.
        let stat = pearson(4, &[0.5, 0.5]);
        let d = kolmogorov_distance(&stat, Mode::Exact, DEFAULT_ENUMERATION_BUDGET).unwrap();
        assert!((d.value - 0.375).abs() < 1e-12, "got {}", d.value);
        assert!(d.value <= 1.0);
    }

    #[test]
    fn kolmogorov_exact_vs_mc() {
        let stat = pearson(30, &[0.3, 0.7]);
        let exact =
            kolmogorov_distance(&stat, Mode::Exact, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let mc = kolmogorov_distance(
            &stat,
            Mode::MonteCarlo {
                budget: 200_000,
                seed: 4,
            },
            0,
        )
        .unwrap();
        assert!((exact.value - mc.value).abs() <= 3.0 * mc.std_error);
    }

    #[test]
    fn squared_clt_exact_matches_binomial_structure() {
        // d = 1 Rademacher with even n: atom at 0 has the central binomial
        // probability.
        let stat = StatisticKind::SquaredClt {
            dist: IidDistribution::Rademacher,
            n: 16,
            d: 1,
        };
        let h = TestFunction::smooth_indicator(0.05, 0.05).unwrap();
        // h is 1 exactly on the W = 0 atom and 0 from the next atom (4/16)
        // onward, so E h(W) is the atom mass.
        let dist = smooth_distance(&stat, &h, Mode::Exact, 1 << 20).unwrap();
        let atom = rademacher_atom_check(16).unwrap().exact;
        let reference =
            gamma_expectation(&h, GammaParams::chi_square(1.0).unwrap()).unwrap();
        assert!((dist.value - (atom - reference).abs()).abs() < 1e-12);
    }

    #[test]
    fn wasserstein_estimate_is_sane() {
        // W1 between a law and itself (chi-square sampled through the
        // quantile map is deferred; instead check shrinkage with n)
        let h_small = wasserstein_distance_mc(&pearson(8, &[0.5, 0.5]), 40_000, 3).unwrap();
        let h_large = wasserstein_distance_mc(&pearson(512, &[0.5, 0.5]), 40_000, 3).unwrap();
        assert!(h_small.value > 0.0 && h_large.value > 0.0);
        assert!(h_large.value < h_small.value);
        assert!(!h_small.exact && h_small.std_error > 0.0);
    }

    #[test]
    fn atom_check_values() {
        let a = rademacher_atom_check(2).unwrap();
        assert!((a.exact - 0.5).abs() < 1e-15);
        assert!((a.stirling - (1.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert!((a.ratio - 0.886226925452758).abs() < 1e-12);
        let a = rademacher_atom_check(100).unwrap();
        assert!(a.ratio > 0.995 && a.ratio < 1.0, "ratio {}", a.ratio);
        assert!(rademacher_atom_check(7).is_err());
        assert!(rademacher_atom_check(0).is_err());
    }

    #[test]
    fn slope_of_synthetic_inverse_law() {
        let pts: Vec<(f64, f64)> = [16.0, 32.0, 64.0, 128.0]
            .iter()
            .map(|&n| (n, 3.0 / n))
            .collect();
        let s = rate_slope(&pts).unwrap();
        assert!((s.slope + 1.0).abs() < 1e-12);
        assert!(s.std_error < 1e-12);
        assert!(rate_slope(&pts[..2]).is_err());
        assert!(rate_slope(&[(1.0, 0.0), (2.0, 1.0), (3.0, 1.0)]).is_err());
    }

    #[test]
    fn atom_sequence_slope_is_minus_half() {
        let pts: Vec<(f64, f64)> = (4..=10)
            .map(|k| {
                let n = 1u64 << k;
                (n as f64, rademacher_atom_check(n).unwrap().exact)
            })
            .collect();
        let s = rate_slope(&pts).unwrap();
        assert!((s.slope + 0.5).abs() < 0.02, "slope {}", s.slope);
    }
}
