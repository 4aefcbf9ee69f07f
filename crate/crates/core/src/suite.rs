//! The verification suite: every acceptance check as a criterion producing a
//! machine-readable report, plus the constants audit and mutation check.

use crate::bounds::{
    bound_kolmogorov_pearson_model, bound_literature_with, bound_pearson_smooth_with,
    bound_squared_clt_with, Constants, MomentBundle, NormBundle, PearsonVariant,
};
use crate::distances::{
    kolmogorov_distance, rademacher_atom_check, rate_slope, smooth_distance, Mode, StatisticKind,
};
use crate::error::Result;
use crate::gamma_stein::{bound_catalog_with, DerivativeTable, GammaParams, Solution};
use crate::normal_stein::{operator_comparison, sigma_from_p, u_weight_integral};
use crate::numerics::{integrate_semiaxis, sup_norm_estimate, Interval};
use crate::statistics::{IidDistribution, MultinomialModel};
use crate::test_functions::TestFunction;

/// Suite size: `Quick` trims grids and budgets for a fast smoke run; `Full`
/// runs every check at its stated scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Quick,
    Full,
}

impl Scale {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Scale::Quick),
            "full" => Ok(Scale::Full),
            other => Err(crate::Error::invalid(
                "scale",
                format!("unknown `{other}` (expected quick|full)"),
            )),
        }
    }
}

/// One named check inside a criterion.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckRow {
    pub name: String,
    pub measured: f64,
    pub limit: f64,
    pub passed: bool,
}

impl CheckRow {
    fn le(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        CheckRow {
            name: name.into(),
            measured,
            limit,
            passed: measured <= limit,
        }
    }

    fn ge(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        CheckRow {
            name: name.into(),
            measured,
            limit,
            passed: measured >= limit,
        }
    }
}

/// Result of one criterion.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CriterionReport {
    pub id: &'static str,
    pub passed: bool,
    pub checks: Vec<CheckRow>,
}

impl CriterionReport {
    fn from_checks(id: &'static str, checks: Vec<CheckRow>) -> Self {
        CriterionReport {
            id,
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }
}

fn stein_grid() -> Vec<(f64, f64)> {
    vec![(0.5, 0.5), (1.0, 0.5), (1.0, 1.0), (2.5, 0.5), (5.0, 2.0)]
}

fn stein_test_functions() -> Vec<TestFunction> {
    vec![
        TestFunction::cosine(1.0).unwrap(),
        TestFunction::damped_exponential(),
    ]
}

/// Residual of the Stein equation with the second derivative taken by a
/// five-point central difference of the quadrature solution.
pub fn stein_residual(scale: Scale) -> Result<CriterionReport> {
    let mut checks = Vec::new();
    let grid_points = match scale {
        Scale::Quick => 12,
        Scale::Full => 40,
    };
    for (r, lambda) in stein_grid() {
        let params = GammaParams::new(r, lambda)?;
        for h in stein_test_functions() {
            let table = DerivativeTable::build(&h, params, 1)?;
            let mean = table.gamma_mean_h();
            let fp = |y: f64| table.deriv(1, y);
            // keep the stencil inside the domain and off the recurrence seam
            let lo = 0.05_f64.max(2e-4 * (params.mean() + 1.0));
            let hi = params.mean() + 10.0 * params.std_dev();
            let step = 1e-3;
            let mut worst = 0.0f64;
            for i in 0..grid_points {
                let x = lo + (hi - lo) * i as f64 / (grid_points - 1) as f64;
                let d2 = (-fp(x + 2.0 * step)? + 8.0 * fp(x + step)? - 8.0 * fp(x - step)?
                    + fp(x - 2.0 * step)?)
                    / (12.0 * step);
                let res = x * d2 + (r - lambda * x) * fp(x)? - (h.value(x) - mean);
                worst = worst.max(res.abs());
            }
            checks.push(CheckRow::le(
                format!("residual r={r} lambda={lambda} h={}", h.descriptor()),
                worst,
                1e-6,
            ));
        }
    }
    // the two integral representations agree at the branch point
    for (r, lambda) in stein_grid() {
        let params = GammaParams::new(r, lambda)?;
        let h = TestFunction::cosine(1.0).unwrap();
        let table = DerivativeTable::build(&h, params, 1)?;
        let x = params.mean();
        let below = table.deriv(1, x - 1e-12)?;
        let above = table.deriv(1, x + 1e-12)?;
        checks.push(CheckRow::le(
            format!("branch-agreement r={r} lambda={lambda}"),
            (below - above).abs(),
            1e-8,
        ));
    }
    Ok(CriterionReport::from_checks("stein-residual", checks))
}

/// Measured sup |f^(k)| and sup |x f^(k)| never exceed any applicable
/// catalog bound.
pub fn derivative_bound_domination(constants: &Constants, scale: Scale) -> Result<CriterionReport> {
    let mut checks = Vec::new();
    let grid = match scale {
        Scale::Quick => 192,
        Scale::Full => 512,
    };
    for (r, lambda) in stein_grid() {
        let params = GammaParams::new(r, lambda)?;
        for h in stein_test_functions() {
            let table = DerivativeTable::build(&h, params, 4)?;
            let norms = NormBundle::from_test_function(&h, 4)?;
            for k in 1..=4usize {
                let sup = table.sup_deriv(k, grid)?;
                let sup_x = table.sup_x_deriv(k, grid)?;
                let catalog = bound_catalog_with(constants, params, k, &norms)?;
                for (name, bound) in &catalog.derivative {
                    checks.push(CheckRow::le(
                        format!(
                            "sup|f^({k})| <= {name} r={r} lambda={lambda} h={}",
                            h.descriptor()
                        ),
                        sup,
                        bound + 1e-8,
                    ));
                }
                for (name, bound) in &catalog.x_weighted {
                    checks.push(CheckRow::le(
                        format!(
                            "sup|x f^({k})| <= {name} r={r} lambda={lambda} h={}",
                            h.descriptor()
                        ),
                        sup_x,
                        bound + 1e-8,
                    ));
                }
            }
        }
    }
    Ok(CriterionReport::from_checks("derivative-bounds", checks))
}

/// Decay of sup |f''| in the shape parameter: log-log slope over
/// r in {2, 8, 32, 128} at rate 1/2 is at most -0.8.
pub fn shape_decay_order(scale: Scale) -> Result<CriterionReport> {
    let h = TestFunction::cosine(1.0).unwrap();
    let grid = match scale {
        Scale::Quick => 1024,
        Scale::Full => 4096,
    };
    let mut pts = Vec::new();
    for r in [2.0, 8.0, 32.0, 128.0] {
        let params = GammaParams::new(r, 0.5)?;
        let table = DerivativeTable::build(&h, params, 2)?;
        pts.push((r, table.sup_deriv(2, grid)?));
    }
    let slope = rate_slope(&pts)?;
    let checks = vec![CheckRow::le(
        "log-log slope of sup|f''| vs r",
        slope.slope,
        -0.8,
    )];
    Ok(CriterionReport::from_checks("shape-decay", checks))
}

/// Closed-form leave-one-out moments equal exact enumeration, and the
/// hypothesis caps hold on the grid.
pub fn leave_one_out_oracle(constants: &Constants) -> Result<CriterionReport> {
    let mut checks = Vec::new();
    let mut worst_rel = 0.0f64;
    let mut cap_ok = true;
    for n in 1..=12u64 {
        for tenth in 1..=9u64 {
            let p = tenth as f64 / 10.0;
            let cf = crate::statistics::leave_one_out_moments(n, p)?;
            let or = crate::statistics::leave_one_out_moments_oracle(n, p)?;
            for (a, b) in [(cf.m2, or.m2), (cf.m4, or.m4), (cf.m6, or.m6)] {
                worst_rel = worst_rel.max((a - b).abs() / b.abs().max(1e-300));
            }
            if n as f64 * p >= 1.0 {
                let a1 = crate::statistics::leave_one_out_abs_moment_oracle(n, p, 1)?;
                let a3 = crate::statistics::leave_one_out_abs_moment_oracle(n, p, 3)?;
                let a5 = crate::statistics::leave_one_out_abs_moment_oracle(n, p, 5)?;
                cap_ok &= cf.m2 < constants.loo_caps[0]
                    && cf.m4 < constants.loo_caps[1]
                    && cf.m6 < constants.loo_caps[2]
                    && a1 < constants.loo_caps[0]
                    && a3 < constants.loo_caps[1].powf(0.75)
                    && a5 < constants.loo_caps[2].powf(5.0 / 6.0);
            }
        }
    }
    checks.push(CheckRow::le(
        "worst relative gap closed form vs enumeration",
        worst_rel,
        1e-12,
    ));
    checks.push(CheckRow::ge(
        "moment caps hold on grid (1 = yes)",
        if cap_ok { 1.0 } else { 0.0 },
        1.0,
    ));
    Ok(CriterionReport::from_checks("leave-one-out-moments", checks))
}

/// Operator identity on the constraint surface for f in {w, w², solved
/// table}, 1000 random points per dimension (200 in quick mode).
pub fn operator_identity(scale: Scale) -> Result<CriterionReport> {
    let points = match scale {
        Scale::Quick => 200,
        Scale::Full => 1000,
    };
    let mut checks = Vec::new();
    let h = TestFunction::cosine(1.0).unwrap();
    for m in [2usize, 3, 5] {
        let p = vec![1.0 / m as f64; m];
        let model = sigma_from_p(&p)?;
        let params = GammaParams::chi_square((m - 1) as f64)?;
        let table = DerivativeTable::build(&h, params, 2)?;
        for (label, f) in [
            ("w", Solution::Identity),
            ("w^2", Solution::Square),
            ("table", Solution::Table(&table)),
        ] {
            let mut rng = crate::substream_rng(1729, m as u64);
            let mut worst = 0.0f64;
            for _ in 0..points {
                let s = model.sample(&mut rng);
                let (mvn, chi) = operator_comparison(&f, &model, &s)?;
                worst = worst.max((mvn - chi).abs());
            }
            checks.push(CheckRow::le(
                format!("operator gap m={m} f={label}"),
                worst,
                1e-9,
            ));
        }
    }
    Ok(CriterionReport::from_checks("operator-identity", checks))
}

/// Exact smooth and Kolmogorov distances dominated by every applicable
/// bound across the desk-scale Pearson grid.
pub fn pearson_domination(constants: &Constants, scale: Scale) -> Result<CriterionReport> {
    let mut checks = Vec::new();
    let ns: &[u64] = match scale {
        Scale::Quick => &[8, 32, 128],
        Scale::Full => &[8, 16, 32, 64, 128],
    };
    let p_sets: Vec<Vec<f64>> = vec![
        vec![0.5, 0.5],
        vec![0.2, 0.8],
        vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        vec![0.2, 0.3, 0.5],
    ];
    let hs = [
        TestFunction::cosine(1.0).unwrap(),
        TestFunction::smooth_indicator(2.0, 1.0).unwrap(),
    ];
    let budget = crate::statistics::DEFAULT_ENUMERATION_BUDGET;
    let mut violations = 0u32;
    let mut total = 0u32;
    for p in &p_sets {
        for &n in ns {
            let model = MultinomialModel::new(n, p.clone())?;
            if !model.all_np_at_least_one() {
                continue;
            }
            let stat = StatisticKind::Pearson(model.clone());
            let kol = kolmogorov_distance(&stat, Mode::Exact, budget)?;
            let kol_bound = bound_kolmogorov_pearson_model(constants, &model)?;
            total += 1;
            if kol.value > kol_bound.value {
                violations += 1;
            }
            checks.push(CheckRow::le(
                format!("kolmogorov m={} n={n}", model.m()),
                kol.value,
                kol_bound.value,
            ));
            for h in &hs {
                let d = smooth_distance(&stat, h, Mode::Exact, budget)?;
                let max_order = h.max_order().min(5);
                let norms = NormBundle::from_test_function(h, max_order)?;
                let mut applicable = vec![(
                    PearsonVariant::Sqrt,
                    bound_pearson_smooth_with(constants, &norms, &model, PearsonVariant::Sqrt)?,
                )];
                if max_order >= 5 {
                    applicable.push((
                        PearsonVariant::N1,
                        bound_pearson_smooth_with(constants, &norms, &model, PearsonVariant::N1)?,
                    ));
                }
                for (variant, bound) in applicable {
                    total += 1;
                    if d.value > bound.value {
                        violations += 1;
                    }
                    checks.push(CheckRow::le(
                        format!(
                            "smooth {} m={} n={n} h={}",
                            variant.name(),
                            model.m(),
                            h.descriptor()
                        ),
                        d.value,
                        bound.value,
                    ));
                }
            }
        }
    }
    checks.push(CheckRow::le(
        format!("violations out of {total}"),
        violations as f64,
        0.0,
    ));
    Ok(CriterionReport::from_checks("pearson-domination", checks))
}

/// Rate recovery: the Pearson smooth distance decays like 1/n (slope at
/// most -0.8) and the central Rademacher atom like n^{-1/2}.
pub fn rate_recovery(scale: Scale) -> Result<CriterionReport> {
    let mut checks = Vec::new();
    let ns: &[u64] = match scale {
        Scale::Quick => &[16, 64, 256],
        Scale::Full => &[16, 32, 64, 128, 256, 512],
    };
    let h = TestFunction::cosine(1.0).unwrap();
    let mut pts = Vec::new();
    for &n in ns {
        let model = MultinomialModel::new(n, vec![1.0 / 3.0; 3])?;
        let d = smooth_distance(
            &StatisticKind::Pearson(model),
            &h,
            Mode::Exact,
            crate::statistics::DEFAULT_ENUMERATION_BUDGET,
        )?;
        pts.push((n as f64, d.value));
    }
    let slope = rate_slope(&pts)?;
    checks.push(CheckRow::le(
        "pearson smooth-distance slope",
        slope.slope,
        -0.8,
    ));

    let atom_ns: Vec<u64> = (4..=10).map(|k| 1u64 << k).collect();
    let atom_pts: Vec<(f64, f64)> = atom_ns
        .iter()
        .map(|&n| Ok((n as f64, rademacher_atom_check(n)?.exact)))
        .collect::<Result<_>>()?;
    let atom_slope = rate_slope(&atom_pts)?.slope;
    checks.push(CheckRow::le("atom slope upper", atom_slope, -0.48));
    checks.push(CheckRow::ge("atom slope lower", atom_slope, -0.52));
    let ratio = rademacher_atom_check(100)?.ratio;
    checks.push(CheckRow::ge("atom ratio n=100 lower", ratio, 0.995));
    checks.push(CheckRow::le("atom ratio n=100 upper", ratio, 1.0));
    Ok(CriterionReport::from_checks("rate-recovery", checks))
}

/// Monte Carlo smooth distance for the squared-CLT statistic dominated by
/// its bound, d = 1 and the general-d variant.
pub fn squared_clt_domination(constants: &Constants, scale: Scale, seed: u64) -> Result<CriterionReport> {
    let mut checks = Vec::new();
    let budget = match scale {
        Scale::Quick => 100_000,
        Scale::Full => 1_000_000,
    };
    let h = TestFunction::cosine(1.0).unwrap();
    let norms = NormBundle::from_test_function(&h, 3)?;
    let moments = IidDistribution::Rademacher.moments();
    let cases: &[(u64, u32)] = &[(64, 1), (256, 1), (1024, 1), (256, 2), (256, 5)];
    for &(n, d) in cases {
        let stat = StatisticKind::SquaredClt {
            dist: IidDistribution::Rademacher,
            n,
            d,
        };
        let dist = smooth_distance(&stat, &h, Mode::MonteCarlo { budget, seed }, 0)?;
        let bound = bound_squared_clt_with(constants, &norms, &moments, n, d)?;
        checks.push(CheckRow::le(
            format!("squared-clt n={n} d={d}"),
            dist.value,
            bound.value + 3.0 * dist.std_error,
        ));
    }
    Ok(CriterionReport::from_checks("squared-clt-domination", checks))
}

/// Kernel constants, exponential u-integrals, and the constrained sampler.
pub fn kernel_and_sampler(scale: Scale, seed: u64) -> Result<CriterionReport> {
    let mut checks = Vec::new();
    // u-integrals by the shared quadrature engine
    for (k, want) in [(1, 2.0 / 15.0), (2, 8.0 / 105.0), (3, 16.0 / 315.0)] {
        let got = integrate_semiaxis(
            |u| (-3.0 * u).exp() * (1.0 - (-2.0 * u).exp()).powi(k),
            Interval::half_line(0.0),
            1e-12,
        )?
        .value;
        checks.push(CheckRow::le(
            format!("u-integral power {k} (quadrature)"),
            (got - want).abs(),
            1e-10,
        ));
        let gl = u_weight_integral(k as u32, 32);
        checks.push(CheckRow::le(
            format!("u-integral power {k} (nodes)"),
            (gl - want).abs(),
            1e-10,
        ));
    }
    // kernel norms certified and grid-confirmed
    for (z, alpha) in [(2.0, 1.0), (1.0, 0.25)] {
        let h = TestFunction::smooth_indicator(z, alpha)?;
        let dom = Interval::new(0.0, z + alpha + 1.0)?;
        let want = [1.0, 2.0 / alpha, 4.0 / (alpha * alpha)];
        for (k, want_k) in want.iter().enumerate() {
            let cert = h.certified_norm(k).unwrap();
            checks.push(CheckRow::le(
                format!("kernel norm value k={k} alpha={alpha}"),
                (cert - want_k).abs(),
                0.0,
            ));
            let est = sup_norm_estimate(|x| h.eval(k, x), dom, 2048, true)?;
            checks.push(CheckRow::le(
                format!("kernel norm grid k={k} alpha={alpha}"),
                est,
                cert + 1e-9,
            ));
            checks.push(CheckRow::ge(
                format!("kernel norm attained k={k} alpha={alpha}"),
                est,
                0.999 * cert,
            ));
        }
    }
    // constrained sampler: exact null direction, covariance within 3 se
    let model = sigma_from_p(&[0.2, 0.3, 0.5])?;
    let draws = match scale {
        Scale::Quick => 100_000,
        Scale::Full => 1_000_000,
    };
    let m = model.dim();
    let mut rng = crate::substream_rng(seed, 77);
    let mut acc = vec![vec![0.0f64; m]; m];
    let mut worst_dev = 0.0f64;
    for _ in 0..draws {
        let z = model.sample(&mut rng);
        worst_dev = worst_dev.max(model.constraint_deviation(&z));
        for (row, &zj) in acc.iter_mut().zip(&z) {
            for (cell, &zk) in row.iter_mut().zip(&z) {
                *cell += zj * zk;
            }
        }
    }
    checks.push(CheckRow::le("sampler null-direction", worst_dev, 1e-12));
    let mut worst_sigma = 0.0f64;
    #[allow(clippy::needless_range_loop)]
    for j in 0..m {
        for k in 0..m {
            let emp = acc[j][k] / draws as f64;
            let want = model.covariance(j, k);
            let se = ((model.covariance(j, j) * model.covariance(k, k) + want * want)
                / draws as f64)
                .sqrt();
            worst_sigma = worst_sigma.max((emp - want).abs() / se);
        }
    }
    checks.push(CheckRow::le(
        "sampler covariance (units of se)",
        worst_sigma,
        3.0,
    ));
    Ok(CriterionReport::from_checks("kernel-and-sampler", checks))
}

/// A frozen-value audit of the constants table. Every stored scalar
/// influences at least one row; the expected values were computed
/// independently of this crate.
pub fn audit_constants(c: &Constants) -> Vec<CheckRow> {
    let mut rows = Vec::new();
    let mut audit = |name: &str, got: f64, want: f64| {
        rows.push(CheckRow::le(
            format!("audit {name}"),
            (got - want).abs(),
            1e-9 * want.abs().max(1.0),
        ));
    };

    // squared-CLT: skewless and skewed unit-norm sums at n = d = 1
    let norms3 = NormBundle::all_ones(3);
    let flat = MomentBundle::new(1.0, 1.0, 1.0, 1.0, 0.0).unwrap();
    let skewed = MomentBundle::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
    let v = bound_squared_clt_with(c, &norms3, &flat, 1, 1).unwrap().value;
    audit("squared-clt flat", v, 752.0);
    let v = bound_squared_clt_with(c, &norms3, &skewed, 1, 1).unwrap().value;
    audit("squared-clt skewed", v, 4.0 / 3.0 * 4388.0);

    // Pearson bounds at pinned inputs
    let norms5 = NormBundle::all_ones(5);
    let norms2 = NormBundle::all_ones(2);
    let m2 = MultinomialModel::new(100, vec![0.5, 0.5]).unwrap();
    let v = bound_pearson_smooth_with(c, &norms2, &m2, PearsonVariant::Sqrt)
        .unwrap()
        .value;
    audit("pearson sqrt", v, 153.86643558619278);
    let m2big = MultinomialModel::new(1_000_000, vec![0.5, 0.5]).unwrap();
    let v = bound_pearson_smooth_with(c, &norms5, &m2big, PearsonVariant::N1)
        .unwrap()
        .value;
    audit("pearson n1", v, 4.453888);
    let v = bound_pearson_smooth_with(c, &norms2, &m2big, PearsonVariant::SqrtMinP)
        .unwrap()
        .value;
    // 12/√(5·10⁵) · 136
    audit("pearson sqrt-pstar", v, 12.0 / 500_000f64.sqrt() * 136.0);
    let v = bound_pearson_smooth_with(c, &norms5, &m2big, PearsonVariant::N1MinP)
        .unwrap()
        .value;
    audit("pearson n1-pstar", v, 4.0 * 2.0 / 500_000.0 * 417_552.0);

    // Kolmogorov cases
    let v = bound_kolmogorov_pearson_model(c, &MultinomialModel::new(200_000, vec![0.5, 0.5]).unwrap())
        .unwrap()
        .value;
    audit("kolmogorov m=2", v, 3.421584428302186);
    let v = bound_kolmogorov_pearson_model(
        c,
        &MultinomialModel::new(5_000_000, vec![0.2, 0.4, 0.4]).unwrap(),
    )
    .unwrap()
    .value;
    audit("kolmogorov m=3", v, 2.412);
    let v = bound_kolmogorov_pearson_model(c, &MultinomialModel::new(50_000, vec![0.2; 5]).unwrap())
        .unwrap()
        .value;
    audit("kolmogorov m=5", v, 4.472987381219759);

    // literature pair
    let (a, b) = bound_literature_with(c, 1_000_000, &[0.25; 4]).unwrap();
    audit("literature linear-m", a.value, 8.0);
    audit("literature quarter-m", b.value, 4.525483399593904);

    // indicator caps at p_j = 0.1
    for (i, want) in [0.2, 0.4, 1.4, 2.7, 30.5].iter().enumerate() {
        audit(&format!("xi cap {i}"), c.xi_caps[i] * 0.1, *want);
    }
    // leave-one-out caps and their Hölder images
    audit("loo cap m2", c.loo_caps[0], 1.0);
    audit("loo cap m4", c.loo_caps[1], 4.0);
    audit("loo cap m6", c.loo_caps[2], 42.0);
    audit("loo cap abs3", c.loo_caps[1].powf(0.75), 4.0f64.powf(0.75));
    audit(
        "loo cap abs5",
        c.loo_caps[2].powf(5.0 / 6.0),
        42.0f64.powf(5.0 / 6.0),
    );

    // derivative catalog at (r, λ) = (1, 1), k = 2..3, unit norms
    let params11 = GammaParams::new(1.0, 1.0).unwrap();
    let cat = bound_catalog_with(c, params11, 2, &norms5).unwrap();
    audit("catalog order_scaled", cat.derivative["order_scaled"], 0.5);
    audit(
        "catalog shape_sqrt",
        cat.derivative["shape_sqrt"],
        3.03258389841696,
    );
    audit("catalog shape_linear", cat.derivative["shape_linear"], 5.0);
    audit("catalog xf equation", cat.x_weighted["equation"], 4.0);
    audit(
        "catalog xf shape_sqrt_rate",
        cat.x_weighted["shape_sqrt_rate"],
        4.0 * (2.0 + 2.0f64.sqrt()),
    );
    let cat3 = bound_catalog_with(c, params11, 3, &norms5).unwrap();
    audit("catalog xf shifted_shape", cat3.x_weighted["shifted_shape"], 4.0);
    let params_chi = GammaParams::new(1.0, 0.5).unwrap();
    let cat_chi = bound_catalog_with(c, params_chi, 2, &norms5).unwrap();
    audit("catalog chisq", cat_chi.derivative["chisq"], 4.0);

    // ψ envelopes at x = 1, unit norms
    let env = crate::normal_stein::psi_envelopes_with(c, 1.0, 1.0, 1.0, 1.0);
    audit("psi sup", env.sup, 9.0);
    audit("psi x-slope", env.x_slope, 14.0);
    audit("psi second", env.second, 48.0);

    // odd-solution envelopes at the origin and at the all-ones point
    let norms_f = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
    let zero = vec![0.0; 4];
    let ones = vec![1.0; 4];
    use crate::normal_stein::{third_partial_envelope_with, OddTestFunction};
    let v = third_partial_envelope_with(c, OddTestFunction::Linear, &norms_f, 3, (0, 1, 2), &zero);
    audit("odd linear at 0", v, 0.5 + 32.0 / 5.0 + 512.0 / 35.0);
    let v = third_partial_envelope_with(c, OddTestFunction::Linear, &norms_f, 3, (0, 1, 2), &ones);
    audit("odd linear at 1", v, 0.5 + 16.0 + 832.0 / 35.0);
    let v = third_partial_envelope_with(c, OddTestFunction::Cubic, &norms_f, 3, (0, 1, 2), &zero);
    audit(
        "odd cubic at 0",
        v,
        0.5 + 9.6 + 8.0 / 35.0 * 384.0 + 4096.0 / 21.0,
    );
    let v = third_partial_envelope_with(c, OddTestFunction::Cubic, &norms_f, 3, (0, 1, 2), &ones);
    audit(
        "odd cubic at 1",
        v,
        0.5 + 2.4 * 10.0 + 8.0 / 35.0 * (384.0 + 240.0) + 4096.0 / 21.0 + 128.0 / 27.0 * 6.0,
    );

    // reference α picks at n = 1000
    audit(
        "alpha pick m=2",
        c.kolmogorov_alpha[0] * 1000f64.powf(-0.2),
        13.250200926213035,
    );
    audit(
        "alpha pick m=3",
        c.kolmogorov_alpha[1] * 1000f64.powf(-1.0 / 6.0),
        7.991075647245495,
    );
    audit(
        "alpha pick m>=4",
        c.kolmogorov_alpha[2] * 1000f64.powf(-1.0 / 6.0),
        9.670245084794903,
    );

    rows
}

/// Every stored constant, multiplied by 10 one at a time, must trip at
/// least one audit row.
pub fn mutation_sensitivity(base: &Constants) -> CriterionReport {
    let mut checks = Vec::new();
    // the unmutated table must audit clean
    let clean = audit_constants(base);
    let clean_ok = clean.iter().all(|r| r.passed);
    checks.push(CheckRow::ge(
        "baseline audit clean (1 = yes)",
        if clean_ok { 1.0 } else { 0.0 },
        1.0,
    ));
    let count = base.scalar_count();
    let mut undetected = Vec::new();
    for idx in 0..count {
        let (label, mutated) = base.mutated(idx, 10.0).expect("index in range");
        let rows = audit_constants(&mutated);
        if rows.iter().all(|r| r.passed) {
            undetected.push(label);
        }
    }
    checks.push(CheckRow::le(
        format!(
            "undetected mutations out of {count}{}",
            if undetected.is_empty() {
                String::new()
            } else {
                format!(" ({})", undetected.join(", "))
            }
        ),
        undetected.len() as f64,
        0.0,
    ));
    CriterionReport::from_checks("mutation-sensitivity", checks)
}

/// Run the whole suite.
pub fn run_all(scale: Scale, seed: u64) -> Result<Vec<CriterionReport>> {
    let constants = Constants::published();
    Ok(vec![
        stein_residual(scale)?,
        derivative_bound_domination(&constants, scale)?,
        shape_decay_order(scale)?,
        leave_one_out_oracle(&constants)?,
        operator_identity(scale)?,
        pearson_domination(&constants, scale)?,
        rate_recovery(scale)?,
        squared_clt_domination(&constants, scale, seed)?,
        kernel_and_sampler(scale, seed)?,
        mutation_sensitivity(&constants),
    ])
}
