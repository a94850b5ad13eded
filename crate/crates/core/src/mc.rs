//! Monte Carlo validation scenarios.
//!
//! Every replicate draws from its own ChaCha8 stream `(seed, replicate)`, so
//! results are bit-identical across runs and thread counts. Sampling schemes
//! that are held fixed across replicates come from the reserved stream
//! `u64::MAX`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::avar::{acov_rc_hat, acov_theory, svec_pairs, Regime, TheoryInputs};
use crate::citest::{ci_test, CiConfig};
use crate::error::{CovestError, Result};
use crate::estimators::{
    generalized_multiscale, hayashi_yoshida, kernel_adjusted, kernel_estimator, multiscale,
    multiscale_adjusted, multiscale_frequency, noise_covariance, realized_cov, EstimateConfig,
    Method,
};
use crate::kernels::{cubic_weights, KernelFunction};
use crate::sampling::{
    global_refresh_of, pairwise_refresh, time_covariations, weighted_lasa_function,
};
use crate::sim::{
    sample_scheme, simulate_dataset, simulate_dataset_on, ItoModelConfig, NoiseConfig, NoiseLaw,
    SamplingKind,
};

/// Random-number generator of replicate `r` under a master seed.
pub fn replicate_rng(seed: u64, r: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r);
    rng
}

/// Runs `f` for replicates `0..replicates` in parallel, keeping replicate order.
pub fn run_replicates<T, F>(replicates: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> Result<T> + Sync,
{
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r as u64);
            f(&mut rng, r)
        })
        .collect()
}

/// Sample mean.
pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample covariance.
pub fn sample_cov(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / (x.len() as f64 - 1.0)
}

/// Unbiased sample standard deviation.
pub fn sample_sd(x: &[f64]) -> f64 {
    sample_cov(x, x).sqrt()
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Validation scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Realized-covariance CLT on a constant-Σ model.
    RcClt,
    /// Covariance of two Hayashi–Yoshida estimates on Poisson schemes.
    HyCov,
    /// Covariance of two generalized multi-scale estimates on disjoint Poisson schemes.
    GmsCov,
    /// Equivalence of multi-scale and kernel estimators.
    MsEquiv,
    /// Size of the conditional-independence test.
    CiSize,
    /// Power of the conditional-independence test.
    CiPower,
    /// RMSE rate of Hayashi–Yoshida on noiseless Poisson data.
    HyRate,
    /// RMSE rate of generalized multi-scale on noisy Poisson data.
    GmsRate,
}

impl Scenario {
    /// Parses the snake-case scenario name.
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "rc_clt" => Self::RcClt,
            "hy_cov" => Self::HyCov,
            "gms_cov" => Self::GmsCov,
            "ms_equiv" => Self::MsEquiv,
            "ci_size" => Self::CiSize,
            "ci_power" => Self::CiPower,
            "hy_rate" => Self::HyRate,
            "gms_rate" => Self::GmsRate,
            other => {
                return Err(CovestError::InvalidParameter(format!(
                    "unknown scenario '{other}'"
                )))
            }
        })
    }

    /// Snake-case name.
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::RcClt => "rc_clt",
            Self::HyCov => "hy_cov",
            Self::GmsCov => "gms_cov",
            Self::MsEquiv => "ms_equiv",
            Self::CiSize => "ci_size",
            Self::CiPower => "ci_power",
            Self::HyRate => "hy_rate",
            Self::GmsRate => "gms_rate",
        }
    }

    /// Default sample size (observations per component, or Poisson rate).
    pub fn default_n(&self) -> usize {
        match self {
            Self::RcClt => 5000,
            Self::HyCov => 1000,
            Self::GmsCov => 2000,
            Self::MsEquiv => 10_000,
            Self::CiSize | Self::CiPower => 2000,
            Self::HyRate | Self::GmsRate => 2000,
        }
    }
}

/// Scenario with optional size overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub n: Option<usize>,
    /// Sample sizes of the rate scenarios.
    pub rate_ns: Option<Vec<usize>>,
}

impl ScenarioSpec {
    /// Scenario with default sizes.
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            n: None,
            rate_ns: None,
        }
    }

    /// Overrides the sample size.
    pub fn with_n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    fn n(&self) -> usize {
        self.n.unwrap_or_else(|| self.scenario.default_n())
    }
}

/// Empirical quantity compared with its theoretical value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCheck {
    pub name: String,
    pub empirical: f64,
    pub theory: f64,
    /// `|empirical − theory| / |theory|`.
    pub rel_error: f64,
}

impl McCheck {
    fn new(name: impl Into<String>, empirical: f64, theory: f64) -> Self {
        Self {
            name: name.into(),
            empirical,
            theory,
            rel_error: (empirical - theory).abs() / theory.abs(),
        }
    }
}

/// Summary of a validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub scenario: String,
    pub replicates: usize,
    pub seed: u64,
    pub n: usize,
    pub metrics: BTreeMap<String, f64>,
    pub checks: Vec<McCheck>,
}

/// Spot covariance of the four-component validation model.
pub fn validation_sigma() -> DMatrix<f64> {
    let vols = [1.0, 0.8, 1.2, 0.9];
    let corr = DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, 0.6, 0.4, 0.3, //
            0.6, 1.0, 0.5, 0.2, //
            0.4, 0.5, 1.0, 0.45, //
            0.3, 0.2, 0.45, 1.0,
        ],
    );
    DMatrix::from_fn(4, 4, |i, j| vols[i] * vols[j] * corr[(i, j)])
}

/// Spot covariance of `(X1, X2, Z)` with `X_i = ρ_i Z + orthogonal part`,
/// unit variances of `Z` and of the orthogonal parts, and orthogonal covariation `κ`.
pub fn ci_sigma(rho1: f64, rho2: f64, kappa: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        3,
        &[
            rho1 * rho1 + 1.0,
            rho1 * rho2 + kappa,
            rho1,
            rho1 * rho2 + kappa,
            rho2 * rho2 + 1.0,
            rho2,
            rho1,
            rho2,
            1.0,
        ],
    )
}

/// Pair-of-pairs combinations examined by the realized-covariance CLT scenario.
pub const RC_CLT_COMBOS: [((usize, usize), (usize, usize)); 10] = [
    ((0, 0), (0, 0)),
    ((0, 1), (0, 1)),
    ((2, 3), (2, 3)),
    ((1, 2), (1, 2)),
    ((0, 0), (1, 1)),
    ((0, 1), (2, 3)),
    ((0, 2), (1, 3)),
    ((0, 1), (0, 2)),
    ((0, 3), (1, 2)),
    ((1, 1), (2, 2)),
];

fn combo_name(c: &((usize, usize), (usize, usize))) -> String {
    let ((a, b), (r, q)) = c;
    format!("{}{}_{}{}", a + 1, b + 1, r + 1, q + 1)
}

fn fixed_rng(seed: u64) -> ChaCha8Rng {
    replicate_rng(seed, u64::MAX)
}

/// Runs a validation scenario with `replicates ≥ 100` replicates.
pub fn mc_validate(spec: &ScenarioSpec, replicates: usize, seed: u64) -> Result<McReport> {
    if replicates < 100 {
        return Err(CovestError::TooFew {
            what: "Monte Carlo replicates",
            required: 100,
            actual: replicates,
        });
    }
    let mut report = McReport {
        scenario: spec.scenario.as_str().into(),
        replicates,
        seed,
        n: spec.n(),
        metrics: BTreeMap::new(),
        checks: Vec::new(),
    };
    match spec.scenario {
        Scenario::RcClt => rc_clt(spec.n(), replicates, seed, &mut report)?,
        Scenario::HyCov => hy_cov(spec.n(), replicates, seed, &mut report)?,
        Scenario::GmsCov => gms_cov(spec.n(), replicates, seed, &mut report)?,
        Scenario::MsEquiv => ms_equiv(spec.n(), replicates, seed, &mut report)?,
        Scenario::CiSize => ci_rejection(spec.n(), replicates, seed, 0.0, &mut report)?,
        Scenario::CiPower => ci_rejection(spec.n(), replicates, seed, 0.5, &mut report)?,
        Scenario::HyRate | Scenario::GmsRate => {
            let ns = spec
                .rate_ns
                .clone()
                .unwrap_or_else(|| vec![500, 2000, 8000, 32000]);
            let study = rmse_study(spec.scenario == Scenario::GmsRate, &ns, replicates, seed)?;
            for (n, r) in ns.iter().zip(&study.rmse) {
                report.metrics.insert(format!("rmse_n{n}"), *r);
            }
            report.metrics.insert("slope".into(), study.slope);
        }
    }
    Ok(report)
}

fn rc_clt(n: usize, replicates: usize, seed: u64, report: &mut McReport) -> Result<()> {
    let sigma = validation_sigma();
    let model = ItoModelConfig::constant(sigma.clone(), 1.0, n);
    let sampling = SamplingKind::Equidistant { n };
    let noise = NoiseConfig::none(4);
    let pairs = svec_pairs(4);
    let reps = run_replicates(replicates, seed, |rng, _| {
        let (data, _) = simulate_dataset(&model, &sampling, &noise, rng)?;
        let est: Vec<f64> = pairs
            .iter()
            .map(|&(k, l)| realized_cov(&data[k], &data[l]))
            .collect::<Result<_>>()?;
        let avar: Vec<f64> = pairs
            .iter()
            .map(|&kl| acov_rc_hat(&data, (kl, kl)))
            .collect::<Result<_>>()?;
        Ok((est, avar))
    })?;
    let theory = TheoryInputs::constant(sigma.clone(), 1.0);
    let idx = |kl: (usize, usize)| pairs.iter().position(|&p| p == kl).unwrap();
    let mut within = 0;
    for combo in RC_CLT_COMBOS.iter() {
        let (i, j) = (idx(combo.0), idx(combo.1));
        let xi: Vec<f64> = reps.iter().map(|r| r.0[i]).collect();
        let xj: Vec<f64> = reps.iter().map(|r| r.0[j]).collect();
        let emp = n as f64 * sample_cov(&xi, &xj);
        let th = acov_theory(&theory, Regime::Rc, *combo)?;
        let check = McCheck::new(format!("ncov_{}", combo_name(combo)), emp, th);
        if check.rel_error <= 0.10 {
            within += 1;
        }
        report.checks.push(check);
    }
    let mut covered = 0usize;
    let mut total = 0usize;
    for (est, avar) in &reps {
        for (e, (v, &(k, l))) in est.iter().zip(avar.iter().zip(&pairs)) {
            let half = 1.96 * (v.max(0.0) / n as f64).sqrt();
            if (e - sigma[(k, l)]).abs() <= half {
                covered += 1;
            }
            total += 1;
        }
    }
    report.metrics.insert("within_10pct".into(), within as f64);
    report
        .metrics
        .insert("coverage_95".into(), covered as f64 / total as f64);
    Ok(())
}

fn poisson_rates(n: usize, p: usize) -> Vec<f64> {
    vec![n as f64; p]
}

fn hy_cov(n: usize, replicates: usize, seed: u64, report: &mut McReport) -> Result<()> {
    let sigma = validation_sigma();
    let model = ItoModelConfig::constant(sigma.clone(), 1.0, n);
    let sampling = SamplingKind::Poisson {
        rates: poisson_rates(n, 4),
        augment: true,
    };
    let schemes = sample_scheme(&sampling, 4, 1.0, &mut fixed_rng(seed))?;
    let noise = NoiseConfig::none(4);
    let reps = run_replicates(replicates, seed, |rng, _| {
        let (data, _) = simulate_dataset_on(&model, &schemes, &noise, rng)?;
        Ok((
            hayashi_yoshida(&data[0], &data[1])?,
            hayashi_yoshida(&data[2], &data[3])?,
        ))
    })?;
    let global = global_refresh_of([&schemes[0], &schemes[1], &schemes[2], &schemes[3]])?;
    let big_n = global.count() as f64;
    let mut theory = TheoryInputs::constant(sigma, 1.0);
    theory.time_covariations = Some(time_covariations(&global)?);
    let th = acov_theory(&theory, Regime::Hy, ((0, 1), (2, 3)))?;
    let a: Vec<f64> = reps.iter().map(|r| r.0).collect();
    let b: Vec<f64> = reps.iter().map(|r| r.1).collect();
    report.checks.push(McCheck::new(
        "ncov_hy12_hy34",
        big_n * sample_cov(&a, &b),
        th,
    ));
    report.metrics.insert("global_refresh_count".into(), big_n);
    Ok(())
}

fn gms_cov(n: usize, replicates: usize, seed: u64, report: &mut McReport) -> Result<()> {
    let sigma = validation_sigma();
    let model = ItoModelConfig::constant(sigma.clone(), 1.0, n);
    let sampling = SamplingKind::Poisson {
        rates: poisson_rates(n, 4),
        augment: false,
    };
    let schemes = sample_scheme(&sampling, 4, 1.0, &mut fixed_rng(seed))?;
    let noise = NoiseConfig::independent(&[1e-3; 4]);
    let g12 = pairwise_refresh(&schemes[0], &schemes[1])?;
    let g34 = pairwise_refresh(&schemes[2], &schemes[3])?;
    let m12 = multiscale_frequency(1.0, g12.count());
    let m34 = multiscale_frequency(1.0, g34.count());
    let (w12, w34) = (cubic_weights(m12)?, cubic_weights(m34)?);
    let reps = run_replicates(replicates, seed, |rng, _| {
        let (data, _) = simulate_dataset_on(&model, &schemes, &noise, rng)?;
        Ok((
            generalized_multiscale(&data[0], &data[1], &w12)?,
            generalized_multiscale(&data[2], &data[3], &w34)?,
        ))
    })?;
    let global = global_refresh_of([&schemes[0], &schemes[1], &schemes[2], &schemes[3]])?;
    let big_n = global.count();
    let m = m12.min(m34);
    let mut theory = TheoryInputs::constant(sigma, 1.0);
    theory.c = m as f64 / (big_n as f64).sqrt();
    theory.lasa = Some(weighted_lasa_function(
        global.grid().refresh(),
        &cubic_weights(m)?,
    )?);
    let th = acov_theory(&theory, Regime::Gms, ((0, 1), (2, 3)))?;
    let a: Vec<f64> = reps.iter().map(|r| r.0).collect();
    let b: Vec<f64> = reps.iter().map(|r| r.1).collect();
    report.checks.push(McCheck::new(
        "sqrtn_cov_gms12_gms34",
        (big_n as f64).sqrt() * sample_cov(&a, &b),
        th,
    ));
    report
        .metrics
        .insert("global_refresh_count".into(), big_n as f64);
    Ok(())
}

/// Outcome of the multi-scale/kernel equivalence experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceStudy {
    pub sd_ms_adjusted: f64,
    pub mean_abs_diff_adjusted: f64,
    pub mean_raw_bias_corrected: f64,
}

/// Multi-scale versus kernel estimates on noisy equidistant bivariate paths.
pub fn equivalence_study(
    n: usize,
    eta: f64,
    replicates: usize,
    seed: u64,
) -> Result<EquivalenceStudy> {
    let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
    let model = ItoModelConfig::constant(sigma, 1.0, n);
    let sampling = SamplingKind::Equidistant { n };
    let e2 = eta * eta;
    let noise = NoiseConfig {
        h: DMatrix::from_row_slice(2, 2, &[e2, 0.5 * e2, 0.5 * e2, e2]),
        law: NoiseLaw::Gaussian,
    };
    let m = multiscale_frequency(1.0, n);
    let w = cubic_weights(m)?;
    let k = KernelFunction::cubic();
    let reps = run_replicates(replicates, seed, |rng, _| {
        let (d, _) = simulate_dataset(&model, &sampling, &noise, rng)?;
        Ok([
            multiscale_adjusted(&d[0], &d[1], &w)?,
            kernel_adjusted(&d[0], &d[1], &k, m)?,
            multiscale(&d[0], &d[1], &w)?,
            kernel_estimator(&d[0], &d[1], &k, m)?,
            noise_covariance(&d[0], &d[1]),
        ])
    })?;
    let ms_adj: Vec<f64> = reps.iter().map(|r| r[0]).collect();
    let diff: Vec<f64> = reps.iter().map(|r| (r[0] - r[1]).abs()).collect();
    let raw: Vec<f64> = reps.iter().map(|r| r[2] - r[3] + 4.0 * r[4]).collect();
    Ok(EquivalenceStudy {
        sd_ms_adjusted: sample_sd(&ms_adj),
        mean_abs_diff_adjusted: mean(&diff),
        mean_raw_bias_corrected: mean(&raw),
    })
}

fn ms_equiv(n: usize, replicates: usize, seed: u64, report: &mut McReport) -> Result<()> {
    let s = equivalence_study(n, 5e-4, replicates, seed)?;
    report
        .metrics
        .insert("sd_ms_adjusted".into(), s.sd_ms_adjusted);
    report
        .metrics
        .insert("mean_abs_diff_adjusted".into(), s.mean_abs_diff_adjusted);
    report
        .metrics
        .insert("mean_raw_bias_corrected".into(), s.mean_raw_bias_corrected);
    report.metrics.insert(
        "ratio_adjusted".into(),
        s.mean_abs_diff_adjusted / s.sd_ms_adjusted,
    );
    report.metrics.insert(
        "ratio_raw".into(),
        s.mean_raw_bias_corrected.abs() / s.sd_ms_adjusted,
    );
    Ok(())
}

/// Rejection statistics of the conditional-independence test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionStudy {
    pub rejection_rate: f64,
    pub inconclusive: usize,
    pub mean_statistic: f64,
}

/// Rejection rate at the 5% level for the test with `rc` on noiseless synchronous data.
pub fn rejection_study(
    n: usize,
    kappa: f64,
    replicates: usize,
    seed: u64,
) -> Result<RejectionStudy> {
    let model = ItoModelConfig::constant(ci_sigma(0.5, 2.0, kappa), 1.0, n);
    let sampling = SamplingKind::Equidistant { n };
    let noise = NoiseConfig::none(3);
    let config = CiConfig {
        estimate: EstimateConfig::default(),
        ..CiConfig::default()
    };
    let reps = run_replicates(replicates, seed, |rng, _| {
        let (d, _) = simulate_dataset(&model, &sampling, &noise, rng)?;
        ci_test(&d[0], &d[1], &d[2], Method::Rc, &config)
    })?;
    let inconclusive = reps.iter().filter(|r| r.inconclusive).count();
    let rejected = reps
        .iter()
        .filter(|r| r.p_value.is_some_and(|p| p < 0.05))
        .count();
    Ok(RejectionStudy {
        rejection_rate: rejected as f64 / reps.len() as f64,
        inconclusive,
        mean_statistic: mean(&reps.iter().map(|r| r.statistic).collect::<Vec<_>>()),
    })
}

fn ci_rejection(
    n: usize,
    replicates: usize,
    seed: u64,
    kappa: f64,
    report: &mut McReport,
) -> Result<()> {
    let s = rejection_study(n, kappa, replicates, seed)?;
    report
        .metrics
        .insert("rejection_rate".into(), s.rejection_rate);
    report
        .metrics
        .insert("inconclusive".into(), s.inconclusive as f64);
    report
        .metrics
        .insert("mean_statistic".into(), s.mean_statistic);
    report.metrics.insert("kappa".into(), kappa);
    Ok(())
}

/// RMSE of an estimator over a range of sample sizes with the log-log slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseStudy {
    pub ns: Vec<usize>,
    pub rmse: Vec<f64>,
    pub slope: f64,
}

/// RMSE of Hayashi–Yoshida (noiseless) or generalized multi-scale (noisy) on bivariate Poisson data.
pub fn rmse_study(gms: bool, ns: &[usize], replicates: usize, seed: u64) -> Result<RmseStudy> {
    let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
    let target = sigma[(0, 1)];
    let noise = if gms {
        NoiseConfig::independent(&[5e-3, 5e-3])
    } else {
        NoiseConfig::none(2)
    };
    let config = EstimateConfig::default();
    let mut rmse = Vec::with_capacity(ns.len());
    for &n in ns {
        let model = ItoModelConfig::constant(sigma.clone(), 1.0, n);
        let sampling = SamplingKind::Poisson {
            rates: vec![n as f64; 2],
            augment: true,
        };
        let base = seed.wrapping_add((n as u64).wrapping_mul(1_000_003));
        let errs = run_replicates(replicates, base, |rng, _| {
            let (d, _) = simulate_dataset(&model, &sampling, &noise, rng)?;
            let est = if gms {
                crate::estimators::estimate_pair(&d[0], &d[1], Method::Gms, &config, config.c)?.0
            } else {
                hayashi_yoshida(&d[0], &d[1])?
            };
            Ok((est - target).powi(2))
        })?;
        rmse.push(mean(&errs).sqrt());
    }
    let lx: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = rmse.iter().map(|r| r.ln()).collect();
    Ok(RmseStudy {
        ns: ns.to_vec(),
        slope: ols_slope(&lx, &ly),
        rmse,
    })
}
