//! Asymptotic covariances of integrated-covariance estimators.
//!
//! Normalisations of the returned asymptotic covariances:
//!
//! | regime          | quantity approximated                    |
//! |-----------------|------------------------------------------|
//! | `rc`            | `n · Cov` (n synchronous intervals)      |
//! | `hy`            | `N · Cov` (N global refresh intervals)   |
//! | `ms_sync`/`gms` | `√N · Cov`                               |
//!
//! Theory formulas with constant-in-time inputs:
//!
//! ```text
//! rc      T ∫ (σ13σ24 + σ14σ23) ds
//! hy      T ∫ (σ13σ24 + σ14σ23) dG + T ∫ σ13σ24 d(F+H+I)_24^13 + T ∫ σ14σ23 d(F+H+I)_23^14
//! ms_sync 4𝔇cT ∫ (σ13σ24 + σ14σ23) ds + 2𝔑₁c⁻³ (η13η24 + η14η23) + c⁻¹𝔑₂ (η13η24 + η14η23)
//!         + 2𝔐c⁻¹ ∫ (η13σ24 + η24σ13 + η14σ23 + η23σ14) ds
//! gms     2cT ∫ (σ13σ24 + σ14σ23) dD^α + c⁻³ 2𝔑₁ (𝔖13 η13η24 + 𝔖14 η14η23)
//!         + c⁻¹ 𝔑₂ (𝔖̃13 η13η24 + 𝔖̃14 η14η23) + 2𝔐c⁻¹ T ∫ (η13σ24 dS13 + …)
//! ```

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CovestError, Result};
use crate::estimators::{
    generalized_multiscale_on, hayashi_yoshida, multiscale_frequency, noise_covariance,
    noise_variance, Method, TickSeries,
};
use crate::kernels::{
    builtin_kernel, end_effect_adjust, kernel_constants, weights_for, KernelConstants,
};
use crate::sampling::{
    global_refresh, pairwise_refresh, sync_overlap, weighted_lasa_function, StepFunction,
    SyncOverlap, TimeCovariationBundle,
};

/// Gaussian fourth-moment identity `Cov(Z_i Z_l, Z_m Z_u) = Σ_im Σ_lu + Σ_iu Σ_lm` (0-based indices).
pub fn isserlis_cov(sigma: &DMatrix<f64>, idx: (usize, usize, usize, usize)) -> Result<f64> {
    let p = sigma.nrows();
    let (i, l, m, u) = idx;
    for index in [i, l, m, u] {
        if index >= p {
            return Err(CovestError::IndexOutOfRange { index, dim: p });
        }
    }
    Ok(sigma[(i, m)] * sigma[(l, u)] + sigma[(i, u)] * sigma[(l, m)])
}

/// 0-based position of entry `(k, l)`, `k ≤ l`, in the row-wise upper-triangle packing.
pub fn svec_index(p: usize, k: usize, l: usize) -> Result<usize> {
    if l >= p {
        return Err(CovestError::IndexOutOfRange { index: l, dim: p });
    }
    if k > l {
        return Err(CovestError::InvalidParameter(format!(
            "svec index requires k ≤ l, got ({k}, {l})"
        )));
    }
    Ok(k * p - k * k.saturating_sub(1) / 2 + (l - k))
}

/// Packed length `p(p+1)/2`.
pub fn svec_len(p: usize) -> usize {
    p * (p + 1) / 2
}

/// Index pairs `(k, l)`, `k ≤ l`, in packing order.
pub fn svec_pairs(p: usize) -> Vec<(usize, usize)> {
    (0..p).flat_map(|k| (k..p).map(move |l| (k, l))).collect()
}

/// Packs the upper triangle of a square matrix row by row.
pub fn svec_pack(a: &DMatrix<f64>) -> Vec<f64> {
    svec_pairs(a.nrows())
        .into_iter()
        .map(|(k, l)| a[(k, l)])
        .collect()
}

/// Inverse of [`svec_pack`].
pub fn svec_unpack(v: &[f64], p: usize) -> Result<DMatrix<f64>> {
    if v.len() != svec_len(p) {
        return Err(CovestError::InvalidParameter(format!(
            "packed length {} does not match p = {p}",
            v.len()
        )));
    }
    let mut a = DMatrix::zeros(p, p);
    for (x, (k, l)) in v.iter().zip(svec_pairs(p)) {
        a[(k, l)] = *x;
        a[(l, k)] = *x;
    }
    Ok(a)
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of free entries `q(q+1)/2` of the asymptotic covariance matrix, `q = p(p+1)/2`.
pub fn acov_free_entries(p: usize) -> usize {
    let q = svec_len(p);
    q * (q + 1) / 2
}

/// Combinatorial count `p + 3C(p,4) + 6C(p,3) + 4C(p,2)` of distinct index patterns.
pub fn dim_identity_rhs(p: usize) -> usize {
    p + 3 * binomial(p, 4) + 6 * binomial(p, 3) + 4 * binomial(p, 2)
}

/// Convergence rate of an estimator family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rate {
    /// `√n`, noiseless observations.
    SqrtN,
    /// `n^{1/4}`, noisy observations.
    NQuarter,
}

impl Rate {
    /// Rate of a given estimation method.
    pub fn for_method(method: Method) -> Self {
        if method.is_noise_robust() {
            Self::NQuarter
        } else {
            Self::SqrtN
        }
    }

    /// `r_n` evaluated at `n`.
    pub fn factor(&self, n: f64) -> f64 {
        match self {
            Self::SqrtN => n.sqrt(),
            Self::NQuarter => n.powf(0.25),
        }
    }

    /// Exponent `e` with `r_n² = n^e · r_1²`.
    pub fn variance_exponent(&self) -> f64 {
        match self {
            Self::SqrtN => 1.0,
            Self::NQuarter => 0.5,
        }
    }
}

/// Regime of a theoretical asymptotic covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Rc,
    MsSync,
    Hy,
    Gms,
}

/// Model quantities entering the theoretical asymptotic covariances.
#[derive(Debug, Clone)]
pub struct TheoryInputs {
    /// Grid `s_0 < … < s_K = T` on which the spot covariance is piecewise constant.
    pub grid: Vec<f64>,
    /// Spot covariance `Σ_s` on each cell `(s_k, s_{k+1}]`.
    pub sigma: Vec<DMatrix<f64>>,
    /// Noise covariance `𝐇`.
    pub noise: DMatrix<f64>,
    /// Tuning constant `c`.
    pub c: f64,
    /// Kernel constants for `ms_sync` and the noise terms of `gms`.
    pub constants: Option<KernelConstants>,
    /// Quadratic covariations of times for `hy`.
    pub time_covariations: Option<TimeCovariationBundle>,
    /// Weighted local sampling autocorrelation `D^α_N` for `gms`.
    pub lasa: Option<StepFunction>,
    /// Synchronous-overlap functions for `gms`.
    pub overlap: Option<SyncOverlap>,
}

impl TheoryInputs {
    /// Inputs for a constant spot covariance on `[0, T]`.
    pub fn constant(sigma: DMatrix<f64>, horizon: f64) -> Self {
        let p = sigma.nrows();
        Self {
            grid: vec![0.0, horizon],
            sigma: vec![sigma],
            noise: DMatrix::zeros(p, p),
            c: 1.0,
            constants: None,
            time_covariations: None,
            lasa: None,
            overlap: None,
        }
    }

    /// Horizon `T`.
    pub fn horizon(&self) -> f64 {
        *self.grid.last().unwrap_or(&0.0)
    }

    fn cell_values(&self, f: impl Fn(&DMatrix<f64>) -> f64) -> Vec<f64> {
        self.sigma.iter().map(f).collect()
    }

    fn time_integral(&self, f: impl Fn(&DMatrix<f64>) -> f64) -> f64 {
        self.grid
            .windows(2)
            .zip(&self.sigma)
            .map(|(w, s)| f(s) * (w[1] - w[0]))
            .sum()
    }

    fn validate(&self) -> Result<()> {
        if self.grid.len() != self.sigma.len() + 1 || self.sigma.is_empty() {
            return Err(CovestError::InvalidParameter(
                "spot covariance needs one matrix per grid cell".into(),
            ));
        }
        Ok(())
    }
}

fn missing(what: &str, regime: &str) -> CovestError {
    CovestError::InvalidParameter(format!("{what} required for regime {regime}"))
}

/// Theoretical asymptotic covariance of the estimates of `[X_k, X_l]` and `[X_r, X_q]`.
///
/// Components are 0-based and play the roles `(1, 2, 3, 4) = (k, l, r, q)`.
/// Time-design inputs (`time_covariations`, `lasa`, `overlap`) must have been
/// computed for exactly these four components.
pub fn acov_theory(
    model: &TheoryInputs,
    regime: Regime,
    pairs: ((usize, usize), (usize, usize)),
) -> Result<f64> {
    model.validate()?;
    let ((a, b), (r, q)) = pairs;
    let p = model.sigma[0].nrows();
    for index in [a, b, r, q] {
        if index >= p {
            return Err(CovestError::IndexOutOfRange { index, dim: p });
        }
    }
    let t = model.horizon();
    let c = model.c;
    let eta = |i: usize, j: usize| model.noise[(i, j)];
    let both = |s: &DMatrix<f64>| s[(a, r)] * s[(b, q)] + s[(a, q)] * s[(b, r)];
    match regime {
        Regime::Rc => Ok(t * model.time_integral(both)),
        Regime::Hy => {
            let tc = model
                .time_covariations
                .as_ref()
                .ok_or_else(|| missing("time covariations", "hy"))?;
            let g = &model.grid;
            let s1324 = model.cell_values(|s| s[(a, r)] * s[(b, q)]);
            let s1423 = model.cell_values(|s| s[(a, q)] * s[(b, r)]);
            let sum = model.cell_values(both);
            Ok(t * (tc.g.stieltjes(g, &sum)
                + tc.f_24_13.stieltjes(g, &s1324)
                + tc.h_24_13.stieltjes(g, &s1324)
                + tc.i_24_13.stieltjes(g, &s1324)
                + tc.f_23_14.stieltjes(g, &s1423)
                + tc.h_23_14.stieltjes(g, &s1423)
                + tc.i_23_14.stieltjes(g, &s1423)))
        }
        Regime::MsSync => {
            let k = model
                .constants
                .ok_or_else(|| missing("kernel constants", "ms_sync"))?;
            let nn = eta(a, r) * eta(b, q) + eta(a, q) * eta(b, r);
            let cross = model.time_integral(|s| {
                eta(a, r) * s[(b, q)]
                    + eta(b, q) * s[(a, r)]
                    + eta(a, q) * s[(b, r)]
                    + eta(b, r) * s[(a, q)]
            });
            Ok(4.0 * k.d * c * t * model.time_integral(both)
                + 2.0 * k.n1 * c.powi(-3) * nn
                + k.n2 / c * nn
                + 2.0 * k.m_const / c * cross)
        }
        Regime::Gms => {
            let d = model
                .lasa
                .as_ref()
                .ok_or_else(|| missing("weighted LASA", "gms"))?;
            let g = &model.grid;
            let signal = 2.0 * c * t * d.stieltjes(g, &model.cell_values(both));
            let Some(ov) = model.overlap.as_ref() else {
                return Ok(signal);
            };
            if ov.is_disjoint()
                && [ov.frak_13_24, ov.frak_14_23, ov.tilde_13_24, ov.tilde_14_23]
                    .iter()
                    .all(|&x| x == 0.0)
            {
                return Ok(signal);
            }
            let k = model
                .constants
                .ok_or_else(|| missing("kernel constants", "gms with synchronous observations"))?;
            let (e1324, e1423) = (eta(a, r) * eta(b, q), eta(a, q) * eta(b, r));
            let noise = c.powi(-3) * 2.0 * k.n1 * (ov.frak_13_24 * e1324 + ov.frak_14_23 * e1423)
                + k.n2 / c * (ov.tilde_13_24 * e1324 + ov.tilde_14_23 * e1423);
            let cross = eta(a, r) * ov.s13.stieltjes(g, &model.cell_values(|s| s[(b, q)]))
                + eta(b, q) * ov.s24.stieltjes(g, &model.cell_values(|s| s[(a, r)]))
                + eta(a, q) * ov.s14.stieltjes(g, &model.cell_values(|s| s[(b, r)]))
                + eta(b, r) * ov.s23.stieltjes(g, &model.cell_values(|s| s[(a, q)]));
            Ok(signal + noise + 2.0 * k.m_const / c * t * cross)
        }
    }
}

fn check_sync_data(data: &[&TickSeries]) -> Result<usize> {
    let first = data[0];
    if data.iter().any(|s| s.times() != first.times()) {
        return Err(CovestError::NotSynchronous);
    }
    let n = first.intervals();
    if n < 2 {
        return Err(CovestError::TooFew {
            what: "synchronous intervals",
            required: 2,
            actual: n,
        });
    }
    Ok(n)
}

fn rc_display(d: [&[f64]; 4], n: usize) -> f64 {
    let [k, l, r, q] = d;
    (0..n - 1)
        .map(|i| k[i] * l[i + 1] * r[i] * q[i + 1] + k[i + 1] * l[i] * r[i] * q[i + 1])
        .sum()
}

/// Bipower-type estimate of `n · ACOV(RC_kl, RC_rq)` from synchronous noiseless data.
///
/// The display is averaged over the swap of the two index pairs and over the
/// order within the second pair, which makes the estimator invariant under
/// every relabelling of `[X_k, X_l]` and `[X_r, X_q]`.
pub fn acov_rc_hat(data: &[TickSeries], pairs: ((usize, usize), (usize, usize))) -> Result<f64> {
    let ((k, l), (r, q)) = pairs;
    for index in [k, l, r, q] {
        if index >= data.len() {
            return Err(CovestError::IndexOutOfRange {
                index,
                dim: data.len(),
            });
        }
    }
    let canon = |a: usize, b: usize| (a.min(b), a.max(b));
    let (first, second) = (canon(k, l), canon(r, q));
    let ((k, l), (r, q)) = (first.min(second), first.max(second));
    let n = check_sync_data(&[&data[k], &data[l], &data[r], &data[q]])?;
    let inc: Vec<Vec<f64>> = [k, l, r, q].iter().map(|&i| data[i].increments()).collect();
    let (dk, dl, dr, dq) = (&inc[0][..], &inc[1][..], &inc[2][..], &inc[3][..]);
    let sum = rc_display([dk, dl, dr, dq], n)
        + rc_display([dk, dl, dq, dr], n)
        + rc_display([dr, dq, dk, dl], n)
        + rc_display([dr, dq, dl, dk], n);
    Ok(n as f64 * 0.25 * sum)
}

/// Configuration of the histogram estimator of generalized multi-scale covariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmsAcovConfig {
    /// Kernel name.
    pub kernel: String,
    /// Tuning constant `c` in `M = round(c √N)` of the two estimators.
    pub c: f64,
    /// Number of bins `K_N`; `None` selects `max(2, round(N^{1/5}))`.
    pub bins: Option<usize>,
    /// Include the noise and cross terms when synchronous observations exist.
    pub include_noise: bool,
    /// Apply end-effect adjusted weights in the per-bin estimates.
    pub adjusted: bool,
    /// Timestamp tolerance for synchronicity indicators.
    pub eps: f64,
}

impl Default for GmsAcovConfig {
    fn default() -> Self {
        Self {
            kernel: "cubic".into(),
            c: 1.0,
            bins: None,
            include_noise: true,
            adjusted: true,
            eps: 0.0,
        }
    }
}

/// Addends of the histogram estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmsAcovBreakdown {
    /// Discretisation addend.
    pub signal: f64,
    /// Noise-noise addends (`c⁻³` and `c⁻¹` terms).
    pub noise: f64,
    /// Noise-signal cross addend.
    pub cross: f64,
    /// Sum of the three addends.
    pub total: f64,
    /// Global refresh count `N`.
    pub n_refresh: usize,
    /// Number of bins used.
    pub bins: usize,
    /// Effective tuning constant `M_N/√N`.
    pub c_effective: f64,
}

/// Index range `[lo, hi]` of a series covering the increments inside `(t0, t1]`.
fn bin_slice(s: &TickSeries, t0: f64, t1: f64) -> Option<TickSeries> {
    let sch = s.scheme();
    let lo = sch.prev_index_clamped(t0);
    let hi = sch.prev_index_clamped(t1);
    if hi <= lo {
        return None;
    }
    TickSeries::from_parts(
        s.times()[lo..=hi].to_vec(),
        s.values()[lo..=hi].to_vec(),
        sch.horizon(),
    )
    .ok()
}

fn bin_bracket(
    a: &TickSeries,
    b: &TickSeries,
    t0: f64,
    t1: f64,
    m_bin: usize,
    kernel: &str,
    adjusted: bool,
) -> Result<f64> {
    let (Some(sa), Some(sb)) = (bin_slice(a, t0, t1), bin_slice(b, t0, t1)) else {
        return Ok(0.0);
    };
    let grid = match pairwise_refresh(sa.scheme(), sb.scheme()) {
        Ok(g) => g,
        Err(_) => return Ok(0.0),
    };
    let count = grid.count();
    if count < 2 {
        return hayashi_yoshida(&sa, &sb);
    }
    let m = m_bin.clamp(2, count);
    let k = builtin_kernel(kernel)?;
    let mut w = weights_for(&k, m)?;
    if adjusted {
        w = end_effect_adjust(&w, count)?;
    }
    generalized_multiscale_on(&sa, &sb, &w, &grid)
}

fn eta_hat(a: &TickSeries, b: &TickSeries) -> f64 {
    if std::ptr::eq(a, b) || a == b {
        noise_variance(a)
    } else {
        noise_covariance(a, b)
    }
}

fn level_bins(f: &StepFunction, k: usize, horizon: f64) -> Vec<f64> {
    let total = f.total();
    (0..=k)
        .map(|j| {
            if j == 0 {
                0.0
            } else if j == k {
                horizon
            } else {
                f.level_time(j as f64 * total / k as f64).unwrap_or(horizon)
            }
        })
        .collect()
}

/// Histogram estimate of `√N · ACOV(GMS_12, GMS_34)` with its addends.
pub fn acov_gms_breakdown(
    data: [&TickSeries; 4],
    config: &GmsAcovConfig,
) -> Result<GmsAcovBreakdown> {
    let [x1, x2, x3, x4] = data;
    let g12 = pairwise_refresh(x1.scheme(), x2.scheme())?;
    let g34 = pairwise_refresh(x3.scheme(), x4.scheme())?;
    let global = global_refresh(&g12, &g34)?;
    let n = global.count();
    let horizon = global.horizon();
    let m12 = multiscale_frequency(config.c, g12.count());
    let m34 = multiscale_frequency(config.c, g34.count());
    let m = m12.min(m34).min(n);
    if m < 2 {
        return Err(CovestError::TooFew {
            what: "global refresh intervals",
            required: 2,
            actual: n,
        });
    }
    let c = m as f64 / (n as f64).sqrt();
    let kernel = builtin_kernel(&config.kernel)?;
    let w = weights_for(&kernel, m)?;
    let d = weighted_lasa_function(global.grid().refresh(), &w)?;
    let k_bins = config
        .bins
        .unwrap_or_else(|| ((n as f64).powf(0.2).round() as usize).max(2));
    if k_bins < 2 {
        return Err(CovestError::TooFew {
            what: "histogram bins",
            required: 2,
            actual: k_bins,
        });
    }
    let m_bin = ((n as f64).powf(0.6).round() as usize).max(2);
    let bracket = |a: &TickSeries, b: &TickSeries, t0: f64, t1: f64| {
        bin_bracket(a, b, t0, t1, m_bin, &config.kernel, config.adjusted)
    };

    let edges = level_bins(&d, k_bins, horizon);
    let d_total = d.total();
    let mut signal = 0.0;
    for e in edges.windows(2) {
        let width = e[1] - e[0];
        if width <= 0.0 {
            continue;
        }
        let b13 = bracket(x1, x3, e[0], e[1])?;
        let b24 = bracket(x2, x4, e[0], e[1])?;
        let b14 = bracket(x1, x4, e[0], e[1])?;
        let b23 = bracket(x2, x3, e[0], e[1])?;
        signal += (b13 * b24 + b14 * b23) / (width * width) * d_total / k_bins as f64;
    }
    signal *= 2.0 * c * horizon;

    let (mut noise, mut cross) = (0.0, 0.0);
    if config.include_noise {
        let ov = sync_overlap(&global, m12.max(1), m34.max(1), config.eps)?;
        let has_sync = !ov.is_disjoint()
            || [ov.frak_13_24, ov.frak_14_23, ov.tilde_13_24, ov.tilde_14_23]
                .iter()
                .any(|&x| x != 0.0);
        if has_sync {
            let kc = kernel_constants(&w);
            let (e13, e24, e14, e23) = (
                eta_hat(x1, x3),
                eta_hat(x2, x4),
                eta_hat(x1, x4),
                eta_hat(x2, x3),
            );
            noise =
                c.powi(-3) * 2.0 * kc.n1 * (ov.frak_13_24 * e13 * e24 + ov.frak_14_23 * e14 * e23)
                    + kc.n2 / c * (ov.tilde_13_24 * e13 * e24 + ov.tilde_14_23 * e14 * e23);
            let histo = |s: &StepFunction, a: &TickSeries, b: &TickSeries| -> Result<f64> {
                let total = s.total();
                if total <= 0.0 {
                    return Ok(0.0);
                }
                let edges = level_bins(s, k_bins, horizon);
                let mut acc = 0.0;
                for e in edges.windows(2) {
                    let width = e[1] - e[0];
                    if width <= 0.0 {
                        continue;
                    }
                    acc += bracket(a, b, e[0], e[1])? / width * total / k_bins as f64;
                }
                Ok(acc)
            };
            cross = e13 * histo(&ov.s13, x2, x4)?
                + e24 * histo(&ov.s24, x1, x3)?
                + e23 * histo(&ov.s23, x1, x4)?
                + e14 * histo(&ov.s14, x2, x3)?;
            cross *= 2.0 * kc.m_const / c * horizon;
        }
    }
    Ok(GmsAcovBreakdown {
        signal,
        noise,
        cross,
        total: signal + noise + cross,
        n_refresh: n,
        bins: k_bins,
        c_effective: c,
    })
}

/// Histogram estimate of `√N · ACOV(GMS_kl, GMS_rq)` for 0-based components.
pub fn acov_gms_hat(
    data: &[TickSeries],
    config: &GmsAcovConfig,
    pairs: ((usize, usize), (usize, usize)),
) -> Result<f64> {
    let ((k, l), (r, q)) = pairs;
    for index in [k, l, r, q] {
        if index >= data.len() {
            return Err(CovestError::IndexOutOfRange {
                index,
                dim: data.len(),
            });
        }
    }
    Ok(acov_gms_breakdown([&data[k], &data[l], &data[r], &data[q]], config)?.total)
}

/// Estimated asymptotic covariance matrix of SVEC-packed estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcovMatrix {
    /// Dimension `p` of the underlying covariance matrix.
    pub p: usize,
    /// Entries normalised by the refresh count of the involved components.
    pub matrix: DMatrix<f64>,
    /// Refresh count `N` used for each entry.
    pub counts: DMatrix<f64>,
    /// Total number of observations `n = Σ n_l`.
    pub n_total: usize,
    /// Convergence rate `r_n`.
    pub rate: Rate,
    /// Entries rescaled to the common rate `r_n`: `matrix · (n/N)^e`.
    pub rescaled: DMatrix<f64>,
}

impl AcovMatrix {
    /// Rescaled asymptotic covariance of the estimates of `[X_k, X_l]` and `[X_r, X_q]`.
    pub fn entry(&self, pairs: ((usize, usize), (usize, usize))) -> Result<f64> {
        let ((k, l), (r, q)) = pairs;
        let i = svec_index(self.p, k.min(l), k.max(l))?;
        let j = svec_index(self.p, r.min(q), r.max(q))?;
        Ok(self.rescaled[(i, j)])
    }

    /// `r_n` at the total observation count.
    pub fn rate_factor(&self) -> f64 {
        self.rate.factor(self.n_total as f64)
    }

    /// Standard errors `√(rescaled AVAR)/r_n` of the packed estimates (NaN for negative AVAR).
    pub fn standard_errors(&self) -> Vec<f64> {
        let r = self.rate_factor();
        (0..self.rescaled.nrows())
            .map(|i| {
                let v = self.rescaled[(i, i)];
                if v >= 0.0 {
                    v.sqrt() / r
                } else {
                    f64::NAN
                }
            })
            .collect()
    }
}

/// Estimates the full asymptotic covariance matrix of the SVEC-packed estimates.
///
/// Uses the bipower estimator for `rc` and the histogram estimator for the
/// noise-robust methods. No data-driven estimator exists for `hy`.
pub fn acov_matrix_hat(
    data: &[TickSeries],
    method: Method,
    config: &GmsAcovConfig,
) -> Result<AcovMatrix> {
    let p = data.len();
    if p == 0 {
        return Err(CovestError::TooFew {
            what: "series",
            required: 1,
            actual: 0,
        });
    }
    if method == Method::Hy {
        return Err(CovestError::MethodMismatch {
            method: "hy".into(),
            reason: "no data-driven asymptotic covariance estimator for Hayashi-Yoshida".into(),
        });
    }
    let pairs = svec_pairs(p);
    let q = pairs.len();
    let cells: Vec<(usize, usize)> = (0..q).flat_map(|i| (i..q).map(move |j| (i, j))).collect();
    let values: Vec<Result<(f64, f64)>> = cells
        .par_iter()
        .map(|&(i, j)| {
            let pp = (pairs[i], pairs[j]);
            match method {
                Method::Rc => Ok((acov_rc_hat(data, pp)?, data[0].intervals() as f64)),
                _ => {
                    let ((k, l), (r, s)) = pp;
                    let b = acov_gms_breakdown([&data[k], &data[l], &data[r], &data[s]], config)?;
                    Ok((b.total, b.n_refresh as f64))
                }
            }
        })
        .collect();
    let mut matrix = DMatrix::zeros(q, q);
    let mut counts = DMatrix::zeros(q, q);
    for (&(i, j), v) in cells.iter().zip(values) {
        let (x, nn) = v?;
        matrix[(i, j)] = x;
        matrix[(j, i)] = x;
        counts[(i, j)] = nn;
        counts[(j, i)] = nn;
    }
    let n_total: usize = data.iter().map(|s| s.intervals()).sum();
    let rate = Rate::for_method(method);
    let e = rate.variance_exponent();
    let rescaled = DMatrix::from_fn(q, q, |i, j| {
        matrix[(i, j)] * (n_total as f64 / counts[(i, j)]).powf(e)
    });
    Ok(AcovMatrix {
        p,
        matrix,
        counts,
        n_total,
        rate,
        rescaled,
    })
}

/// Asymptotic variance `Σ c_k c_k̃ c_l c_l̃ ACOV([k̃,l̃], [k,l])` of the bracket of `Σ c_k X^{(k)}`.
pub fn lincomb_avar(coeffs: &[f64], acov: &AcovMatrix) -> Result<f64> {
    let p = acov.p;
    if coeffs.len() != p {
        return Err(CovestError::InvalidParameter(format!(
            "{} coefficients for dimension {p}",
            coeffs.len()
        )));
    }
    let mut acc = 0.0;
    for k in 0..p {
        for kt in 0..p {
            for l in 0..p {
                for lt in 0..p {
                    let w = coeffs[k] * coeffs[kt] * coeffs[l] * coeffs[lt];
                    if w != 0.0 {
                        acc += w * acov.entry(((kt, lt), (k, l)))?;
                    }
                }
            }
        }
    }
    Ok(acc)
}

/// Feasible standardisation `r_n (Z − target)/√avar`.
pub fn standardize(z: f64, target: f64, avar: f64, rate: Rate, n: f64) -> Result<f64> {
    if avar.is_nan() || avar <= 0.0 {
        return Err(CovestError::NonPositiveAvar(avar));
    }
    Ok(rate.factor(n) * (z - target) / avar.sqrt())
}
