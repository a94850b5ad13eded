//! Integrated-covariance estimators for synchronous and asynchronous tick data.
//!
//! ```text
//! RC   = Σ_j Δ_j a Δ_j b
//! MS   = Σ_{i=1}^{M} (α_i/i) Σ_{j=i}^{n} Δ_j^i a Δ_j^i b,          Δ_j^i a = a_j − a_{j−i}
//! KER  = RC + Σ_{h=1}^{H} 𝔎(h/H) Σ_{j=h+1}^{n} (Δ_j a Δ_{j−h} b + Δ_{j−h} a Δ_j b)
//! HY   = Σ_{i,j} Δ_i a Δ_j b 1{(t_{i−1}, t_i] ∩ (s_{j−1}, s_j] ≠ ∅}
//! GMS  = Σ_{i=1}^{M} (α_i/i) Σ_{j=i}^{N} (a(t⁺(τ_j)) − a(t⁻(τ_{j−i}))) (b(s⁺(τ_j)) − b(s⁻(τ_{j−i})))
//! ```
//!
//! The adjusted multi-scale estimator shifts the first two weights by `±2/n`;
//! the adjusted kernel estimator scales the realized covariance by `(n − 1)/n`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::avar::{svec_pack, svec_pairs};
use crate::error::{CovestError, Result};
use crate::kernels::{
    builtin_kernel, end_effect_adjust, weights_for, KernelFunction, WeightScheme,
};
use crate::sampling::{pairwise_refresh, SamplingScheme, SyncGrid};

/// One component's observation times and log-prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickSeries {
    scheme: SamplingScheme,
    values: Vec<f64>,
}

impl TickSeries {
    /// Pairs a scheme with one finite value per observation time.
    pub fn new(scheme: SamplingScheme, values: Vec<f64>) -> Result<Self> {
        if values.len() != scheme.len() {
            return Err(CovestError::InvalidParameter(format!(
                "{} values for {} observation times",
                values.len(),
                scheme.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(CovestError::InvalidParameter(format!(
                "non-finite value at index {i}"
            )));
        }
        Ok(Self { scheme, values })
    }

    /// Builds a series from raw times, values and a horizon.
    pub fn from_parts(times: Vec<f64>, values: Vec<f64>, horizon: f64) -> Result<Self> {
        Self::new(SamplingScheme::new(times, horizon)?, values)
    }

    /// Observation scheme.
    pub fn scheme(&self) -> &SamplingScheme {
        &self.scheme
    }

    /// Observation times.
    pub fn times(&self) -> &[f64] {
        self.scheme.times()
    }

    /// Observed values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of observations.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; series are nonempty by construction.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of increments.
    pub fn intervals(&self) -> usize {
        self.values.len() - 1
    }

    /// Successive increments `Y_j − Y_{j−1}`.
    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// The series restricted to observation times in `[lo, hi]`.
    pub fn restrict(&self, lo: f64, hi: f64) -> Option<Self> {
        let t = self.times();
        let a = t.partition_point(|&x| x < lo);
        let b = t.partition_point(|&x| x <= hi);
        if b <= a {
            return None;
        }
        let scheme = SamplingScheme::new(t[a..b].to_vec(), self.scheme.horizon()).ok()?;
        Some(Self {
            scheme,
            values: self.values[a..b].to_vec(),
        })
    }
}

/// True when both series are observed at exactly the same times.
pub fn is_synchronous(a: &TickSeries, b: &TickSeries) -> bool {
    a.times() == b.times()
}

fn require_sync(a: &TickSeries, b: &TickSeries) -> Result<()> {
    if is_synchronous(a, b) {
        Ok(())
    } else {
        Err(CovestError::NotSynchronous)
    }
}

/// Realized covariance `Σ_j Δ_j a Δ_j b` of two synchronous series.
pub fn realized_cov(a: &TickSeries, b: &TickSeries) -> Result<f64> {
    require_sync(a, b)?;
    Ok(a.values()
        .windows(2)
        .zip(b.values().windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[1] - y[0]))
        .sum())
}

fn multiscale_levels(a: &[f64], b: &[f64], alphas: &[f64]) -> f64 {
    let n = a.len() - 1;
    alphas
        .iter()
        .enumerate()
        .map(|(k, alpha)| {
            let i = k + 1;
            let s: f64 = (i..=n).map(|j| (a[j] - a[j - i]) * (b[j] - b[j - i])).sum();
            alpha / i as f64 * s
        })
        .sum()
}

/// Multi-scale estimator with weights `w` on synchronous series.
pub fn multiscale(a: &TickSeries, b: &TickSeries, w: &WeightScheme) -> Result<f64> {
    require_sync(a, b)?;
    let n = a.intervals();
    if w.m() > n {
        return Err(CovestError::InvalidParameter(format!(
            "multi-scale frequency M = {} exceeds n = {n}",
            w.m()
        )));
    }
    Ok(multiscale_levels(a.values(), b.values(), w.alphas()))
}

/// Multi-scale estimator with end-effect adjusted weights.
pub fn multiscale_adjusted(a: &TickSeries, b: &TickSeries, w: &WeightScheme) -> Result<f64> {
    let adjusted = end_effect_adjust(w, a.intervals())?;
    multiscale(a, b, &adjusted)
}

fn kernel_impl(
    a: &TickSeries,
    b: &TickSeries,
    k: &KernelFunction,
    h_n: usize,
    rc_scale: f64,
) -> Result<f64> {
    require_sync(a, b)?;
    let n = a.intervals();
    if h_n == 0 || h_n >= n {
        return Err(CovestError::InvalidParameter(format!(
            "bandwidth H = {h_n} must satisfy 1 ≤ H < n = {n}"
        )));
    }
    let da = a.increments();
    let db = b.increments();
    let rc: f64 = da.iter().zip(&db).map(|(x, y)| x * y).sum();
    let mut acc = rc_scale * rc;
    for h in 1..=h_n {
        let weight = k.value(h as f64 / h_n as f64);
        if weight == 0.0 {
            continue;
        }
        let s: f64 = (h..n).map(|j| da[j] * db[j - h] + da[j - h] * db[j]).sum();
        acc += weight * s;
    }
    Ok(acc)
}

/// Kernel estimator with kernel `k` and bandwidth `H` on synchronous series.
pub fn kernel_estimator(
    a: &TickSeries,
    b: &TickSeries,
    k: &KernelFunction,
    h_n: usize,
) -> Result<f64> {
    kernel_impl(a, b, k, h_n, 1.0)
}

/// Kernel estimator whose realized-covariance addend is scaled by `(n − 1)/n`.
pub fn kernel_adjusted(
    a: &TickSeries,
    b: &TickSeries,
    k: &KernelFunction,
    h_n: usize,
) -> Result<f64> {
    let n = a.intervals() as f64;
    kernel_impl(a, b, k, h_n, (n - 1.0) / n)
}

/// Hayashi–Yoshida estimator by a two-pointer sweep over overlapping intervals.
pub fn hayashi_yoshida(a: &TickSeries, b: &TickSeries) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(CovestError::TooFew {
            what: "observations per series",
            required: 2,
            actual: a.len().min(b.len()),
        });
    }
    let (ta, tb) = (a.times(), b.times());
    let (ya, yb) = (a.values(), b.values());
    let (na, nb) = (ta.len(), tb.len());
    let (mut i, mut j) = (1, 1);
    let mut acc = 0.0;
    while i < na && j < nb {
        if ta[i].min(tb[j]) > ta[i - 1].max(tb[j - 1]) {
            acc += (ya[i] - ya[i - 1]) * (yb[j] - yb[j - 1]);
        }
        if ta[i] < tb[j] {
            i += 1;
        } else if tb[j] < ta[i] {
            j += 1;
        } else {
            i += 1;
            j += 1;
        }
    }
    Ok(acc)
}

/// Hayashi–Yoshida estimator evaluated through pairwise refresh times.
///
/// Agrees with [`hayashi_yoshida`] up to floating-point summation order.
pub fn hayashi_yoshida_refresh(a: &TickSeries, b: &TickSeries) -> Result<f64> {
    let grid = pairwise_refresh(a.scheme(), b.scheme())?;
    Ok(refresh_lag_sum(a, b, &grid, 1))
}

/// `Σ_{j=i}^{N} (a(t⁺(τ_j)) − a(t⁻(τ_{j−i}))) (b(s⁺(τ_j)) − b(s⁻(τ_{j−i})))`.
fn refresh_lag_sum(a: &TickSeries, b: &TickSeries, grid: &SyncGrid, lag: usize) -> f64 {
    let (ya, yb) = (a.values(), b.values());
    let (pa, pb) = (grid.next_indices(0), grid.next_indices(1));
    let (ma, mb) = (grid.prev_indices(0), grid.prev_indices(1));
    (lag..=grid.count())
        .map(|j| (ya[pa[j]] - ya[ma[j - lag]]) * (yb[pb[j]] - yb[mb[j - lag]]))
        .sum()
}

/// Generalized multi-scale estimator on the pairwise refresh grid.
pub fn generalized_multiscale(a: &TickSeries, b: &TickSeries, w: &WeightScheme) -> Result<f64> {
    let grid = pairwise_refresh(a.scheme(), b.scheme())?;
    generalized_multiscale_on(a, b, w, &grid)
}

/// Generalized multi-scale estimator on a precomputed pairwise refresh grid.
pub fn generalized_multiscale_on(
    a: &TickSeries,
    b: &TickSeries,
    w: &WeightScheme,
    grid: &SyncGrid,
) -> Result<f64> {
    let n = grid.count();
    if w.m() > n {
        return Err(CovestError::InvalidParameter(format!(
            "multi-scale frequency M = {} exceeds refresh count N = {n}",
            w.m()
        )));
    }
    Ok(w.alphas()
        .iter()
        .enumerate()
        .map(|(k, alpha)| alpha / (k + 1) as f64 * refresh_lag_sum(a, b, grid, k + 1))
        .sum())
}

/// Estimated noise covariance matrix `𝐇̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseMoments {
    pub h_hat: DMatrix<f64>,
}

/// Indices of the timestamps shared by two schemes (exact equality).
pub fn common_indices(a: &SamplingScheme, b: &SamplingScheme) -> Vec<(usize, usize)> {
    let (ta, tb) = (a.times(), b.times());
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < ta.len() && j < tb.len() {
        if ta[i] == tb[j] {
            out.push((i, j));
            i += 1;
            j += 1;
        } else if ta[i] < tb[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Noise variance estimate `RV/(2n)` of one series.
pub fn noise_variance(a: &TickSeries) -> f64 {
    let rv: f64 = a.increments().iter().map(|d| d * d).sum();
    rv / (2.0 * a.intervals() as f64)
}

/// Noise covariance estimate `−(1/m) Σ_i Δ_i a Δ_{i+1} b` over shared timestamps.
///
/// Increments are taken along the shared timestamps and `m` is the number of
/// adjacent increment products; the result is 0 with fewer than three shared times.
pub fn noise_covariance(a: &TickSeries, b: &TickSeries) -> f64 {
    let common = common_indices(a.scheme(), b.scheme());
    if common.len() < 3 {
        return 0.0;
    }
    let da: Vec<f64> = common
        .windows(2)
        .map(|w| a.values()[w[1].0] - a.values()[w[0].0])
        .collect();
    let db: Vec<f64> = common
        .windows(2)
        .map(|w| b.values()[w[1].1] - b.values()[w[0].1])
        .collect();
    let m = da.len() - 1;
    -(0..m).map(|i| da[i] * db[i + 1]).sum::<f64>() / m as f64
}

/// Noise moments of a set of series: variances on the diagonal, covariances off it.
pub fn noise_moments(data: &[TickSeries]) -> Result<NoiseMoments> {
    let p = data.len();
    if let Some(s) = data.iter().find(|s| s.len() < 2) {
        return Err(CovestError::TooFew {
            what: "observations per series",
            required: 2,
            actual: s.len(),
        });
    }
    let mut h = DMatrix::zeros(p, p);
    for k in 0..p {
        h[(k, k)] = noise_variance(&data[k]);
        for l in (k + 1)..p {
            let v = noise_covariance(&data[k], &data[l]);
            h[(k, l)] = v;
            h[(l, k)] = v;
        }
    }
    Ok(NoiseMoments { h_hat: h })
}

/// Estimation method for integrated covariances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Realized covariance (synchronous, noiseless).
    Rc,
    /// Multi-scale (synchronous, noisy).
    Ms,
    /// Kernel (synchronous, noisy).
    Kernel,
    /// Hayashi–Yoshida (asynchronous, noiseless).
    Hy,
    /// Generalized multi-scale (asynchronous, noisy).
    Gms,
}

impl Method {
    /// Parses `rc`, `ms`, `kernel`, `hy` or `gms`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rc" => Ok(Self::Rc),
            "ms" => Ok(Self::Ms),
            "kernel" => Ok(Self::Kernel),
            "hy" => Ok(Self::Hy),
            "gms" => Ok(Self::Gms),
            other => Err(CovestError::InvalidParameter(format!(
                "unknown method '{other}'"
            ))),
        }
    }

    /// Lower-case tag.
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Rc => "rc",
            Self::Ms => "ms",
            Self::Kernel => "kernel",
            Self::Hy => "hy",
            Self::Gms => "gms",
        }
    }

    /// True for methods that are robust to microstructure noise.
    pub fn is_noise_robust(&self) -> bool {
        matches!(self, Self::Ms | Self::Kernel | Self::Gms)
    }

    /// True for methods that need synchronous observations.
    pub fn requires_sync(&self) -> bool {
        matches!(self, Self::Rc | Self::Ms | Self::Kernel)
    }
}

/// Configuration shared by the matrix estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    /// Kernel name for `ms`, `kernel` and `gms` (`cubic`, `parzen`, `th<r>`).
    pub kernel: String,
    /// Default tuning constant `c` in `M = round(c √N)`.
    pub c: f64,
    /// Per-pair overrides `((k, l), c_kl)` with 0-based `k ≤ l`.
    pub pair_c: Vec<((usize, usize), f64)>,
    /// Apply end-effect corrections.
    pub adjusted: bool,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            kernel: "cubic".into(),
            c: 1.0,
            pair_c: Vec::new(),
            adjusted: true,
        }
    }
}

impl EstimateConfig {
    /// Tuning constant for pair `(k, l)`.
    pub fn c_for(&self, k: usize, l: usize) -> f64 {
        let key = (k.min(l), k.max(l));
        self.pair_c
            .iter()
            .find(|(p, _)| *p == key)
            .map_or(self.c, |(_, c)| *c)
    }
}

/// Multi-scale frequency `M = round(c √N)`, clamped to `[2, N]`.
pub fn multiscale_frequency(c: f64, n: usize) -> usize {
    let m = (c * (n as f64).sqrt()).round() as usize;
    m.clamp(2, n.max(2))
}

/// Per-pair metadata of a matrix estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairConfig {
    pub k: usize,
    pub l: usize,
    /// Number of (refresh) intervals the pair was estimated on.
    pub n_refresh: usize,
    /// Multi-scale frequency or bandwidth (0 for `rc`/`hy`).
    pub m: usize,
    pub c: f64,
}

/// Symmetric integrated-covariance estimate with its SVEC packing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovEstimate {
    pub matrix: DMatrix<f64>,
    pub method: Method,
    pub kernel: Option<String>,
    pub pairs: Vec<PairConfig>,
    pub svec: Vec<f64>,
    /// Smallest eigenvalue; negative values flag an indefinite estimate.
    pub min_eigenvalue: f64,
}

/// Estimates one entry of the integrated covariance matrix.
pub fn estimate_pair(
    a: &TickSeries,
    b: &TickSeries,
    method: Method,
    config: &EstimateConfig,
    c: f64,
) -> Result<(f64, PairConfig)> {
    let kernel = builtin_kernel(&config.kernel)?;
    let mut meta = PairConfig {
        k: 0,
        l: 0,
        n_refresh: 0,
        m: 0,
        c,
    };
    if method.requires_sync() && !is_synchronous(a, b) {
        return Err(CovestError::MethodMismatch {
            method: method.as_str().into(),
            reason: "series are not observed synchronously".into(),
        });
    }
    let value = match method {
        Method::Rc => {
            meta.n_refresh = a.intervals();
            realized_cov(a, b)?
        }
        Method::Ms => {
            let n = a.intervals();
            let m = multiscale_frequency(c, n);
            let w = weights_for(&kernel, m)?.with_c(c);
            meta.n_refresh = n;
            meta.m = m;
            if config.adjusted {
                multiscale_adjusted(a, b, &w)?
            } else {
                multiscale(a, b, &w)?
            }
        }
        Method::Kernel => {
            let n = a.intervals();
            let h = multiscale_frequency(c, n).min(n - 1).max(1);
            meta.n_refresh = n;
            meta.m = h;
            if config.adjusted {
                kernel_adjusted(a, b, &kernel, h)?
            } else {
                kernel_estimator(a, b, &kernel, h)?
            }
        }
        Method::Hy => {
            let grid = pairwise_refresh(a.scheme(), b.scheme())?;
            meta.n_refresh = grid.count();
            hayashi_yoshida(a, b)?
        }
        Method::Gms => {
            let grid = pairwise_refresh(a.scheme(), b.scheme())?;
            let n = grid.count();
            let m = multiscale_frequency(c, n);
            let mut w = weights_for(&kernel, m)?.with_c(c);
            if config.adjusted {
                w = end_effect_adjust(&w, n)?;
            }
            meta.n_refresh = n;
            meta.m = m;
            generalized_multiscale_on(a, b, &w, &grid)?
        }
    };
    Ok((value, meta))
}

/// Estimates all `p(p+1)/2` entries of the integrated covariance matrix.
pub fn estimate_matrix(
    data: &[TickSeries],
    method: Method,
    config: &EstimateConfig,
) -> Result<CovEstimate> {
    let p = data.len();
    if p == 0 {
        return Err(CovestError::TooFew {
            what: "series",
            required: 1,
            actual: 0,
        });
    }
    let pairs = svec_pairs(p);
    let results: Vec<Result<(f64, PairConfig)>> = pairs
        .par_iter()
        .map(|&(k, l)| {
            let (v, mut meta) =
                estimate_pair(&data[k], &data[l], method, config, config.c_for(k, l))?;
            meta.k = k;
            meta.l = l;
            Ok((v, meta))
        })
        .collect();
    let mut matrix = DMatrix::zeros(p, p);
    let mut metas = Vec::with_capacity(pairs.len());
    for ((k, l), r) in pairs.iter().zip(results) {
        let (v, meta) = r?;
        matrix[(*k, *l)] = v;
        matrix[(*l, *k)] = v;
        metas.push(meta);
    }
    let min_eigenvalue = matrix
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(CovEstimate {
        svec: svec_pack(&matrix),
        matrix,
        method,
        kernel: method.is_noise_robust().then(|| config.kernel.clone()),
        pairs: metas,
        min_eigenvalue,
    })
}
