//! Conditional-independence test for zero covariation of the `Z`-orthogonal parts.
//!
//! ```text
//! 𝔗 = [X1,Z][X2,Z] − [X1,X2][Z]
//! z = r_n 𝔗̂ / √AVAR(𝔗̂)
//! ```
//!
//! `AVAR(𝔗̂)` is the delta-method variance `∇gᵀ · ACOV · ∇g` for
//! `g(x, y, u, v) = xy − uv` evaluated at the estimated brackets.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::avar::{acov_matrix_hat, AcovMatrix, GmsAcovConfig};
use crate::error::{CovestError, Result};
use crate::estimators::{estimate_matrix, EstimateConfig, Method, TickSeries};

/// `[X1,Z][X2,Z] − [X1,X2][Z]`.
pub fn ci_statistic(b_x1z: f64, b_x2z: f64, b_x1x2: f64, b_z: f64) -> f64 {
    b_x1z * b_x2z - b_x1x2 * b_z
}

/// The four bracket estimates entering the statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiBrackets {
    pub x1z: f64,
    pub x2z: f64,
    pub x1x2: f64,
    pub z: f64,
}

impl CiBrackets {
    /// Statistic evaluated at these brackets.
    pub fn statistic(&self) -> f64 {
        ci_statistic(self.x1z, self.x2z, self.x1x2, self.z)
    }
}

/// The ten asymptotic (co)variances entering the delta-method variance.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CiAcovEntries {
    pub avar_x1z: f64,
    pub avar_x2z: f64,
    pub avar_x1x2: f64,
    pub avar_z: f64,
    pub acov_x1x2_z: f64,
    pub acov_x1z_x2z: f64,
    pub acov_x1x2_x2z: f64,
    pub acov_x1x2_x1z: f64,
    pub acov_x2z_z: f64,
    pub acov_x1z_z: f64,
}

impl CiAcovEntries {
    /// Extracts the entries from an asymptotic covariance matrix over `(X1, X2, Z)` at indices `(x1, x2, z)`.
    pub fn from_acov(acov: &AcovMatrix, x1: usize, x2: usize, z: usize) -> Result<Self> {
        let e = |a: (usize, usize), b: (usize, usize)| acov.entry((a, b));
        let (x1z, x2z, x1x2, zz) = ((x1, z), (x2, z), (x1, x2), (z, z));
        Ok(Self {
            avar_x1z: e(x1z, x1z)?,
            avar_x2z: e(x2z, x2z)?,
            avar_x1x2: e(x1x2, x1x2)?,
            avar_z: e(zz, zz)?,
            acov_x1x2_z: e(x1x2, zz)?,
            acov_x1z_x2z: e(x1z, x2z)?,
            acov_x1x2_x2z: e(x1x2, x2z)?,
            acov_x1x2_x1z: e(x1x2, x1z)?,
            acov_x2z_z: e(x2z, zz)?,
            acov_x1z_z: e(x1z, zz)?,
        })
    }
}

/// Delta-method asymptotic variance of the statistic.
pub fn ci_avar(b: &CiBrackets, a: &CiAcovEntries) -> f64 {
    b.x2z * b.x2z * a.avar_x1z
        + b.x1z * b.x1z * a.avar_x2z
        + b.x1x2 * b.x1x2 * a.avar_z
        + b.z * b.z * a.avar_x1x2
        + 2.0 * b.z * b.x1x2 * a.acov_x1x2_z
        + 2.0 * b.x1z * b.x2z * a.acov_x1z_x2z
        - 2.0 * b.x1z * b.z * a.acov_x1x2_x2z
        - 2.0 * b.x2z * b.z * a.acov_x1x2_x1z
        - 2.0 * b.x1x2 * b.x1z * a.acov_x2z_z
        - 2.0 * b.x1x2 * b.x2z * a.acov_x1z_z
}

/// Two-sided standard normal p-value of `z`.
pub fn two_sided_p_value(z: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * normal.sf(z.abs())).clamp(0.0, 1.0)
}

/// Configuration of a conditional-independence test.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CiConfig {
    pub estimate: EstimateConfig,
    pub acov: GmsAcovConfig,
}

/// Outcome of a conditional-independence test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiTestResult {
    pub method: Method,
    pub statistic: f64,
    /// Estimated delta-method variance (rescaled to the common rate).
    pub avar_hat: f64,
    /// Standardised statistic; `None` when the variance estimate is not positive.
    pub z: Option<f64>,
    /// Two-sided p-value; `None` when inconclusive.
    pub p_value: Option<f64>,
    pub inconclusive: bool,
    pub rate_factor: f64,
    pub brackets: CiBrackets,
    pub acov_entries: CiAcovEntries,
}

/// Runs the test on observations of `X1`, `X2` and `Z`.
pub fn ci_test(
    x1: &TickSeries,
    x2: &TickSeries,
    z: &TickSeries,
    method: Method,
    config: &CiConfig,
) -> Result<CiTestResult> {
    if method == Method::Hy {
        return Err(CovestError::MethodMismatch {
            method: "hy".into(),
            reason: "the test needs an asymptotic covariance estimator".into(),
        });
    }
    let data = vec![x1.clone(), x2.clone(), z.clone()];
    let est = estimate_matrix(&data, method, &config.estimate)?;
    let m = &est.matrix;
    let brackets = CiBrackets {
        x1z: m[(0, 2)],
        x2z: m[(1, 2)],
        x1x2: m[(0, 1)],
        z: m[(2, 2)],
    };
    let mut acov_cfg = config.acov.clone();
    acov_cfg.kernel = config.estimate.kernel.clone();
    acov_cfg.adjusted = config.estimate.adjusted;
    let acov = acov_matrix_hat(&data, method, &acov_cfg)?;
    let entries = CiAcovEntries::from_acov(&acov, 0, 1, 2)?;
    let statistic = brackets.statistic();
    let avar_hat = ci_avar(&brackets, &entries);
    let rate_factor = acov.rate_factor();
    let (zv, pv, inconclusive) = if avar_hat > 0.0 && avar_hat.is_finite() {
        let zv = rate_factor * statistic / avar_hat.sqrt();
        (Some(zv), Some(two_sided_p_value(zv)), false)
    } else {
        (None, None, true)
    };
    Ok(CiTestResult {
        method,
        statistic,
        avar_hat,
        z: zv,
        p_value: pv,
        inconclusive,
        rate_factor,
        brackets,
        acov_entries: entries,
    })
}
