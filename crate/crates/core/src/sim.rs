//! Simulation of multivariate Itô processes, sampling schemes and noisy observations.
//!
//! Paths are generated by an Euler scheme on the union of a fine equidistant
//! grid and the requested observation times, so that every observation time
//! is a simulation node. Stochastic variances follow square-root dynamics with
//! full truncation and leverage:
//!
//! ```text
//! dX_l = μ_l dt + √v_l (L dW)_l
//! dv_l = κ_l (θ_l − v_l) dt + ξ_l √v_l dB_l,   dB_l = ρ_l (L dW)_l + √(1 − ρ_l²) dZ_l
//! ```

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::avar::TheoryInputs;
use crate::error::{CovestError, Result};
use crate::estimators::TickSeries;
use crate::sampling::SamplingScheme;

/// A square root `R` with `R Rᵀ = A` of a symmetric positive semidefinite matrix.
///
/// Uses the Cholesky factor when it exists and a spectral square root otherwise.
pub fn psd_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(CovestError::NotPsd("matrix is not square".into()));
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    if (a - a.transpose()).amax() > 1e-12 * scale {
        return Err(CovestError::NotPsd("matrix is not symmetric".into()));
    }
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.l());
    }
    let eig = a.clone().symmetric_eigen();
    let min = eig.eigenvalues.min();
    if min < -1e-10 * scale {
        return Err(CovestError::NotPsd(format!("smallest eigenvalue {min}")));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|x| x.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * d)
}

/// Square-root stochastic-variance parameters, one entry per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticVol {
    /// Correlation matrix of the Brownian drivers of the prices.
    pub correlation: DMatrix<f64>,
    pub kappa: Vec<f64>,
    pub theta: Vec<f64>,
    pub xi: Vec<f64>,
    /// Leverage correlations between price and variance shocks.
    pub rho: Vec<f64>,
    pub v0: Vec<f64>,
}

/// Volatility specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VolSpec {
    /// Constant spot covariance matrix `Σ`.
    Constant { sigma: DMatrix<f64> },
    /// Stochastic variances with constant correlation loading.
    Stochastic(StochasticVol),
}

/// Model of the latent efficient log-price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItoModelConfig {
    pub drift: Vec<f64>,
    pub vol: VolSpec,
    pub horizon: f64,
    /// Number of fine-grid Euler steps on `[0, T]`.
    pub fine_steps: usize,
}

impl ItoModelConfig {
    /// Driftless model with constant spot covariance `Σ`.
    pub fn constant(sigma: DMatrix<f64>, horizon: f64, fine_steps: usize) -> Self {
        Self {
            drift: vec![0.0; sigma.nrows()],
            vol: VolSpec::Constant { sigma },
            horizon,
            fine_steps,
        }
    }

    /// Default stochastic-volatility model: unit long-run variance, leverage −0.5,
    /// and constant pairwise correlation 0.5.
    pub fn default_sv(p: usize, horizon: f64, fine_steps: usize) -> Self {
        let correlation = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { 0.5 });
        Self {
            drift: vec![0.0; p],
            vol: VolSpec::Stochastic(StochasticVol {
                correlation,
                kappa: vec![5.0; p],
                theta: vec![1.0; p],
                xi: vec![0.5; p],
                rho: vec![-0.5; p],
                v0: vec![1.0; p],
            }),
            horizon,
            fine_steps,
        }
    }

    /// Dimension `p`.
    pub fn p(&self) -> usize {
        self.drift.len()
    }

    /// Checks dimensions, positivity and positive semidefiniteness.
    pub fn validate(&self) -> Result<()> {
        let p = self.p();
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(CovestError::InvalidHorizon(self.horizon));
        }
        if self.fine_steps == 0 {
            return Err(CovestError::InvalidParameter(
                "fine_steps must be positive".into(),
            ));
        }
        let m = match &self.vol {
            VolSpec::Constant { sigma } => sigma,
            VolSpec::Stochastic(sv) => {
                let lens = [
                    sv.kappa.len(),
                    sv.theta.len(),
                    sv.xi.len(),
                    sv.rho.len(),
                    sv.v0.len(),
                ];
                if lens.iter().any(|&l| l != p) {
                    return Err(CovestError::InvalidParameter(
                        "stochastic-volatility parameters must have one entry per component".into(),
                    ));
                }
                if sv.rho.iter().any(|r| r.abs() > 1.0) || sv.v0.iter().any(|&v| v < 0.0) {
                    return Err(CovestError::InvalidParameter(
                        "leverage must lie in [−1, 1] and initial variances be nonnegative".into(),
                    ));
                }
                &sv.correlation
            }
        };
        if m.nrows() != p || m.ncols() != p {
            return Err(CovestError::InvalidParameter(format!(
                "volatility matrix must be {p}×{p}"
            )));
        }
        psd_sqrt(m).map(|_| ())
    }
}

/// Spot covariance path of a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpotPath {
    Constant(DMatrix<f64>),
    /// Correlation matrix and per-cell spot volatilities `√v`.
    Cells {
        correlation: DMatrix<f64>,
        vols: Vec<Vec<f64>>,
    },
}

/// Simulated latent paths with their integrated covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPaths {
    /// Simulation nodes `0 = s_0 < … < s_K = T`.
    pub times: Vec<f64>,
    /// `values[l][k]` is component `l` at node `k`.
    pub values: Vec<Vec<f64>>,
    /// Integrated covariance `Σ_k Σ_{s_k} (s_{k+1} − s_k)`.
    pub integrated: DMatrix<f64>,
    pub spot: SpotPath,
    pub horizon: f64,
}

impl LatentPaths {
    /// Spot covariance on cell `k`.
    pub fn spot_at(&self, k: usize) -> DMatrix<f64> {
        match &self.spot {
            SpotPath::Constant(s) => s.clone(),
            SpotPath::Cells { correlation, vols } => {
                let v = &vols[k];
                DMatrix::from_fn(correlation.nrows(), correlation.ncols(), |i, j| {
                    v[i] * v[j] * correlation[(i, j)]
                })
            }
        }
    }

    /// Theory inputs carrying the spot covariance path (noise and design inputs left empty).
    pub fn theory_inputs(&self) -> TheoryInputs {
        match &self.spot {
            SpotPath::Constant(s) => TheoryInputs::constant(s.clone(), self.horizon),
            SpotPath::Cells { .. } => {
                let p = self.values.len();
                let mut t = TheoryInputs::constant(DMatrix::zeros(p, p), self.horizon);
                t.grid = self.times.clone();
                t.sigma = (0..self.times.len() - 1).map(|k| self.spot_at(k)).collect();
                t
            }
        }
    }

    /// Value of component `l` at time `s`; times that are not nodes use the previous node.
    pub fn value_at(&self, l: usize, s: f64) -> f64 {
        let k = self.times.partition_point(|&t| t < s);
        if k < self.times.len() && self.times[k] == s {
            self.values[l][k]
        } else {
            self.values[l][k.saturating_sub(1)]
        }
    }
}

/// Union of a fine equidistant grid and extra nodes, restricted to `[0, T]`.
pub fn simulation_grid(horizon: f64, fine_steps: usize, extra: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = (0..=fine_steps)
        .map(|i| horizon * i as f64 / fine_steps as f64)
        .chain(
            extra
                .iter()
                .copied()
                .filter(|t| (0.0..=horizon).contains(t)),
        )
        .collect();
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Simulates latent paths on the fine grid.
pub fn simulate_paths(model: &ItoModelConfig, rng: &mut ChaCha8Rng) -> Result<LatentPaths> {
    simulate_paths_with_times(model, &[], rng)
}

/// Simulates latent paths on the fine grid merged with the given observation times.
pub fn simulate_paths_with_times(
    model: &ItoModelConfig,
    extra: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<LatentPaths> {
    let grid = simulation_grid(model.horizon, model.fine_steps, extra);
    simulate_on_grid(model, grid, rng)
}

/// Simulates latent paths on an explicit node set starting at 0 and ending at `T`.
pub fn simulate_on_grid(
    model: &ItoModelConfig,
    grid: Vec<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<LatentPaths> {
    model.validate()?;
    if grid.len() < 2 || grid[0] != 0.0 || *grid.last().unwrap() != model.horizon {
        return Err(CovestError::InvalidParameter(
            "simulation grid must start at 0 and end at the horizon".into(),
        ));
    }
    let p = model.p();
    let k = grid.len();
    let mut values = vec![vec![0.0; k]; p];
    let mut xi = DVector::zeros(p);
    match &model.vol {
        VolSpec::Constant { sigma } => {
            let root = psd_sqrt(sigma)?;
            for step in 1..k {
                let dt = grid[step] - grid[step - 1];
                let sq = dt.sqrt();
                for x in xi.iter_mut() {
                    *x = rng.sample::<f64, _>(StandardNormal);
                }
                let dw = &root * &xi;
                for l in 0..p {
                    values[l][step] = values[l][step - 1] + model.drift[l] * dt + dw[l] * sq;
                }
            }
            Ok(LatentPaths {
                integrated: sigma * model.horizon,
                spot: SpotPath::Constant(sigma.clone()),
                times: grid,
                values,
                horizon: model.horizon,
            })
        }
        VolSpec::Stochastic(sv) => {
            let root = psd_sqrt(&sv.correlation)?;
            let mut v = sv.v0.clone();
            let mut vols = Vec::with_capacity(k - 1);
            let mut integrated = DMatrix::zeros(p, p);
            let mut zeta = vec![0.0; p];
            for step in 1..k {
                let dt = grid[step] - grid[step - 1];
                let sq = dt.sqrt();
                for x in xi.iter_mut() {
                    *x = rng.sample::<f64, _>(StandardNormal);
                }
                for z in zeta.iter_mut() {
                    *z = rng.sample::<f64, _>(StandardNormal);
                }
                let w = &root * &xi;
                let vol: Vec<f64> = v.iter().map(|x| x.max(0.0).sqrt()).collect();
                for i in 0..p {
                    for j in 0..p {
                        integrated[(i, j)] += vol[i] * vol[j] * sv.correlation[(i, j)] * dt;
                    }
                }
                for l in 0..p {
                    values[l][step] =
                        values[l][step - 1] + model.drift[l] * dt + vol[l] * w[l] * sq;
                    let db = sv.rho[l] * w[l] + (1.0 - sv.rho[l] * sv.rho[l]).sqrt() * zeta[l];
                    let vp = v[l].max(0.0);
                    v[l] += sv.kappa[l] * (sv.theta[l] - vp) * dt + sv.xi[l] * vp.sqrt() * db * sq;
                }
                vols.push(vol);
            }
            Ok(LatentPaths {
                integrated,
                spot: SpotPath::Cells {
                    correlation: sv.correlation.clone(),
                    vols,
                },
                times: grid,
                values,
                horizon: model.horizon,
            })
        }
    }
}

/// Sampling design of the observation times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SamplingKind {
    /// Common equidistant grid with `n` intervals.
    Equidistant { n: usize },
    /// Independent homogeneous Poisson arrivals with the given rates (per unit time).
    Poisson { rates: Vec<f64>, augment: bool },
    /// Explicit observation times per component.
    Explicit { times: Vec<Vec<f64>> },
}

/// Draws one sampling scheme per component.
pub fn sample_scheme(
    kind: &SamplingKind,
    p: usize,
    horizon: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<SamplingScheme>> {
    match kind {
        SamplingKind::Equidistant { n } => {
            let s = SamplingScheme::equidistant(*n, horizon)?;
            Ok(vec![s; p])
        }
        SamplingKind::Poisson { rates, augment } => {
            if rates.len() != p {
                return Err(CovestError::InvalidParameter(format!(
                    "{} Poisson rates for {p} components",
                    rates.len()
                )));
            }
            rates
                .iter()
                .map(|&lambda| {
                    if (lambda * horizon).is_nan() || lambda * horizon < 10.0 {
                        return Err(CovestError::InvalidParameter(format!(
                            "Poisson intensity λT = {} must be at least 10",
                            lambda * horizon
                        )));
                    }
                    let count = Poisson::new(lambda * horizon)
                        .map_err(|e| CovestError::InvalidParameter(e.to_string()))?
                        .sample(rng) as usize;
                    let mut t: Vec<f64> =
                        (0..count).map(|_| rng.random::<f64>() * horizon).collect();
                    if *augment {
                        t.push(0.0);
                        t.push(horizon);
                    }
                    t.sort_by(f64::total_cmp);
                    t.dedup();
                    if t.len() < 2 {
                        return Err(CovestError::TooFew {
                            what: "Poisson observation times",
                            required: 2,
                            actual: t.len(),
                        });
                    }
                    SamplingScheme::new(t, horizon)
                })
                .collect()
        }
        SamplingKind::Explicit { times } => {
            if times.len() != p {
                return Err(CovestError::InvalidParameter(format!(
                    "{} explicit schemes for {p} components",
                    times.len()
                )));
            }
            times
                .iter()
                .map(|t| {
                    if t.len() < 2 {
                        return Err(CovestError::TooFew {
                            what: "observation times",
                            required: 2,
                            actual: t.len(),
                        });
                    }
                    SamplingScheme::new(t.clone(), horizon)
                })
                .collect()
        }
    }
}

/// Marginal law of the standardised noise draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLaw {
    Gaussian,
    /// Symmetric ±1 draws (scaled to the target covariance).
    TwoPoint,
}

/// Additive microstructure noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Covariance `𝐇` of the noise vector at a fully synchronous observation.
    pub h: DMatrix<f64>,
    pub law: NoiseLaw,
}

impl NoiseConfig {
    /// No noise.
    pub fn none(p: usize) -> Self {
        Self {
            h: DMatrix::zeros(p, p),
            law: NoiseLaw::Gaussian,
        }
    }

    /// Independent Gaussian noise with standard deviations `eta`.
    pub fn independent(eta: &[f64]) -> Self {
        Self {
            h: DMatrix::from_diagonal(&DVector::from_iterator(
                eta.len(),
                eta.iter().map(|e| e * e),
            )),
            law: NoiseLaw::Gaussian,
        }
    }

    /// True when `𝐇 = 0`.
    pub fn is_zero(&self) -> bool {
        self.h.iter().all(|&x| x == 0.0)
    }
}

/// Observes latent paths at the given schemes with additive noise.
///
/// Noise vectors are drawn independently at every distinct timestamp; components
/// observed at the same timestamp receive jointly distributed draws with the
/// corresponding sub-block of `𝐇`.
pub fn observe(
    paths: &LatentPaths,
    schemes: &[SamplingScheme],
    noise: &NoiseConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<TickSeries>> {
    let p = schemes.len();
    if p != paths.values.len() {
        return Err(CovestError::InvalidParameter(format!(
            "{p} schemes for {} simulated components",
            paths.values.len()
        )));
    }
    let mut values: Vec<Vec<f64>> = schemes
        .iter()
        .enumerate()
        .map(|(l, s)| s.times().iter().map(|&t| paths.value_at(l, t)).collect())
        .collect();
    if !noise.is_zero() {
        if noise.h.nrows() != p {
            return Err(CovestError::InvalidParameter(format!(
                "noise covariance must be {p}×{p}"
            )));
        }
        let mut events: Vec<(f64, usize, usize)> = schemes
            .iter()
            .enumerate()
            .flat_map(|(l, s)| s.times().iter().enumerate().map(move |(i, &t)| (t, l, i)))
            .collect();
        events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut roots: HashMap<Vec<usize>, DMatrix<f64>> = HashMap::new();
        let mut start = 0;
        while start < events.len() {
            let mut end = start + 1;
            while end < events.len() && events[end].0 == events[start].0 {
                end += 1;
            }
            let comps: Vec<usize> = events[start..end].iter().map(|e| e.1).collect();
            if !roots.contains_key(&comps) {
                let sub = DMatrix::from_fn(comps.len(), comps.len(), |i, j| {
                    noise.h[(comps[i], comps[j])]
                });
                roots.insert(comps.clone(), psd_sqrt(&sub)?);
            }
            let root = &roots[&comps];
            let draw = DVector::from_fn(comps.len(), |_, _| match noise.law {
                NoiseLaw::Gaussian => rng.sample::<f64, _>(StandardNormal),
                NoiseLaw::TwoPoint => {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
            });
            let eps = root * draw;
            for (k, e) in events[start..end].iter().enumerate() {
                values[e.1][e.2] += eps[k];
            }
            start = end;
        }
    }
    schemes
        .iter()
        .zip(values)
        .map(|(s, v)| TickSeries::new(s.clone(), v))
        .collect()
}

/// All observation times of a set of schemes, merged.
pub fn merged_times(schemes: &[SamplingScheme]) -> Vec<f64> {
    let mut t: Vec<f64> = schemes
        .iter()
        .flat_map(|s| s.times().iter().copied())
        .collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

/// Simulates one dataset: schemes, latent paths on the merged grid, noisy observations.
///
/// With a constant spot covariance the latent path is simulated only at the
/// observation times (and `0`, `T`), which is exact in distribution.
pub fn simulate_dataset(
    model: &ItoModelConfig,
    sampling: &SamplingKind,
    noise: &NoiseConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<TickSeries>, LatentPaths)> {
    let schemes = sample_scheme(sampling, model.p(), model.horizon, rng)?;
    simulate_dataset_on(model, &schemes, noise, rng)
}

/// As [`simulate_dataset`] with fixed schemes.
pub fn simulate_dataset_on(
    model: &ItoModelConfig,
    schemes: &[SamplingScheme],
    noise: &NoiseConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<TickSeries>, LatentPaths)> {
    let obs = merged_times(schemes);
    let paths = match model.vol {
        VolSpec::Constant { .. } => {
            let mut grid = obs;
            grid.push(0.0);
            grid.push(model.horizon);
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            simulate_on_grid(model, grid, rng)?
        }
        VolSpec::Stochastic(_) => simulate_paths_with_times(model, &obs, rng)?,
    };
    let data = observe(&paths, schemes, noise, rng)?;
    Ok((data, paths))
}
