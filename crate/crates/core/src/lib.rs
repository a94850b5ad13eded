//! Integrated-covariance estimation for asynchronous, noisy high-frequency data.
//!
//! The crate provides
//! - refresh-time synchronisation and sampling-design functionals ([`sampling`]),
//! - kernels, multi-scale weights and their asymptotic constants ([`kernels`]),
//! - realized, multi-scale, kernel, Hayashi–Yoshida and generalized multi-scale
//!   estimators ([`estimators`]),
//! - asymptotic covariance formulas and their consistent estimators ([`avar`]),
//! - a conditional-independence test ([`citest`]),
//! - simulation and Monte Carlo validation ([`sim`], [`mc`]),
//! - tick-file I/O and a command-line front end ([`cli`]).

pub mod avar;
pub mod citest;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod kernels;
pub mod mc;
pub mod sampling;
pub mod sim;

pub use avar::{
    acov_gms_hat, acov_matrix_hat, acov_rc_hat, acov_theory, isserlis_cov, lincomb_avar,
    standardize, svec_index, svec_pack, svec_unpack, AcovMatrix, Rate, Regime, TheoryInputs,
};
pub use citest::{ci_avar, ci_statistic, ci_test, CiTestResult};
pub use error::{CovestError, Result};
pub use estimators::{
    estimate_matrix, generalized_multiscale, hayashi_yoshida, kernel_adjusted, kernel_estimator,
    multiscale, multiscale_adjusted, noise_moments, realized_cov, CovEstimate, EstimateConfig,
    Method, NoiseMoments, TickSeries,
};
pub use kernels::{
    builtin_kernel, cubic_weights, end_effect_adjust, kernel_constants, weights_from_kernel,
    KernelConstants, KernelFunction, WeightScheme,
};
pub use mc::{mc_validate, McReport, Scenario, ScenarioSpec};
pub use sampling::{
    global_refresh, lasa, pairwise_refresh, sync_overlap, tick_interpolation, time_covariations,
    weighted_lasa, GlobalGrid, SamplingScheme, StepFunction, SyncGrid, SyncOverlap,
    TimeCovariationBundle,
};
pub use sim::{
    observe, sample_scheme, simulate_paths, ItoModelConfig, LatentPaths, NoiseConfig, SamplingKind,
};
