//! Sampling schemes, tick interpolation and refresh-time synchronisation.
//!
//! Besides the basic [`SamplingScheme`] and [`SyncGrid`] types this module
//! evaluates the sampling-design functionals that enter the asymptotic
//! covariances of the estimators:
//!
//! ```text
//! G^N(t)       = (N/T) Σ_{S_i ≤ t} (S_i − S_{i−1})²
//! 𝔊_{N,r}(t)   = N/(rT) Σ_{T_j ≤ t} ΔT_j Σ_{q=0}^{r∧j} ΔT_{j−q}
//! D^α_N(t)     = N/(MT) Σ_{S_r ≤ t} ΔS_r Σ_{i,k} α_iα_k Σ_{q=0}^{r∧i∧k} (1−q/i)(1−q/k) ΔS_{r−q}
//! S_kl^N(t)    = (1/N) Σ_{t_j^(k) ≤ t} Σ_{t_m^(l) ≤ t} 1{t_j^(k) = t_m^(l)}
//! ```
//!
//! ### Conventions
//! - Refresh times follow the standard recursion: `τ_0` is the largest first
//!   tick, `τ_i` is the largest over schemes of the first tick strictly after
//!   `τ_{i−1}`, and the sequence stops as soon as one scheme has no later tick.
//! - Next-tick interpolation on a refresh grid is clamped to the last
//!   observation of a scheme that has no tick at or after the refresh time
//!   (possible only at the final refresh time). Previous-tick interpolation is
//!   clamped to the first observation. With these conventions the refresh-time
//!   form of the Hayashi–Yoshida estimator reproduces its double-sum form exactly.
//! - Increments with an index below zero (`ΔT_0`) are treated as zero.
//! - Step functions are right-continuous and start at zero.

use serde::{Deserialize, Serialize};

use crate::error::{CovestError, Result};
use crate::kernels::WeightScheme;

/// Strictly increasing observation times of one component on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingScheme {
    times: Vec<f64>,
    horizon: f64,
}

impl SamplingScheme {
    /// Validates and wraps a set of observation times.
    pub fn new(times: Vec<f64>, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(CovestError::InvalidHorizon(horizon));
        }
        if times.is_empty() {
            return Err(CovestError::EmptyScheme);
        }
        for (i, &t) in times.iter().enumerate() {
            if !t.is_finite() || t < 0.0 || t > horizon {
                return Err(CovestError::OutOfHorizon { time: t, horizon });
            }
            if i > 0 && t <= times[i - 1] {
                return Err(CovestError::NotIncreasing { index: i });
            }
        }
        Ok(Self { times, horizon })
    }

    /// The grid `{iT/n : 0 ≤ i ≤ n}` with `n + 1` points.
    pub fn equidistant(n: usize, horizon: f64) -> Result<Self> {
        if n == 0 {
            return Err(CovestError::TooFew {
                what: "equidistant grid intervals",
                required: 1,
                actual: 0,
            });
        }
        let times = (0..=n).map(|i| horizon * i as f64 / n as f64).collect();
        Self::new(times, horizon)
    }

    /// Observation times.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Horizon `T`.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of observation times.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// Always false; schemes are nonempty by construction.
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of increments `n = len − 1`.
    pub fn intervals(&self) -> usize {
        self.times.len() - 1
    }

    /// Observation time with index `i`.
    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    /// First observation time.
    pub fn first(&self) -> f64 {
        self.times[0]
    }

    /// Last observation time.
    pub fn last(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Mesh `δ_n = max(max_i (t_i − t_{i−1}), t_0, T − t_n)`.
    pub fn max_gap(&self) -> f64 {
        let inner = self
            .times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0_f64, f64::max);
        inner.max(self.first()).max(self.horizon - self.last())
    }

    /// Index of the last observation at or before `s`.
    pub fn prev_index(&self, s: f64) -> Result<usize> {
        let k = self.times.partition_point(|&t| t <= s);
        if k == 0 {
            Err(CovestError::NoPreviousTick(s))
        } else {
            Ok(k - 1)
        }
    }

    /// Index of the first observation at or after `s`.
    pub fn next_index(&self, s: f64) -> Result<usize> {
        let k = self.times.partition_point(|&t| t < s);
        if k == self.times.len() {
            Err(CovestError::NoNextTick(s))
        } else {
            Ok(k)
        }
    }

    /// Previous-tick index, clamped to the first observation.
    pub fn prev_index_clamped(&self, s: f64) -> usize {
        self.times.partition_point(|&t| t <= s).saturating_sub(1)
    }

    /// Next-tick index, clamped to the last observation.
    pub fn next_index_clamped(&self, s: f64) -> usize {
        self.times
            .partition_point(|&t| t < s)
            .min(self.times.len() - 1)
    }

    /// Previous-tick time `t⁻(s)`, clamped to the first observation.
    pub fn prev_tick(&self, s: f64) -> f64 {
        self.times[self.prev_index_clamped(s)]
    }

    /// Next-tick time `t⁺(s)`, clamped to the last observation.
    pub fn next_tick(&self, s: f64) -> f64 {
        self.times[self.next_index_clamped(s)]
    }
}

/// Previous- and next-tick interpolation `(t⁻(s), t⁺(s))` of `s` in `scheme`.
///
/// Fails with [`CovestError::NoPreviousTick`] before the first tick and with
/// [`CovestError::NoNextTick`] after the last one.
pub fn tick_interpolation(scheme: &SamplingScheme, s: f64) -> Result<(f64, f64)> {
    if !(0.0..=scheme.horizon()).contains(&s) {
        return Err(CovestError::OutOfHorizon {
            time: s,
            horizon: scheme.horizon(),
        });
    }
    let lo = scheme.prev_index(s)?;
    let hi = scheme.next_index(s)?;
    Ok((scheme.time(lo), scheme.time(hi)))
}

/// Refresh times of an arbitrary number of schemes.
pub fn refresh_sequence(schemes: &[&SamplingScheme]) -> Vec<f64> {
    if schemes.is_empty() {
        return Vec::new();
    }
    let mut tau = schemes.iter().map(|s| s.first()).fold(f64::MIN, f64::max);
    let mut out = vec![tau];
    let mut pos: Vec<usize> = schemes.iter().map(|s| s.prev_index_clamped(tau)).collect();
    loop {
        let mut next = f64::MIN;
        for (s, p) in schemes.iter().zip(pos.iter_mut()) {
            let times = s.times();
            while *p < times.len() && times[*p] <= tau {
                *p += 1;
            }
            if *p == times.len() {
                return out;
            }
            next = next.max(times[*p]);
        }
        tau = next;
        out.push(tau);
    }
}

/// Refresh grid together with interpolation index maps into its source schemes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncGrid {
    refresh: SamplingScheme,
    sources: Vec<SamplingScheme>,
    next_idx: Vec<Vec<usize>>,
    prev_idx: Vec<Vec<usize>>,
}

impl SyncGrid {
    fn build(refresh: SamplingScheme, sources: Vec<SamplingScheme>) -> Self {
        let next_idx = sources
            .iter()
            .map(|s| {
                refresh
                    .times()
                    .iter()
                    .map(|&t| s.next_index_clamped(t))
                    .collect()
            })
            .collect();
        let prev_idx = sources
            .iter()
            .map(|s| {
                refresh
                    .times()
                    .iter()
                    .map(|&t| s.prev_index_clamped(t))
                    .collect()
            })
            .collect();
        Self {
            refresh,
            sources,
            next_idx,
            prev_idx,
        }
    }

    /// Refresh times as a sampling scheme.
    pub fn refresh(&self) -> &SamplingScheme {
        &self.refresh
    }

    /// Refresh times.
    pub fn times(&self) -> &[f64] {
        self.refresh.times()
    }

    /// Number of refresh intervals `N` (one less than the number of refresh times).
    pub fn count(&self) -> usize {
        self.refresh.intervals()
    }

    /// Horizon `T`.
    pub fn horizon(&self) -> f64 {
        self.refresh.horizon()
    }

    /// Underlying schemes the grid was built from.
    pub fn sources(&self) -> &[SamplingScheme] {
        &self.sources
    }

    /// Index of `t⁺(τ_i)` in source scheme `l`.
    pub fn next_index(&self, l: usize, i: usize) -> usize {
        self.next_idx[l][i]
    }

    /// Index of `t⁻(τ_i)` in source scheme `l`.
    pub fn prev_index(&self, l: usize, i: usize) -> usize {
        self.prev_idx[l][i]
    }

    /// All next-tick indices for source scheme `l`.
    pub fn next_indices(&self, l: usize) -> &[usize] {
        &self.next_idx[l]
    }

    /// All previous-tick indices for source scheme `l`.
    pub fn prev_indices(&self, l: usize) -> &[usize] {
        &self.prev_idx[l]
    }
}

fn check_horizons(a: &SamplingScheme, b: &SamplingScheme) -> Result<()> {
    if (a.horizon() - b.horizon()).abs() > 1e-12 * a.horizon().max(b.horizon()) {
        return Err(CovestError::HorizonMismatch(a.horizon(), b.horizon()));
    }
    Ok(())
}

/// Pairwise refresh times `τ_0 < τ_1 < … < τ_N` of two schemes.
pub fn pairwise_refresh(a: &SamplingScheme, b: &SamplingScheme) -> Result<SyncGrid> {
    check_horizons(a, b)?;
    let times = refresh_sequence(&[a, b]);
    let refresh = SamplingScheme::new(times, a.horizon())?;
    Ok(SyncGrid::build(refresh, vec![a.clone(), b.clone()]))
}

/// Global refresh grid built from the two pairwise grids of components 1/2 and 3/4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalGrid {
    grid: SyncGrid,
    pair12: SyncGrid,
    pair34: SyncGrid,
    schemes: Vec<SamplingScheme>,
    next_idx: Vec<Vec<usize>>,
    prev_idx: Vec<Vec<usize>>,
}

impl GlobalGrid {
    /// Global refresh grid; its sources are the two pairwise refresh grids.
    pub fn grid(&self) -> &SyncGrid {
        &self.grid
    }

    /// Global refresh times `S_i`.
    pub fn times(&self) -> &[f64] {
        self.grid.times()
    }

    /// Number of global refresh intervals `N`.
    pub fn count(&self) -> usize {
        self.grid.count()
    }

    /// Horizon `T`.
    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }

    /// Pairwise grid of components 1 and 2.
    pub fn pair12(&self) -> &SyncGrid {
        &self.pair12
    }

    /// Pairwise grid of components 3 and 4.
    pub fn pair34(&self) -> &SyncGrid {
        &self.pair34
    }

    /// The four underlying schemes in the order 1, 2, 3, 4.
    pub fn schemes(&self) -> &[SamplingScheme] {
        &self.schemes
    }

    /// Index of `t_l⁺(S_i)` in underlying scheme `l` (0-based component).
    pub fn next_index(&self, l: usize, i: usize) -> usize {
        self.next_idx[l][i]
    }

    /// Index of `t_l⁻(S_i)` in underlying scheme `l` (0-based component).
    pub fn prev_index(&self, l: usize, i: usize) -> usize {
        self.prev_idx[l][i]
    }
}

/// Refresh times of the two pairwise refresh sequences ("refresh times of refresh times").
pub fn global_refresh(pair12: &SyncGrid, pair34: &SyncGrid) -> Result<GlobalGrid> {
    if pair12.sources().len() != 2 || pair34.sources().len() != 2 {
        return Err(CovestError::InvalidParameter(
            "global_refresh expects two pairwise grids".into(),
        ));
    }
    let grid = pairwise_refresh(pair12.refresh(), pair34.refresh())?;
    let schemes: Vec<SamplingScheme> = pair12
        .sources()
        .iter()
        .chain(pair34.sources())
        .cloned()
        .collect();
    let next_idx = schemes
        .iter()
        .map(|s| {
            grid.times()
                .iter()
                .map(|&t| s.next_index_clamped(t))
                .collect()
        })
        .collect();
    let prev_idx = schemes
        .iter()
        .map(|s| {
            grid.times()
                .iter()
                .map(|&t| s.prev_index_clamped(t))
                .collect()
        })
        .collect();
    Ok(GlobalGrid {
        grid,
        pair12: pair12.clone(),
        pair34: pair34.clone(),
        schemes,
        next_idx,
        prev_idx,
    })
}

/// Global grid of four schemes, built through the two pairwise grids.
pub fn global_refresh_of(schemes: [&SamplingScheme; 4]) -> Result<GlobalGrid> {
    let g12 = pairwise_refresh(schemes[0], schemes[1])?;
    let g34 = pairwise_refresh(schemes[2], schemes[3])?;
    global_refresh(&g12, &g34)
}

/// Right-continuous nondecreasing step function starting at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    /// Builds a step function from breakpoints and the values attained at them.
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breaks.len() != values.len() {
            return Err(CovestError::InvalidParameter(
                "breakpoints and values differ in length".into(),
            ));
        }
        if breaks.windows(2).any(|w| w[1] < w[0]) {
            return Err(CovestError::InvalidParameter(
                "breakpoints must be nondecreasing".into(),
            ));
        }
        Ok(Self { breaks, values })
    }

    /// Builds the cumulative sum of `(breakpoint, jump)` pairs given in nondecreasing order.
    pub fn from_jumps(jumps: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut breaks = Vec::new();
        let mut values = Vec::new();
        let mut acc = 0.0;
        for (t, dv) in jumps {
            acc += dv;
            breaks.push(t);
            values.push(acc);
        }
        Self { breaks, values }
    }

    /// The function identically zero.
    pub fn zero() -> Self {
        Self {
            breaks: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Breakpoints.
    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// Values attained at (and right of) each breakpoint.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.breaks.partition_point(|&b| b <= t);
        if k == 0 {
            0.0
        } else {
            self.values[k - 1]
        }
    }

    /// Value at the last breakpoint.
    pub fn total(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Increment `f(b) − f(a)`.
    pub fn increment(&self, a: f64, b: f64) -> f64 {
        self.eval(b) - self.eval(a)
    }

    /// Generalised inverse `inf{t : f(t) ≥ level}`; `None` if the level is never reached.
    pub fn level_time(&self, level: f64) -> Option<f64> {
        if level <= 0.0 {
            return Some(0.0);
        }
        let k = self.values.partition_point(|&v| v < level);
        self.breaks.get(k).copied()
    }

    /// True if values never decrease and the first value is nonnegative.
    pub fn is_nondecreasing(&self) -> bool {
        self.values.first().is_none_or(|&v| v >= 0.0)
            && self.values.windows(2).all(|w| w[1] >= w[0])
    }

    /// Stieltjes sum `∫ f(s) dF(s)` for `f` piecewise constant on `grid` cells.
    ///
    /// `cell_values[k]` is the value of `f` on `(grid[k], grid[k+1]]`.
    pub fn stieltjes(&self, grid: &[f64], cell_values: &[f64]) -> f64 {
        grid.windows(2)
            .zip(cell_values)
            .map(|(w, &f)| f * self.increment(w[0], w[1]))
            .sum::<f64>()
            + cell_values.first().map_or(0.0, |&f| f * self.eval(grid[0]))
    }
}

/// Quadratic covariations of times `G, F, H, I` for a global grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeCovariationBundle {
    pub g: StepFunction,
    pub f_24_13: StepFunction,
    pub f_23_14: StepFunction,
    pub h_24_13: StepFunction,
    pub h_23_14: StepFunction,
    pub i_24_13: StepFunction,
    pub i_23_14: StepFunction,
    /// Number of global refresh intervals `N`.
    pub n: usize,
    /// Horizon `T`.
    pub horizon: f64,
}

#[inline]
fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// Per-index increments of `(F, H, I)` for the component order `(s1, s2, s3, s4)`.
fn fhi_increments(
    s: &[f64],
    sch: [&SamplingScheme; 4],
    tau: &SamplingScheme,
    tt: &SamplingScheme,
    i: usize,
) -> (f64, f64, f64) {
    let [s1, s2, s3, s4] = sch;
    let (si, sp, sn) = (s[i], s[i - 1], s[i + 1]);
    let p = |x: &SamplingScheme, t: f64| x.next_tick(t);
    let m = |x: &SamplingScheme, t: f64| x.prev_tick(t);

    let f = pos(p(s1, si).min(p(s3, si)) - si) * (si - m(s2, sp).max(m(s4, sp)))
        + pos(sp - m(s1, sp).min(m(s3, sp))) * (si - sp)
        + pos(p(s2, si).min(p(s4, si)) - si) * (si - m(s1, sp).max(m(s3, sp)))
        + pos(sp - m(s2, sp).min(m(s4, sp))) * (si - sp);

    let h = pos(p(s1, si).min(p(s3, si)) - si) * pos(sn - m(s2, sn).max(m(s4, sn)))
        + pos(p(s2, si).min(p(s4, si)) - si) * pos(sn - m(s1, sn).max(m(s3, sn)));

    let (t12m, t34m) = (m(tau, si), m(tt, si));
    let (t12p, t34p) = (p(tau, si), p(tt, si));
    let lead = pos(si - t12m.max(t34m));
    let tail = pos(m(tau, sp).min(m(tt, sp)));
    let tail_gap = pos(p(tau, sp).min(p(tt, sp)) - sp);
    let mut inc = 0.0;
    for (a, b) in [(s1, s3), (s2, s4)] {
        let upper = p(a, si).max(p(b, si)).min(p(a, t12p).max(p(b, t34p)));
        inc += lead * pos(upper - t12p.max(t34p));
        inc += pos(tail - m(a, sp).max(m(b, sp))) * tail_gap;
    }
    (f, h, inc)
}

/// Evaluates the quadratic covariations of times `G, F, H, I` of a global grid.
///
/// Breakpoints of `G` sit at `S_i`, those of `F, H, I` at `S_{i+1}`; every
/// function is scaled by `N/T`. The `23/14` variants swap the roles of
/// components 3 and 4.
pub fn time_covariations(global: &GlobalGrid) -> Result<TimeCovariationBundle> {
    let s = global.times();
    if s.len() < 3 {
        return Err(CovestError::TooFew {
            what: "global refresh times",
            required: 3,
            actual: s.len(),
        });
    }
    let n = global.count();
    let horizon = global.horizon();
    let scale = n as f64 / horizon;
    let sch = global.schemes();
    let (s1, s2, s3, s4) = (&sch[0], &sch[1], &sch[2], &sch[3]);
    let tau = global.pair12().refresh();
    let tt = global.pair34().refresh();

    let g = StepFunction::from_jumps(
        s.windows(2)
            .map(|w| (w[1], scale * (w[1] - w[0]) * (w[1] - w[0]))),
    );

    let mut jumps_a = Vec::with_capacity(n);
    let mut jumps_b = Vec::with_capacity(n);
    for i in 1..n {
        let a = fhi_increments(s, [s1, s2, s3, s4], tau, tt, i);
        let b = fhi_increments(s, [s1, s2, s4, s3], tau, tt, i);
        jumps_a.push((s[i + 1], a));
        jumps_b.push((s[i + 1], b));
    }
    let mk = |jumps: &[(f64, (f64, f64, f64))], pick: fn(&(f64, f64, f64)) -> f64| {
        StepFunction::from_jumps(jumps.iter().map(|(t, v)| (*t, scale * pick(v))))
    };
    Ok(TimeCovariationBundle {
        g,
        f_24_13: mk(&jumps_a, |v| v.0),
        h_24_13: mk(&jumps_a, |v| v.1),
        i_24_13: mk(&jumps_a, |v| v.2),
        f_23_14: mk(&jumps_b, |v| v.0),
        h_23_14: mk(&jumps_b, |v| v.1),
        i_23_14: mk(&jumps_b, |v| v.2),
        n,
        horizon,
    })
}

/// Local sampling autocorrelation `𝔊_{N,r}(t)` of a grid.
pub fn lasa(grid: &SamplingScheme, r: usize, t: f64) -> Result<f64> {
    let n = grid.intervals();
    if r == 0 || r >= n {
        return Err(CovestError::InvalidParameter(format!(
            "lag r = {r} must satisfy 1 ≤ r < N = {n}"
        )));
    }
    let times = grid.times();
    let dt: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    // prefix[k] = Σ_{j<k} dt[j]
    let mut prefix = vec![0.0; n + 1];
    for j in 0..n {
        prefix[j + 1] = prefix[j] + dt[j];
    }
    let mut acc = 0.0;
    for j in 1..=n {
        if times[j] > t {
            break;
        }
        let lo = j.saturating_sub(r.min(j - 1));
        acc += dt[j - 1] * (prefix[j] - prefix[lo - 1]);
    }
    Ok(n as f64 / (r as f64 * grid.horizon()) * acc)
}

/// Squared transformed weights `f_q² = (Σ_{i≥max(q,1)} α_i (1 − q/i))²` for `q = 0..M`.
fn transformed_weight_squares(alphas: &[f64]) -> Vec<f64> {
    let m = alphas.len();
    (0..=m)
        .map(|q| {
            let f: f64 = (q.max(1)..=m)
                .map(|i| alphas[i - 1] * (1.0 - q as f64 / i as f64))
                .sum();
            f * f
        })
        .collect()
}

/// Per-index contributions of the weighted local sampling autocorrelation.
///
/// Element `r − 1` is `N/(MT) · ΔS_r · Σ_q f_q² ΔS_{r−q}`, so that
/// `D^α_N(t)` is the sum of all contributions with `S_r ≤ t`.
pub fn weighted_lasa_terms(grid: &SamplingScheme, w: &WeightScheme) -> Result<Vec<f64>> {
    let n = grid.intervals();
    let m = w.m();
    if m > n {
        return Err(CovestError::InvalidParameter(format!(
            "multi-scale frequency M = {m} exceeds N = {n}"
        )));
    }
    let f2 = transformed_weight_squares(w.alphas());
    let dt: Vec<f64> = grid.times().windows(2).map(|x| x[1] - x[0]).collect();
    let scale = n as f64 / (m as f64 * grid.horizon());
    Ok((1..=n)
        .map(|r| {
            let inner: f64 = (0..=(r - 1).min(m)).map(|q| f2[q] * dt[r - 1 - q]).sum();
            scale * dt[r - 1] * inner
        })
        .collect())
}

/// Finite-N weighted local sampling autocorrelation `D^α_N(t)`.
pub fn weighted_lasa(grid: &SamplingScheme, w: &WeightScheme, t: f64) -> Result<f64> {
    Ok(weighted_lasa_function(grid, w)?.eval(t))
}

/// `D^α_N` as a step function with breakpoints at the grid times `S_1, …, S_N`.
pub fn weighted_lasa_function(grid: &SamplingScheme, w: &WeightScheme) -> Result<StepFunction> {
    let terms = weighted_lasa_terms(grid, w)?;
    Ok(StepFunction::from_jumps(
        grid.times()[1..].iter().copied().zip(terms),
    ))
}

/// Synchronous-overlap functions and counts of four schemes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncOverlap {
    pub s13: StepFunction,
    pub s14: StepFunction,
    pub s23: StepFunction,
    pub s24: StepFunction,
    /// Finite-N value of `𝔖_13^24`.
    pub frak_13_24: f64,
    /// Finite-N value of `𝔖_14^23`.
    pub frak_14_23: f64,
    /// Finite-N value of `𝔖̃_13^24`.
    pub tilde_13_24: f64,
    /// Finite-N value of `𝔖̃_14^23`.
    pub tilde_14_23: f64,
    /// Number of global refresh intervals used for normalisation.
    pub n: usize,
}

impl SyncOverlap {
    /// True when no pair of schemes shares a timestamp.
    pub fn is_disjoint(&self) -> bool {
        [&self.s13, &self.s14, &self.s23, &self.s24]
            .iter()
            .all(|s| s.total() == 0.0)
    }
}

fn equal_times_function(
    a: &SamplingScheme,
    b: &SamplingScheme,
    n: usize,
    eps: f64,
) -> StepFunction {
    let (ta, tb) = (a.times(), b.times());
    let mut jumps = Vec::new();
    for &x in ta {
        let lo = tb.partition_point(|&y| y < x - eps);
        let hi = tb.partition_point(|&y| y <= x + eps);
        for &y in &tb[lo..hi] {
            jumps.push(x.max(y));
        }
    }
    jumps.sort_by(f64::total_cmp);
    StepFunction::from_jumps(jumps.into_iter().map(|t| (t, 1.0 / n as f64)))
}

fn window(values: &[f64], lo: usize, hi: usize, x: f64, eps: f64) -> usize {
    let sub = &values[lo..hi];
    let a = sub.partition_point(|&y| y < x - eps);
    let b = sub.partition_point(|&y| y <= x + eps);
    b - a
}

/// Count `Σ_j Σ_k Σ_{r ≤ j∧M12} Σ_{q ≤ k∧M34} 1{pa_j = pb_k, ma_{j−r} = mb_{k−q}}`.
fn frak_count(
    pa: &[f64],
    pb: &[f64],
    ma: &[f64],
    mb: &[f64],
    m12: usize,
    m34: usize,
    eps: f64,
) -> f64 {
    let mut count = 0usize;
    for j in 0..pa.len() {
        let lo = pb.partition_point(|&y| y < pa[j] - eps);
        let hi = pb.partition_point(|&y| y <= pa[j] + eps);
        for k in lo..hi {
            if k == 0 || j == 0 {
                continue;
            }
            let qmax = k.min(m34);
            for r in 1..=j.min(m12) {
                count += window(mb, k - qmax, k, ma[j - r], eps);
            }
        }
    }
    count as f64
}

fn approx_eq(a: f64, b: f64, eps: f64) -> bool {
    (a - b).abs() <= eps
}

/// Synchronous-overlap functions `S_kl^N` and the four `𝔖` sums of a global grid.
///
/// The `𝔖` sums average their two indicator sums, so that four identical
/// schemes give values close to 1. Timestamps are compared with tolerance
/// `eps` (0 means exact equality).
pub fn sync_overlap(global: &GlobalGrid, m12: usize, m34: usize, eps: f64) -> Result<SyncOverlap> {
    if m12 == 0 || m34 == 0 {
        return Err(CovestError::InvalidParameter(
            "multi-scale frequencies must be positive".into(),
        ));
    }
    let n = global.count().max(1);
    let sch = global.schemes();
    let tau = global.pair12();
    let tt = global.pair34();
    let mn = m12.min(m34) as f64;

    let next = |g: &SyncGrid, l: usize| -> Vec<f64> {
        g.next_indices(l)
            .iter()
            .map(|&k| g.sources()[l].time(k))
            .collect()
    };
    let prev = |g: &SyncGrid, l: usize| -> Vec<f64> {
        g.prev_indices(l)
            .iter()
            .map(|&k| g.sources()[l].time(k))
            .collect()
    };
    let (p1, p2, m1, m2) = (next(tau, 0), next(tau, 1), prev(tau, 0), prev(tau, 1));
    let (p3, p4, m3, m4) = (next(tt, 0), next(tt, 1), prev(tt, 0), prev(tt, 1));

    let norm = 0.5 / (n as f64 * mn);
    let frak_13_24 = norm
        * (frak_count(&p1, &p3, &m2, &m4, m12, m34, eps)
            + frak_count(&p2, &p4, &m1, &m3, m12, m34, eps));
    let frak_14_23 = norm
        * (frak_count(&p1, &p4, &m2, &m3, m12, m34, eps)
            + frak_count(&p2, &p3, &m1, &m4, m12, m34, eps));

    let n12 = tau.count();
    let n34 = tt.count();
    let tilde = |pa: &[f64],
                 pb: &[f64],
                 pc: &[f64],
                 pd: &[f64],
                 ma: &[f64],
                 mb: &[f64],
                 mc: &[f64],
                 md: &[f64]| {
        let mut c = 0usize;
        for j in 0..m12.min(n12 + 1) {
            for k in 0..m34.min(n34 + 1) {
                if approx_eq(pa[j], pb[k], eps) && approx_eq(pc[j], pd[k], eps) {
                    c += 1;
                }
                let (jj, kk) = (n12 - j, n34 - k);
                if approx_eq(ma[jj], mb[kk], eps) && approx_eq(mc[jj], md[kk], eps) {
                    c += 1;
                }
            }
        }
        0.5 * c as f64 / mn
    };
    let tilde_13_24 = tilde(&p1, &p3, &p2, &p4, &m1, &m3, &m2, &m4);
    let tilde_14_23 = tilde(&p1, &p4, &p2, &p3, &m1, &m4, &m2, &m3);

    Ok(SyncOverlap {
        s13: equal_times_function(&sch[0], &sch[2], n, eps),
        s14: equal_times_function(&sch[0], &sch[3], n, eps),
        s23: equal_times_function(&sch[1], &sch[2], n, eps),
        s24: equal_times_function(&sch[1], &sch[3], n, eps),
        frak_13_24,
        frak_14_23,
        tilde_13_24,
        tilde_14_23,
        n,
    })
}
