//! Brute-force reference implementations used as test oracles.
//!
//! Every function here is a direct transcription of a summation formula with
//! naive linear scans, written without reference to the library internals.

#![allow(dead_code, clippy::needless_range_loop)]

use covest::{SamplingScheme, TickSeries};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strictly increasing random times in `[0, horizon]` with `first_zero` forcing a tick at 0.
pub fn random_times(rng: &mut ChaCha8Rng, n: usize, horizon: f64, first_zero: bool) -> Vec<f64> {
    let mut t: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * horizon).collect();
    if first_zero {
        t.push(0.0);
    }
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

/// Random times on a lattice `k/grid`, so that different schemes share timestamps.
pub fn lattice_times(rng: &mut ChaCha8Rng, n: usize, grid: usize) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..=grid)).collect();
    idx.push(0);
    idx.sort_unstable();
    idx.dedup();
    idx.into_iter().map(|k| k as f64 / grid as f64).collect()
}

pub fn random_walk(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let mut x = 0.0;
    (0..len)
        .map(|_| {
            x += rng.random::<f64>() - 0.5;
            x
        })
        .collect()
}

pub fn series(times: &[f64], values: &[f64], horizon: f64) -> TickSeries {
    TickSeries::from_parts(times.to_vec(), values.to_vec(), horizon).unwrap()
}

pub fn scheme(times: &[f64], horizon: f64) -> SamplingScheme {
    SamplingScheme::new(times.to_vec(), horizon).unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || (a - b).abs() < 1e-300
}

/// Last tick at or before `s`, or the first tick if there is none.
pub fn t_minus(times: &[f64], s: f64) -> f64 {
    let mut best = times[0];
    for &t in times {
        if t <= s {
            best = t;
        }
    }
    best
}

/// First tick at or after `s`, or the last tick if there is none.
pub fn t_plus(times: &[f64], s: f64) -> f64 {
    for &t in times {
        if t >= s {
            return t;
        }
    }
    times[times.len() - 1]
}

pub fn value_at(times: &[f64], values: &[f64], t: f64) -> f64 {
    for (k, &x) in times.iter().enumerate() {
        if x == t {
            return values[k];
        }
    }
    panic!("time {t} is not an observation time");
}

/// Refresh times by the recursion: start at the largest first tick, then
/// repeatedly take the maximum over schemes of the first tick strictly after the current time.
pub fn refresh(schemes: &[&[f64]]) -> Vec<f64> {
    let mut tau = schemes.iter().map(|s| s[0]).fold(f64::MIN, f64::max);
    let mut out = vec![tau];
    loop {
        let mut next = f64::MIN;
        for s in schemes {
            match s.iter().find(|&&t| t > tau) {
                Some(&t) => next = next.max(t),
                None => return out,
            }
        }
        tau = next;
        out.push(tau);
    }
}

/// Refresh times of refresh times of four schemes.
pub fn global_refresh(s: [&[f64]; 4]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let tau = refresh(&[s[0], s[1]]);
    let tt = refresh(&[s[2], s[3]]);
    let big = refresh(&[&tau, &tt]);
    (big, tau, tt)
}

/// Double sum over all pairs of observation intervals with a common interior point.
pub fn hayashi_yoshida(ta: &[f64], ya: &[f64], tb: &[f64], yb: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 1..ta.len() {
        for j in 1..tb.len() {
            let lo = ta[i - 1].max(tb[j - 1]);
            let hi = ta[i].min(tb[j]);
            if hi > lo {
                acc += (ya[i] - ya[i - 1]) * (yb[j] - yb[j - 1]);
            }
        }
    }
    acc
}

/// Realized covariance of the subsample starting at `offset` with step `step`.
fn subsampled_rc(a: &[f64], b: &[f64], step: usize, offset: usize) -> f64 {
    let mut acc = 0.0;
    let mut j = offset + step;
    while j < a.len() {
        acc += (a[j] - a[j - step]) * (b[j] - b[j - step]);
        j += step;
    }
    acc
}

/// Multi-scale estimator as a weighted combination of averaged subsampled realized covariances.
pub fn multiscale(a: &[f64], b: &[f64], alphas: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (k, alpha) in alphas.iter().enumerate() {
        let i = k + 1;
        let avg: f64 = (0..i).map(|o| subsampled_rc(a, b, i, o)).sum::<f64>() / i as f64;
        acc += alpha * avg;
    }
    acc
}

/// Realized kernel `RC·rc_scale + Σ_h k(h/H) (Γ_h + Γ_{−h})`.
pub fn kernel(a: &[f64], b: &[f64], k: impl Fn(f64) -> f64, big_h: usize, rc_scale: f64) -> f64 {
    let da: Vec<f64> = a.windows(2).map(|w| w[1] - w[0]).collect();
    let db: Vec<f64> = b.windows(2).map(|w| w[1] - w[0]).collect();
    let n = da.len();
    let mut acc = 0.0;
    for j in 0..n {
        acc += rc_scale * da[j] * db[j];
    }
    for h in 1..=big_h {
        let w = k(h as f64 / big_h as f64);
        for j in 0..n {
            for i in 0..n {
                if j == i + h || i == j + h {
                    acc += w * da[j] * db[i];
                }
            }
        }
    }
    acc
}

/// Generalized multi-scale estimator with next- and previous-tick interpolation to refresh times.
pub fn generalized_multiscale(
    ta: &[f64],
    ya: &[f64],
    tb: &[f64],
    yb: &[f64],
    alphas: &[f64],
) -> f64 {
    let tau = refresh(&[ta, tb]);
    let n = tau.len() - 1;
    let mut acc = 0.0;
    for (k, alpha) in alphas.iter().enumerate() {
        let i = k + 1;
        let mut s = 0.0;
        for j in i..=n {
            let da =
                value_at(ta, ya, t_plus(ta, tau[j])) - value_at(ta, ya, t_minus(ta, tau[j - i]));
            let db =
                value_at(tb, yb, t_plus(tb, tau[j])) - value_at(tb, yb, t_minus(tb, tau[j - i]));
            s += da * db;
        }
        acc += alpha / i as f64 * s;
    }
    acc
}

/// `n · ¼ [D(1,2,3,4) + D(1,2,4,3) + D(3,4,1,2) + D(3,4,2,1)]` with
/// `D(1,2,3,4) = Σ_{i=1}^{n−1} Δ_i X1 Δ_{i+1} X2 Δ_i X3 Δ_{i+1} X4 + Δ_{i+1} X1 Δ_i X2 Δ_i X3 Δ_{i+1} X4`.
pub fn acov_rc_hat(x: [&[f64]; 4]) -> f64 {
    let d: Vec<Vec<f64>> = x
        .iter()
        .map(|v| v.windows(2).map(|w| w[1] - w[0]).collect())
        .collect();
    let n = d[0].len();
    let display = |a: &[f64], b: &[f64], c: &[f64], e: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 1..n {
            let (p, q) = (i - 1, i);
            s += a[p] * b[q] * c[p] * e[q];
            s += a[q] * b[p] * c[p] * e[q];
        }
        s
    };
    let total = display(&d[0], &d[1], &d[2], &d[3])
        + display(&d[0], &d[1], &d[3], &d[2])
        + display(&d[2], &d[3], &d[0], &d[1])
        + display(&d[2], &d[3], &d[1], &d[0]);
    n as f64 * 0.25 * total
}

fn pos(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Jumps (at `S_{i+1}`) of `F_{24}^{13}`, `H_{24}^{13}`, `I_{24}^{13}` for schemes in the order `(s1, s2, s3, s4)`.
fn fhi_jumps(s: &[f64], sc: [&[f64]; 4], tau: &[f64], tt: &[f64]) -> Vec<(f64, f64, f64, f64)> {
    let [s1, s2, s3, s4] = sc;
    let n = s.len() - 1;
    let mut out = Vec::new();
    for i in 1..n {
        let (a, b, c) = (s[i - 1], s[i], s[i + 1]);
        let f1 =
            pos(t_plus(s1, b).min(t_plus(s3, b)) - b) * (b - t_minus(s2, a).max(t_minus(s4, a)));
        let f2 = pos(a - t_minus(s1, a).min(t_minus(s3, a))) * (b - a);
        let f3 =
            pos(t_plus(s2, b).min(t_plus(s4, b)) - b) * (b - t_minus(s1, a).max(t_minus(s3, a)));
        let f4 = pos(a - t_minus(s2, a).min(t_minus(s4, a))) * (b - a);
        let h1 =
            pos(t_plus(s1, b).min(t_plus(s3, b)) - b) * pos(c - t_minus(s2, c).max(t_minus(s4, c)));
        let h2 =
            pos(t_plus(s2, b).min(t_plus(s4, b)) - b) * pos(c - t_minus(s1, c).max(t_minus(s3, c)));
        let big_tau_minus_b = t_minus(tau, b).max(t_minus(tt, b));
        let big_tau_plus_b = t_plus(tau, b).max(t_plus(tt, b));
        let mut iv = 0.0;
        for (x, y) in [(s1, s3), (s2, s4)] {
            let inner = t_plus(x, b)
                .max(t_plus(y, b))
                .min(t_plus(x, t_plus(tau, b)).max(t_plus(y, t_plus(tt, b))));
            iv += pos(b - big_tau_minus_b) * pos(inner - big_tau_plus_b);
            iv += pos(t_minus(tau, a).min(t_minus(tt, a)) - t_minus(x, a).max(t_minus(y, a)))
                * pos(t_plus(tau, a).min(t_plus(tt, a)) - a);
        }
        out.push((c, f1 + f2 + f3 + f4, h1 + h2, iv));
    }
    out
}

/// Totals and values at `t` of the quadratic covariations of times.
pub struct TimeCovariationOracle {
    pub n: usize,
    pub g: Vec<(f64, f64)>,
    pub f_24_13: Vec<(f64, f64)>,
    pub h_24_13: Vec<(f64, f64)>,
    pub i_24_13: Vec<(f64, f64)>,
    pub f_23_14: Vec<(f64, f64)>,
    pub h_23_14: Vec<(f64, f64)>,
    pub i_23_14: Vec<(f64, f64)>,
}

/// Evaluates a list of `(jump time, jump size)` pairs at `t`.
pub fn eval_jumps(jumps: &[(f64, f64)], t: f64) -> f64 {
    jumps.iter().filter(|(x, _)| *x <= t).map(|(_, v)| v).sum()
}

pub fn time_covariations(sc: [&[f64]; 4], horizon: f64) -> TimeCovariationOracle {
    let (s, tau, tt) = global_refresh(sc);
    let n = s.len() - 1;
    let scale = n as f64 / horizon;
    let g = (1..=n)
        .map(|i| (s[i], scale * (s[i] - s[i - 1]).powi(2)))
        .collect();
    let a = fhi_jumps(&s, sc, &tau, &tt);
    let b = fhi_jumps(&s, [sc[0], sc[1], sc[3], sc[2]], &tau, &tt);
    let pick = |v: &[(f64, f64, f64, f64)], k: usize| -> Vec<(f64, f64)> {
        v.iter()
            .map(|x| (x.0, scale * [x.1, x.2, x.3][k]))
            .collect()
    };
    TimeCovariationOracle {
        n,
        g,
        f_24_13: pick(&a, 0),
        h_24_13: pick(&a, 1),
        i_24_13: pick(&a, 2),
        f_23_14: pick(&b, 0),
        h_23_14: pick(&b, 1),
        i_23_14: pick(&b, 2),
    }
}

/// `n/(rT) Σ_{t_j ≤ t} Δt_j Σ_{q=0}^{r∧j} Δt_{j−q}` with `Δt_0 = 0`.
pub fn lasa(times: &[f64], horizon: f64, r: usize, t: f64) -> f64 {
    let n = times.len() - 1;
    let dt = |j: isize| -> f64 {
        if j < 1 {
            0.0
        } else {
            times[j as usize] - times[j as usize - 1]
        }
    };
    let mut acc = 0.0;
    for j in 1..=n {
        if times[j] <= t {
            for q in 0..=r.min(j) {
                acc += dt(j as isize) * dt(j as isize - q as isize);
            }
        }
    }
    n as f64 / (r as f64 * horizon) * acc
}

/// `N/(MT) Σ_{S_r ≤ t} ΔS_r Σ_{i,k} α_i α_k Σ_{q=0}^{r∧i∧k} (1 − q/i)(1 − q/k) ΔS_{r−q}` with `ΔS_0 = 0`.
pub fn weighted_lasa(times: &[f64], horizon: f64, alphas: &[f64], t: f64) -> f64 {
    let n = times.len() - 1;
    let m = alphas.len();
    let ds = |j: isize| -> f64 {
        if j < 1 {
            0.0
        } else {
            times[j as usize] - times[j as usize - 1]
        }
    };
    let mut acc = 0.0;
    for r in 1..=n {
        if times[r] > t {
            continue;
        }
        for i in 1..=m {
            for k in 1..=m {
                for q in 0..=r.min(i).min(k) {
                    acc += ds(r as isize)
                        * alphas[i - 1]
                        * alphas[k - 1]
                        * (1.0 - q as f64 / i as f64)
                        * (1.0 - q as f64 / k as f64)
                        * ds(r as isize - q as isize);
                }
            }
        }
    }
    n as f64 / (m as f64 * horizon) * acc
}

/// `(1/N) · #{(j, k) : t_j^{(a)} = t_k^{(b)} ≤ t}`.
pub fn equal_times(a: &[f64], b: &[f64], n: usize, t: f64) -> f64 {
    let mut c = 0usize;
    for &x in a {
        for &y in b {
            if x <= t && y <= t && x == y {
                c += 1;
            }
        }
    }
    c as f64 / n as f64
}

/// Finite-N synchronicity sums `(𝔖_13^24, 𝔖_14^23, 𝔖̃_13^24, 𝔖̃_14^23)`, each averaged over its two indicator sums.
pub fn frak_sums(sc: [&[f64]; 4], m12: usize, m34: usize) -> (f64, f64, f64, f64) {
    let (s, tau, tt) = global_refresh(sc);
    let n = s.len() - 1;
    let (n12, n34) = (tau.len() - 1, tt.len() - 1);
    let mn = m12.min(m34) as f64;
    let [s1, s2, s3, s4] = sc;
    let frak =
        |a: &[f64], b: &[f64], c: &[f64], d: &[f64], e: &[f64], f: &[f64], g: &[f64], h: &[f64]| {
            let mut count = 0usize;
            for j in 0..=n12 {
                for k in 0..=n34 {
                    for r in 1..=j.min(m12) {
                        for q in 1..=k.min(m34) {
                            if t_plus(a, tau[j]) == t_plus(b, tt[k])
                                && t_minus(c, tau[j - r]) == t_minus(d, tt[k - q])
                            {
                                count += 1;
                            }
                            if t_plus(e, tau[j]) == t_plus(f, tt[k])
                                && t_minus(g, tau[j - r]) == t_minus(h, tt[k - q])
                            {
                                count += 1;
                            }
                        }
                    }
                }
            }
            0.5 * count as f64 / (n as f64 * mn)
        };
    let tilde = |a: &[f64], b: &[f64], c: &[f64], d: &[f64]| {
        let mut count = 0usize;
        for j in 0..m12.min(n12 + 1) {
            for k in 0..m34.min(n34 + 1) {
                if t_plus(a, tau[j]) == t_plus(b, tt[k]) && t_plus(c, tau[j]) == t_plus(d, tt[k]) {
                    count += 1;
                }
                let (jj, kk) = (n12 - j, n34 - k);
                if t_minus(a, tau[jj]) == t_minus(b, tt[kk])
                    && t_minus(c, tau[jj]) == t_minus(d, tt[kk])
                {
                    count += 1;
                }
            }
        }
        0.5 * count as f64 / mn
    };
    (
        frak(s1, s3, s2, s4, s2, s4, s1, s3),
        frak(s1, s4, s2, s3, s2, s3, s1, s4),
        tilde(s1, s3, s2, s4),
        tilde(s1, s4, s2, s3),
    )
}

/// Exact `Cov(HY_12, HY_34)` for Brownian motion with constant covariance `Σ`:
/// `Σ13 Σ24 Σ |I_i ∩ K_k| |J_j ∩ L_l| + Σ14 Σ23 Σ |I_i ∩ L_l| |J_j ∩ K_k|`
/// over overlapping pairs `(I_i, J_j)` and `(K_k, L_l)`.
pub fn exact_hy_cov(sc: [&[f64]; 4], sigma: &nalgebra::DMatrix<f64>) -> f64 {
    let iv = |t: &[f64]| -> Vec<(f64, f64)> { t.windows(2).map(|w| (w[0], w[1])).collect() };
    let ov = |a: (f64, f64), b: (f64, f64)| pos(a.1.min(b.1) - a.0.max(b.0));
    let pairs = |x: &[(f64, f64)], y: &[(f64, f64)]| {
        let mut out = Vec::new();
        for &u in x {
            for &v in y {
                if ov(u, v) > 0.0 {
                    out.push((u, v));
                }
            }
        }
        out
    };
    let p12 = pairs(&iv(sc[0]), &iv(sc[1]));
    let p34 = pairs(&iv(sc[2]), &iv(sc[3]));
    let (mut c1, mut c2) = (0.0, 0.0);
    for &(i, j) in &p12 {
        for &(k, l) in &p34 {
            c1 += ov(i, k) * ov(j, l);
            c2 += ov(i, l) * ov(j, k);
        }
    }
    sigma[(0, 2)] * sigma[(1, 3)] * c1 + sigma[(0, 3)] * sigma[(1, 2)] * c2
}
