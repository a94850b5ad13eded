mod common;

use covest::avar::{svec_len, svec_pairs};
use covest::cli::{load_ticks, write_ticks};
use covest::kernels::weights_for;
use covest::sampling::{global_refresh_of, refresh_sequence};
use covest::{
    builtin_kernel, cubic_weights, estimate_matrix, generalized_multiscale, hayashi_yoshida,
    isserlis_cov, lasa, multiscale, pairwise_refresh, realized_cov, svec_index, svec_pack,
    svec_unpack, tick_interpolation, time_covariations, EstimateConfig, Method, SamplingScheme,
    TickSeries,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

const HORIZON: f64 = 1.0;

/// Strictly increasing times in `[0, 1]` that start at 0.
fn times_strategy(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..HORIZON, 1..max_len).prop_map(|mut t| {
        t.push(0.0);
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    })
}

fn series_strategy(max_len: usize) -> impl Strategy<Value = TickSeries> {
    times_strategy(max_len).prop_flat_map(|t| {
        let n = t.len();
        (Just(t), prop::collection::vec(-1.0..1.0f64, n))
            .prop_map(|(t, y)| TickSeries::from_parts(t, y, HORIZON).unwrap())
    })
}

/// Two series observed at the same times.
fn sync_pair(max_len: usize) -> impl Strategy<Value = (TickSeries, TickSeries)> {
    times_strategy(max_len).prop_flat_map(|t| {
        let n = t.len();
        (
            Just(t),
            prop::collection::vec(-1.0..1.0f64, n),
            prop::collection::vec(-1.0..1.0f64, n),
        )
            .prop_map(|(t, a, b)| {
                (
                    TickSeries::from_parts(t.clone(), a, HORIZON).unwrap(),
                    TickSeries::from_parts(t, b, HORIZON).unwrap(),
                )
            })
    })
}

fn psd_strategy(p: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, p * p).prop_map(move |v| {
        let a = DMatrix::from_vec(p, p, v);
        &a * a.transpose()
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn scaled(s: &TickSeries, lambda: f64, shift: f64) -> TickSeries {
    let v = s.values().iter().map(|y| lambda * y + shift).collect();
    TickSeries::from_parts(s.times().to_vec(), v, HORIZON).unwrap()
}

proptest! {
    #[test]
    fn interpolation_brackets_the_query(t in times_strategy(40), u in 0.0..1.0f64) {
        let s = SamplingScheme::new(t.clone(), HORIZON).unwrap();
        let q = t[0] + u * (t[t.len() - 1] - t[0]);
        let (lo, hi) = tick_interpolation(&s, q).unwrap();
        prop_assert!(lo <= q && q <= hi);
        prop_assert!(t.contains(&lo) && t.contains(&hi));
        prop_assert!(t.iter().all(|&x| x <= lo || x >= hi));
    }

    #[test]
    fn refresh_times_are_increasing_and_respect_every_scheme(
        a in times_strategy(30), b in times_strategy(30), c in times_strategy(30)
    ) {
        let s: Vec<SamplingScheme> = [a, b, c].into_iter().map(|t| SamplingScheme::new(t, HORIZON).unwrap()).collect();
        let refs: Vec<&SamplingScheme> = s.iter().collect();
        let tau = refresh_sequence(&refs);
        prop_assert!(tau.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(tau.len() <= s.iter().map(|x| x.len()).min().unwrap());
        let oracle = common::refresh(&[s[0].times(), s[1].times(), s[2].times()]);
        prop_assert_eq!(&tau, &oracle);
        for w in tau.windows(2) {
            for sc in &s {
                prop_assert!(sc.times().iter().any(|&x| w[0] < x && x <= w[1]));
            }
        }
    }

    #[test]
    fn pairwise_refresh_is_symmetric(a in times_strategy(30), b in times_strategy(30)) {
        let (sa, sb) = (SamplingScheme::new(a, HORIZON).unwrap(), SamplingScheme::new(b, HORIZON).unwrap());
        let ab = pairwise_refresh(&sa, &sb).unwrap();
        let ba = pairwise_refresh(&sb, &sa).unwrap();
        prop_assert_eq!(ab.times(), ba.times());
        for i in 0..ab.count() {
            prop_assert!(sa.time(ab.prev_index(0, i)) <= ab.times()[i]);
            prop_assert!(sb.time(ab.next_index(1, i)) >= ab.times()[i]);
        }
    }

    #[test]
    fn multiscale_weights_satisfy_their_constraints(m in 2usize..400, kind in 0usize..4) {
        let name = ["cubic", "parzen", "th1", "th2"][kind];
        let w = if kind == 0 { cubic_weights(m).unwrap() } else {
            weights_for(&builtin_kernel(name).unwrap(), m).unwrap()
        };
        prop_assert_eq!(w.m(), m);
        prop_assert!((w.sum() - 1.0).abs() < 1e-12);
        prop_assert!(w.sum_over_index().abs() < 1e-12);
    }

    #[test]
    fn synchronous_estimators_are_symmetric_and_bilinear(
        (a, b) in sync_pair(40), lambda in -3.0..3.0f64, shift in -5.0..5.0f64, m in 2usize..5
    ) {
        let rc = realized_cov(&a, &b).unwrap();
        prop_assert!(close(rc, realized_cov(&b, &a).unwrap(), 1e-12));
        prop_assert!(realized_cov(&a, &a).unwrap() >= 0.0);
        let a2 = scaled(&a, lambda, shift);
        prop_assert!(close(realized_cov(&a2, &b).unwrap(), lambda * rc, 1e-10));
        prop_assert!(close(hayashi_yoshida(&a, &b).unwrap(), rc, 1e-10));
        if a.intervals() > m {
            let w = cubic_weights(m).unwrap();
            let ms = multiscale(&a, &b, &w).unwrap();
            prop_assert!(close(ms, multiscale(&b, &a, &w).unwrap(), 1e-10));
            prop_assert!(close(multiscale(&a2, &b, &w).unwrap(), lambda * ms, 1e-10));
            prop_assert!(close(generalized_multiscale(&a, &b, &w).unwrap(), ms, 1e-10));
        }
    }

    #[test]
    fn asynchronous_estimators_are_symmetric_and_scale(
        a in series_strategy(30), b in series_strategy(30), lambda in -3.0..3.0f64, shift in -5.0..5.0f64
    ) {
        let hy = hayashi_yoshida(&a, &b).unwrap();
        prop_assert!(close(hy, hayashi_yoshida(&b, &a).unwrap(), 1e-12));
        prop_assert!(close(hayashi_yoshida(&scaled(&a, lambda, shift), &b).unwrap(), lambda * hy, 1e-10));
        let oracle = common::hayashi_yoshida(a.times(), a.values(), b.times(), b.values());
        prop_assert!(close(hy, oracle, 1e-12));
        let w = cubic_weights(2).unwrap();
        if let Ok(g) = generalized_multiscale(&a, &b, &w) {
            prop_assert!(close(g, generalized_multiscale(&b, &a, &w).unwrap(), 1e-10));
            prop_assert!(close(generalized_multiscale(&scaled(&a, lambda, shift), &b, &w).unwrap(), lambda * g, 1e-10));
        }
    }

    #[test]
    fn hy_matrix_is_equivariant_under_asset_permutation(
        s in prop::collection::vec(series_strategy(20), 3), perm in Just([2usize, 0, 1])
    ) {
        let cfg = EstimateConfig::default();
        let e = estimate_matrix(&s, Method::Hy, &cfg).unwrap();
        let permuted: Vec<TickSeries> = perm.iter().map(|&i| s[i].clone()).collect();
        let f = estimate_matrix(&permuted, Method::Hy, &cfg).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!(close(f.matrix[(i, j)], e.matrix[(perm[i], perm[j])], 1e-12));
                prop_assert_eq!(e.matrix[(i, j)], e.matrix[(j, i)]);
            }
        }
        prop_assert_eq!(e.svec.len(), 6);
    }

    #[test]
    fn svec_round_trips(p in 1usize..8, v in prop::collection::vec(-10.0..10.0f64, 36)) {
        let v = &v[..svec_len(p)];
        let m = svec_unpack(v, p).unwrap();
        prop_assert_eq!(&m, &m.transpose());
        prop_assert_eq!(svec_pack(&m), v.to_vec());
        for (idx, (k, l)) in svec_pairs(p).into_iter().enumerate() {
            prop_assert_eq!(svec_index(p, k, l).unwrap(), idx);
            prop_assert_eq!(k == l, svec_index(p, l, k).is_ok());
        }
    }

    #[test]
    fn isserlis_symmetries(sigma in psd_strategy(4), idx in prop::array::uniform4(0usize..4)) {
        let [k, l, r, q] = idx;
        let c = isserlis_cov(&sigma, (k, l, r, q)).unwrap();
        for other in [(l, k, r, q), (k, l, q, r), (r, q, k, l)] {
            prop_assert!(close(c, isserlis_cov(&sigma, other).unwrap(), 1e-12));
        }
        prop_assert!(isserlis_cov(&sigma, (k, l, k, l)).unwrap() >= -1e-12);
    }

    #[test]
    fn time_covariations_are_nondecreasing(
        sc in prop::array::uniform4(times_strategy(15))
    ) {
        let s: Vec<SamplingScheme> = sc.iter().map(|t| SamplingScheme::new(t.clone(), HORIZON).unwrap()).collect();
        let global = global_refresh_of([&s[0], &s[1], &s[2], &s[3]]).unwrap();
        if global.count() >= 3 {
            let tc = time_covariations(&global).unwrap();
            for f in [&tc.g, &tc.f_24_13, &tc.f_23_14, &tc.h_24_13, &tc.h_23_14, &tc.i_24_13, &tc.i_23_14] {
                prop_assert!(f.is_nondecreasing());
                prop_assert!(f.eval(0.0) >= 0.0);
            }
        }
    }

    #[test]
    fn lasa_is_nonnegative_and_nondecreasing(t in times_strategy(40), r in 1usize..4, u in 0.0..1.0f64, v in 0.0..1.0f64) {
        let s = SamplingScheme::new(t, HORIZON).unwrap();
        if s.intervals() > r {
            let (lo, hi) = (u.min(v), u.max(v));
            let a = lasa(&s, r, lo).unwrap();
            let b = lasa(&s, r, hi).unwrap();
            prop_assert!(a >= 0.0 && a <= b + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn tick_files_round_trip(s in prop::collection::vec(series_strategy(20), 1..4)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ticks.csv");
        let assets: Vec<String> = (0..s.len()).map(|k| format!("asset{k}")).collect();
        write_ticks(&path, &assets, &s).unwrap();
        let loaded = load_ticks(&path).unwrap();
        prop_assert_eq!(loaded.assets, assets);
        let t_max = s.iter().map(|x| *x.times().last().unwrap()).fold(0.0, f64::max);
        for (a, b) in loaded.series.iter().zip(&s) {
            prop_assert_eq!(a.times(), b.times());
            prop_assert_eq!(a.values(), b.values());
            prop_assert_eq!(a.scheme().horizon(), t_max);
        }
    }
}
