mod common;

use common::rng;
use covest::mc::{mc_validate, replicate_rng, Scenario, ScenarioSpec};
use covest::sampling::global_refresh_of;
use covest::sim::{psd_sqrt, simulate_dataset, simulate_dataset_on, NoiseLaw, SpotPath, VolSpec};
use covest::{
    hayashi_yoshida, observe, realized_cov, sample_scheme, simulate_paths, sync_overlap,
    CovestError, ItoModelConfig, NoiseConfig, SamplingKind, SamplingScheme, TickSeries,
};
use nalgebra::DMatrix;

fn latent_series(paths: &covest::LatentPaths, l: usize) -> TickSeries {
    TickSeries::from_parts(paths.times.clone(), paths.values[l].clone(), paths.horizon).unwrap()
}

fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[test]
fn psd_square_roots() {
    let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.0, 0.3, 0.1, 0.3, 0.8]);
    let r = psd_sqrt(&a).unwrap();
    assert!((&r * r.transpose() - &a).amax() < 1e-12);
    let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
    let r = psd_sqrt(&singular).unwrap();
    assert!((&r * r.transpose() - &singular).amax() < 1e-12);
    let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    assert!(matches!(psd_sqrt(&indefinite), Err(CovestError::NotPsd(_))));
    let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.1, 1.0]);
    assert!(matches!(psd_sqrt(&asym), Err(CovestError::NotPsd(_))));
}

#[test]
fn model_validation() {
    let bad = ItoModelConfig::constant(
        DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
        1.0,
        10,
    );
    assert!(simulate_paths(&bad, &mut rng(1)).is_err());
    let zero_h = ItoModelConfig::constant(DMatrix::identity(2, 2), 0.0, 10);
    assert!(zero_h.validate().is_err());
    let mut sv = ItoModelConfig::default_sv(3, 1.0, 100);
    assert!(sv.validate().is_ok());
    if let VolSpec::Stochastic(ref mut s) = sv.vol {
        s.rho[1] = 1.5;
    }
    assert!(sv.validate().is_err());
}

#[test]
fn sampling_schemes() {
    let mut r = rng(2);
    let eq = sample_scheme(&SamplingKind::Equidistant { n: 4 }, 2, 1.0, &mut r).unwrap();
    assert_eq!(eq[0].times(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    assert_eq!(eq[0], eq[1]);

    let kind = SamplingKind::Poisson {
        rates: vec![1000.0],
        augment: false,
    };
    let inside = (0..200)
        .filter(|&seed| {
            let s = sample_scheme(&kind, 1, 1.0, &mut rng(seed)).unwrap();
            (900..=1100).contains(&s[0].len())
        })
        .count();
    assert!(inside >= 190, "{inside}");

    let aug = SamplingKind::Poisson {
        rates: vec![50.0, 50.0],
        augment: true,
    };
    for s in sample_scheme(&aug, 2, 2.0, &mut r).unwrap() {
        assert_eq!(s.times()[0], 0.0);
        assert_eq!(*s.times().last().unwrap(), 2.0);
    }
    let low = SamplingKind::Poisson {
        rates: vec![5.0],
        augment: true,
    };
    assert!(sample_scheme(&low, 1, 1.0, &mut r).is_err());
    assert!(sample_scheme(&aug, 3, 1.0, &mut r).is_err());
    let explicit = SamplingKind::Explicit {
        times: vec![vec![0.0, 0.4, 1.0], vec![0.1]],
    };
    assert!(matches!(
        sample_scheme(&explicit, 2, 1.0, &mut r),
        Err(CovestError::TooFew { .. })
    ));
}

#[test]
fn independent_poisson_schemes_share_no_interior_times() {
    let kind = SamplingKind::Poisson {
        rates: vec![500.0; 4],
        augment: false,
    };
    let s = sample_scheme(&kind, 4, 1.0, &mut rng(3)).unwrap();
    let global = global_refresh_of([&s[0], &s[1], &s[2], &s[3]]).unwrap();
    let ov = sync_overlap(&global, 20, 20, 0.0).unwrap();
    assert!(ov.is_disjoint());
    assert_eq!(ov.frak_13_24, 0.0);
    assert_eq!(ov.tilde_14_23, 0.0);
}

#[test]
fn brownian_quadratic_variation_concentrates() {
    let model = ItoModelConfig::constant(DMatrix::identity(2, 2), 2.0, 20_000);
    let paths = simulate_paths(&model, &mut rng(4)).unwrap();
    assert_eq!(paths.integrated, DMatrix::identity(2, 2) * 2.0);
    for l in 0..2 {
        let s = latent_series(&paths, l);
        let qv = realized_cov(&s, &s).unwrap();
        // sd of the realized variance is T·√(2/n) = 0.02
        assert!((qv - 2.0).abs() < 0.08, "{qv}");
    }
}

#[test]
fn realized_covariance_is_unbiased_on_the_fine_grid() {
    let (s1, s2, rho) = (1.2, 0.7, 0.6);
    let sigma = DMatrix::from_row_slice(2, 2, &[s1 * s1, rho * s1 * s2, rho * s1 * s2, s2 * s2]);
    let model = ItoModelConfig::constant(sigma, 1.0, 500);
    let mut r = rng(5);
    let rc: Vec<f64> = (0..400)
        .map(|_| {
            let p = simulate_paths(&model, &mut r).unwrap();
            realized_cov(&latent_series(&p, 0), &latent_series(&p, 1)).unwrap()
        })
        .collect();
    let (m, se) = mean_se(&rc);
    assert!((m - rho * s1 * s2).abs() < 3.0 * se, "{m} ± {se}");
}

#[test]
fn stochastic_volatility_paths() {
    let model = ItoModelConfig::default_sv(3, 1.0, 2000);
    let a = simulate_paths(&model, &mut rng(6)).unwrap();
    let b = simulate_paths(&model, &mut rng(7)).unwrap();
    assert_ne!(a.integrated, b.integrated);
    for p in [&a, &b] {
        assert!(p.integrated.clone().symmetric_eigenvalues().min() > 0.0);
        let SpotPath::Cells { vols, .. } = &p.spot else {
            panic!("expected a spot path per cell");
        };
        assert_eq!(vols.len(), p.times.len() - 1);
        assert!(vols.iter().flatten().all(|v| *v >= 0.0));
        let rebuilt: DMatrix<f64> = (0..vols.len())
            .map(|k| p.spot_at(k) * (p.times[k + 1] - p.times[k]))
            .fold(DMatrix::zeros(3, 3), |acc, m| acc + m);
        assert!((rebuilt - &p.integrated).amax() < 1e-10);
        let theory = p.theory_inputs();
        assert_eq!(theory.sigma.len(), vols.len());
    }
}

#[test]
fn increments_scale_linearly_in_time() {
    let model = ItoModelConfig::default_sv(1, 1.0, 16_384);
    let mut log_dt = Vec::new();
    let mut log_ms = Vec::new();
    let mut r = rng(8);
    let paths: Vec<_> = (0..20)
        .map(|_| simulate_paths(&model, &mut r).unwrap())
        .collect();
    for step in [1usize, 4, 16, 64, 256] {
        let mut acc = 0.0;
        let mut cnt = 0.0;
        for p in &paths {
            let v = &p.values[0];
            let mut j = step;
            while j < v.len() {
                acc += (v[j] - v[j - step]).powi(2);
                cnt += 1.0;
                j += step;
            }
        }
        log_dt.push((step as f64 / 16_384.0).ln());
        log_ms.push((acc / cnt).ln());
    }
    let slope = covest::mc::ols_slope(&log_dt, &log_ms);
    assert!((slope - 1.0).abs() < 0.1, "{slope}");
}

#[test]
fn observation_without_noise_is_exact() {
    let model = ItoModelConfig::constant(DMatrix::identity(2, 2), 1.0, 100);
    let mut r = rng(9);
    let s = sample_scheme(
        &SamplingKind::Poisson {
            rates: vec![80.0, 60.0],
            augment: true,
        },
        2,
        1.0,
        &mut r,
    )
    .unwrap();
    let (data, paths) = simulate_dataset_on(&model, &s, &NoiseConfig::none(2), &mut r).unwrap();
    for (series, latent) in data.iter().zip(&paths.values) {
        for (t, y) in series.times().iter().zip(series.values()) {
            let k = paths.times.iter().position(|x| x == t).unwrap();
            assert_eq!(*y, latent[k]);
        }
    }
}

#[test]
fn noise_moments_match_the_configuration() {
    let p = 2;
    let h = DMatrix::from_row_slice(2, 2, &[4e-4, 1e-4, 1e-4, 2e-4]);
    let zero = ItoModelConfig::constant(DMatrix::identity(p, p) * 0.0, 1.0, 10);
    let n = 20_000;
    let schemes = vec![SamplingScheme::equidistant(n, 1.0).unwrap(); 2];
    for law in [NoiseLaw::Gaussian, NoiseLaw::TwoPoint] {
        let noise = NoiseConfig { h: h.clone(), law };
        let mut r = rng(10);
        let (data, _) = simulate_dataset_on(&zero, &schemes, &noise, &mut r).unwrap();
        let (e1, e2) = (data[0].values(), data[1].values());
        let m = (n + 1) as f64;
        let mean1 = e1.iter().sum::<f64>() / m;
        assert!(
            mean1.abs() < 3.0 * (h[(0, 0)] / m).sqrt(),
            "{law:?} mean {mean1}"
        );
        let prods: Vec<f64> = e1.iter().zip(e2).map(|(a, b)| a * b).collect();
        let (c12, se12) = mean_se(&prods);
        assert!(
            (c12 - h[(0, 1)]).abs() < 3.0 * se12,
            "{law:?} {c12} vs {}",
            h[(0, 1)]
        );
        let sq: Vec<f64> = e2.iter().map(|a| a * a).collect();
        let (v2, se2) = mean_se(&sq);
        assert!(
            (v2 - h[(1, 1)]).abs() < 3.0 * se2.max(1e-12),
            "{law:?} {v2}"
        );
    }
    // Two-point draws take only the values ±η for a single component.
    let single = NoiseConfig {
        h: DMatrix::from_element(1, 1, 0.25),
        law: NoiseLaw::TwoPoint,
    };
    let one = ItoModelConfig::constant(DMatrix::from_element(1, 1, 0.0), 1.0, 10);
    let (d, _) = simulate_dataset_on(&one, &schemes[..1], &single, &mut rng(11)).unwrap();
    assert!(d[0].values().iter().all(|v| (v.abs() - 0.5).abs() < 1e-15));
}

#[test]
fn noise_is_independent_across_asynchronous_components() {
    let zero = ItoModelConfig::constant(DMatrix::zeros(2, 2), 1.0, 10);
    let n = 20_000;
    let a: Vec<f64> = (0..=n).map(|i| i as f64 / (n + 1) as f64).collect();
    let b: Vec<f64> = a.iter().map(|t| t + 0.5 / (n + 1) as f64).collect();
    let schemes = vec![
        SamplingScheme::new(a, 1.0).unwrap(),
        SamplingScheme::new(b, 1.0).unwrap(),
    ];
    let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.9, 1.0]);
    let noise = NoiseConfig {
        h,
        law: NoiseLaw::Gaussian,
    };
    let (data, _) = simulate_dataset_on(&zero, &schemes, &noise, &mut rng(12)).unwrap();
    let prods: Vec<f64> = data[0]
        .values()
        .iter()
        .zip(data[1].values())
        .map(|(x, y)| x * y)
        .collect();
    let (c, se) = mean_se(&prods);
    assert!(c.abs() < 3.0 * se, "{c} ± {se}");
}

#[test]
fn simulation_is_reproducible() {
    let model = ItoModelConfig::default_sv(2, 1.0, 500);
    let kind = SamplingKind::Poisson {
        rates: vec![100.0, 120.0],
        augment: true,
    };
    let noise = NoiseConfig::independent(&[1e-3, 2e-3]);
    let (a, pa) = simulate_dataset(&model, &kind, &noise, &mut rng(13)).unwrap();
    let (b, pb) = simulate_dataset(&model, &kind, &noise, &mut rng(13)).unwrap();
    assert_eq!(a, b);
    assert_eq!(pa, pb);
    let (c, _) = simulate_dataset(&model, &kind, &noise, &mut rng(14)).unwrap();
    assert_ne!(a, c);
    let mut r1 = replicate_rng(5, 3);
    let mut r2 = replicate_rng(5, 3);
    let s1 = sample_scheme(&kind, 2, 1.0, &mut r1).unwrap();
    assert_eq!(s1, sample_scheme(&kind, 2, 1.0, &mut r2).unwrap());
}

#[test]
fn hayashi_yoshida_covariance_matches_the_exact_overlap_formula() {
    let sigma = DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, 0.5, 0.4, 0.3, 0.5, 1.0, 0.2, 0.6, 0.4, 0.2, 1.0, 0.5, 0.3, 0.6, 0.5, 1.0,
        ],
    );
    let model = ItoModelConfig::constant(sigma.clone(), 1.0, 10);
    let kind = SamplingKind::Poisson {
        rates: vec![60.0; 4],
        augment: true,
    };
    let schemes = sample_scheme(&kind, 4, 1.0, &mut rng(15)).unwrap();
    let noise = NoiseConfig::none(4);
    let mut r = rng(16);
    let reps = 4000;
    let mut a = Vec::with_capacity(reps);
    let mut b = Vec::with_capacity(reps);
    for _ in 0..reps {
        let (d, _) = simulate_dataset_on(&model, &schemes, &noise, &mut r).unwrap();
        a.push(hayashi_yoshida(&d[0], &d[1]).unwrap());
        b.push(hayashi_yoshida(&d[2], &d[3]).unwrap());
    }
    let (ma, _) = mean_se(&a);
    let (mb, _) = mean_se(&b);
    let prods: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let (cov, se) = mean_se(&prods);
    let t: Vec<&[f64]> = schemes.iter().map(|s| s.times()).collect();
    let exact = common::exact_hy_cov([t[0], t[1], t[2], t[3]], &sigma);
    assert!((cov - exact).abs() < 3.0 * se, "{cov} vs {exact} (se {se})");
    // HY is unbiased for the integrated covariance.
    let (m12, se12) = mean_se(&a);
    assert!((m12 - 0.5).abs() < 3.0 * se12);
}

#[test]
fn mc_validate_reports_are_reproducible() {
    let spec = ScenarioSpec::new(Scenario::HyCov).with_n(200);
    let a = mc_validate(&spec, 100, 3).unwrap();
    let b = mc_validate(&spec, 100, 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.scenario, "hy_cov");
    assert_eq!(a.replicates, 100);
    assert_eq!(a.checks.len(), 1);
    assert!(a.checks[0].empirical.is_finite() && a.checks[0].theory > 0.0);
    assert!(matches!(
        mc_validate(&spec, 50, 3),
        Err(CovestError::TooFew { .. })
    ));
    for name in [
        "rc_clt", "hy_cov", "gms_cov", "ms_equiv", "ci_size", "ci_power", "hy_rate", "gms_rate",
    ] {
        assert_eq!(Scenario::parse(name).unwrap().as_str(), name);
    }
    assert!(Scenario::parse("nope").is_err());
}

#[test]
fn observe_rejects_mismatched_inputs() {
    let model = ItoModelConfig::constant(DMatrix::identity(2, 2), 1.0, 10);
    let paths = simulate_paths(&model, &mut rng(17)).unwrap();
    let s = SamplingScheme::equidistant(5, 1.0).unwrap();
    assert!(observe(
        &paths,
        std::slice::from_ref(&s),
        &NoiseConfig::none(1),
        &mut rng(1)
    )
    .is_err());
    let noise = NoiseConfig::independent(&[0.1, 0.1, 0.1]);
    assert!(observe(&paths, &[s.clone(), s], &noise, &mut rng(1)).is_err());
}
