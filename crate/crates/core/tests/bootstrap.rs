use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use seisfrag::bootstrap::*;
use seisfrag::error::Error;
use seisfrag::intensity::{DemandPoint, ImKind};
use seisfrag::nonparametric::{default_grid, BinSpec, FragilityCurve, Method};
use seisfrag::numeric::logspace;
use seisfrag::parametric::LognormalCurve;
use seisfrag::rng::RandomStream;
use seisfrag::special::norm_cdf;

fn lognormal_records(seed: u64, n: usize, a: f64, b: f64, zeta: f64) -> Vec<DemandPoint> {
    let mut rng = RandomStream::new(seed, 3).rng();
    (0..n)
        .map(|_| {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            let u = (0.4f64).ln() + 0.6 * z1;
            DemandPoint {
                im: u.exp(),
                delta: (a * u + b + zeta * z2).exp(),
            }
        })
        .collect()
}

/// Binary outcomes from a lognormal fragility with median 0.5 and β = 0.4.
fn bernoulli_records(seed: u64, n: usize) -> Vec<DemandPoint> {
    let mut rng = RandomStream::new(seed, 4).rng();
    (0..n)
        .map(|_| {
            let im = (rng.random::<f64>() * (40.0f64).ln()).exp() * 0.05;
            let fail = rng.random::<f64>() < norm_cdf((im / 0.5).ln() / 0.4);
            DemandPoint {
                im,
                delta: if fail { 1.0 } else { 0.1 },
            }
        })
        .collect()
}

fn curve(grid: &[f64], probs: Vec<Option<f64>>) -> FragilityCurve {
    FragilityCurve {
        im_grid: grid.to_vec(),
        probabilities: probs,
        method: Method::Bmcs,
        im_kind: ImKind::Pga,
        threshold: 0.01,
        support: None,
    }
}

#[test]
fn resample_basics() {
    let one = [DemandPoint {
        im: 0.3,
        delta: 0.01,
    }];
    assert_eq!(
        resample(&one, RandomStream::new(1, 0)).unwrap(),
        one.to_vec()
    );
    assert!(resample(&[], RandomStream::new(1, 0)).is_err());

    let pts: Vec<DemandPoint> = (0..50)
        .map(|i| DemandPoint {
            im: 1.0 + i as f64,
            delta: 0.0,
        })
        .collect();
    let a = resample(&pts, RandomStream::new(8, 3)).unwrap();
    assert_eq!(a, resample(&pts, RandomStream::new(8, 3)).unwrap());
    assert_eq!(a.len(), 50);
    // multiplicity of record 0 is Binomial(N, 1/N), mean 1
    let total: usize = (0..10_000)
        .map(|r| {
            resample(&pts, RandomStream::new(8, r))
                .unwrap()
                .iter()
                .filter(|p| p.im == 1.0)
                .count()
        })
        .sum();
    let mean = total as f64 / 10_000.0;
    assert!((mean - 1.0).abs() < 0.05, "{mean}");
}

#[test]
fn percentile_convention() {
    assert_eq!(percentile(&[0.2, 0.7], 0.5), 0.2);
    let xs: Vec<f64> = (1..=100).map(f64::from).collect();
    assert_eq!(percentile(&xs, 0.025), 3.0);
    assert_eq!(percentile(&xs, 0.975), 98.0);
    assert_eq!(percentile(&xs, 0.5), 50.0);
    assert_eq!(percentile(&[5.0], 0.01), 5.0);
}

#[test]
fn constant_curve_gives_zero_width_band() {
    // every drift far above the threshold: each replicate is identically 1
    let pts: Vec<DemandPoint> = (0..200)
        .map(|i| DemandPoint {
            im: 0.5 + 0.001 * i as f64,
            delta: 10.0,
        })
        .collect();
    let grid = [0.55, 0.6];
    let e = bootstrap_curves(
        &pts,
        Estimator::Bmcs(BinSpec::default()),
        0.01,
        &grid,
        ImKind::Pga,
        20,
        0.95,
        RandomStream::new(2, 0),
    )
    .unwrap();
    for k in 0..2 {
        assert_eq!(e.median[k], Some(1.0));
        assert_eq!(e.lower[k], e.upper[k]);
        assert_eq!(e.valid_counts[k], 20);
    }
}

#[test]
fn mle_band_covers_original_curve() {
    let grid = logspace(0.15, 1.5, 30);
    let (mut inside, mut total) = (0, 0);
    for rep in 0..20 {
        let pts = bernoulli_records(100 + rep, 500);
        let orig = Estimator::Mle
            .evaluate(&pts, 0.5, &grid, ImKind::Pga)
            .unwrap();
        let e = bootstrap_curves(
            &pts,
            Estimator::Mle,
            0.5,
            &grid,
            ImKind::Pga,
            100,
            0.95,
            RandomStream::new(rep, 0),
        )
        .unwrap();
        for k in 0..grid.len() {
            let p = orig.probabilities[k].unwrap();
            total += 1;
            if e.lower[k].unwrap() <= p && p <= e.upper[k].unwrap() {
                inside += 1;
            }
        }
    }
    assert!(inside as f64 >= 0.9 * total as f64, "{inside} of {total}");
}

#[test]
fn replicate_failures_are_recorded_or_fatal() {
    let mut pts: Vec<DemandPoint> = (0..30)
        .map(|i| DemandPoint {
            im: 0.1 + 0.01 * i as f64,
            delta: 0.1,
        })
        .collect();
    let grid = [0.2, 0.3];
    // one failure in thirty: about a third of resamples contain none
    pts[29].delta = 1.0;
    let err = bootstrap_curves(
        &pts,
        Estimator::Mle,
        0.5,
        &grid,
        ImKind::Pga,
        100,
        0.95,
        RandomStream::new(1, 0),
    );
    assert!(matches!(err, Err(Error::Ensemble(_))));
    // three failures: a few percent of resamples degenerate
    pts[27].delta = 1.0;
    pts[28].delta = 1.0;
    let e = bootstrap_curves(
        &pts,
        Estimator::Mle,
        0.5,
        &grid,
        ImKind::Pga,
        100,
        0.95,
        RandomStream::new(1, 0),
    )
    .unwrap();
    assert_eq!(e.curves.len(), 100);
    assert!(e.failures() > 0 && e.failures() <= 20);
    assert_eq!(e.valid_counts[0], 100 - e.failures());
    assert!(bootstrap_curves(
        &pts,
        Estimator::Mle,
        0.5,
        &grid,
        ImKind::Pga,
        1,
        0.95,
        RandomStream::new(1, 0)
    )
    .is_err());
}

#[test]
fn median_im_of_exact_lognormal() {
    let c = LognormalCurve::new(0.42, 0.5, ImKind::Sa, 0.01).unwrap();
    let grid = logspace(0.05, 3.0, 60);
    let fc = FragilityCurve::from_fn(&grid, Method::Mle, ImKind::Sa, 0.01, |x| c.eval(x));
    let m = median_im(&fc).unwrap();
    assert!((m / 0.42 - 1.0).abs() < 0.005, "{m}");
    let low = curve(&grid[..3], vec![Some(0.1), Some(0.2), Some(0.49)]);
    assert_eq!(median_im(&low), None);
}

#[test]
fn median_im_takes_first_crossing() {
    let grid = logspace(0.1, 2.0, 8);
    let probs = [0.1, 0.4, 0.6, 0.3, 0.2, 0.55, 0.8, 0.9];
    let c = curve(&grid, probs.iter().map(|&p| Some(p)).collect());
    // brute force: scan a fine log grid of the interpolant for the first crossing
    let lx: Vec<f64> = grid.iter().map(|x| x.ln()).collect();
    let interp = |x: f64| {
        let k = lx.iter().rposition(|&g| g <= x).unwrap().min(lx.len() - 2);
        probs[k] + (probs[k + 1] - probs[k]) * (x - lx[k]) / (lx[k + 1] - lx[k])
    };
    let steps = 200_000;
    let first = (0..=steps)
        .map(|i| lx[0] + (lx[7] - lx[0]) * i as f64 / steps as f64)
        .find(|&x| interp(x) >= 0.5)
        .unwrap();
    let m = median_im(&c).unwrap().ln();
    assert!((m - first).abs() < 1e-4, "{m} vs {first}");
    assert!(m < lx[2]);
}

#[test]
fn median_im_skips_undefined_points() {
    let grid = [0.1, 0.2, 0.4, 0.8];
    let c = curve(&grid, vec![Some(0.2), None, Some(0.8), Some(0.9)]);
    let m = median_im(&c).unwrap();
    let expect = ((0.1f64).ln() + 0.5 * ((0.4f64).ln() - (0.1f64).ln())).exp();
    assert!((m - expect).abs() < 1e-12);
}

#[test]
fn median_logstd_recovery() {
    let mut rng = RandomStream::new(6, 0).rng();
    let ms: Vec<Option<f64>> = (0..10_000)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            Some((-0.7 + 0.1 * z).exp())
        })
        .collect();
    let s = median_im_logstd(&ms).unwrap();
    assert!((s.log_std / 0.1 - 1.0).abs() < 0.05);
    assert_eq!(s.valid, 10_000);
    let same = vec![Some(0.3); 12];
    assert_eq!(median_im_logstd(&same).unwrap().log_std, 0.0);
    let few: Vec<Option<f64>> = (0..20)
        .map(|i| (i % 3 == 0).then_some(0.3 + 0.01 * i as f64))
        .collect();
    assert!(matches!(median_im_logstd(&few), Err(Error::Stats(_))));
}

#[test]
fn bootstrap_median_tracks_original_curve_at_scale() {
    let pts = lognormal_records(31, 10_000, 1.0, -3.4, 0.35);
    let grid = default_grid(&pts, 60).unwrap();
    for est in [
        Estimator::Bmcs(BinSpec::default()),
        Estimator::Kde {
            bandwidth: KdeBandwidth::NormalReference,
            log_scale: true,
        },
    ] {
        let orig = est.evaluate(&pts, 0.02, &grid, ImKind::Sa).unwrap();
        let e = bootstrap_curves(
            &pts,
            est,
            0.02,
            &grid,
            ImKind::Sa,
            100,
            0.95,
            RandomStream::new(5, 0),
        )
        .unwrap();
        let worst = orig
            .probabilities
            .iter()
            .zip(&e.median)
            .filter_map(|(a, b)| Some((a.as_ref()? - b.as_ref()?).abs()))
            .fold(0.0, f64::max);
        assert!(worst <= 0.03, "{:?}: {worst}", est.method());
    }
}

#[test]
fn band_narrows_with_sample_size() {
    let grid = [0.4];
    let width = |n: usize| {
        (0..10)
            .map(|rep| {
                let pts = lognormal_records(200 + rep, n, 1.0, -3.4, 0.35);
                let e = bootstrap_curves(
                    &pts,
                    Estimator::Lr,
                    0.02,
                    &grid,
                    ImKind::Sa,
                    60,
                    0.95,
                    RandomStream::new(rep, 1),
                )
                .unwrap();
                e.upper[0].unwrap() - e.lower[0].unwrap()
            })
            .sum::<f64>()
            / 10.0
    };
    let (w1, w2, w3) = (width(500), width(2000), width(10_000));
    assert!(w1 >= w2 && w2 >= w3, "{w1} {w2} {w3}");
}

#[test]
fn ensemble_independent_of_scheduling() {
    let pts = lognormal_records(4, 1000, 1.0, -3.4, 0.35);
    let grid = default_grid(&pts, 20).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                bootstrap_curves(
                    &pts,
                    Estimator::Kde {
                        bandwidth: KdeBandwidth::NormalReference,
                        log_scale: true,
                    },
                    0.02,
                    &grid,
                    ImKind::Sa,
                    30,
                    0.9,
                    RandomStream::new(77, 0),
                )
                .unwrap()
            })
    };
    assert_eq!(run(1), run(4));
}

proptest! {
    #[test]
    fn band_is_ordered(seed in 0u64..100) {
        let pts = lognormal_records(seed, 400, 1.0, -3.4, 0.35);
        let grid = default_grid(&pts, 12).unwrap();
        let e = bootstrap_curves(&pts, Estimator::Bmcs(BinSpec::default()), 0.02, &grid, ImKind::Sa, 20, 0.9, RandomStream::new(seed, 0)).unwrap();
        for k in 0..grid.len() {
            if let (Some(l), Some(m), Some(u)) = (e.lower[k], e.median[k], e.upper[k]) {
                prop_assert!(l <= m && m <= u);
            }
        }
    }

    #[test]
    fn logstd_scale_invariant(c in 0.01f64..100.0, seed in 0u64..100) {
        let mut rng = RandomStream::new(seed, 0).rng();
        let ms: Vec<Option<f64>> = (0..30).map(|_| Some(rng.random_range(0.1..2.0))).collect();
        let scaled: Vec<Option<f64>> = ms.iter().map(|m| m.map(|v| v * c)).collect();
        let a = median_im_logstd(&ms).unwrap().log_std;
        let b = median_im_logstd(&scaled).unwrap().log_std;
        prop_assert!((a - b).abs() < 1e-12);
    }
}
