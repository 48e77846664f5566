use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use seisfrag::intensity::{DemandPoint, ImKind};
use seisfrag::parametric::*;
use seisfrag::rng::RandomStream;
use seisfrag::special::norm_cdf;

/// IMs log-uniform on [0.05, 5] g, exceedance drawn from Φ((ln im − ln α)/β).
fn bernoulli_data(seed: u64, n: usize, alpha: f64, beta: f64) -> Vec<DemandPoint> {
    let mut rng = RandomStream::new(seed, 0).rng();
    (0..n)
        .map(|_| {
            let im = (rng.random::<f64>() * (5.0f64 / 0.05).ln()).exp() * 0.05;
            let p = norm_cdf((im.ln() - alpha.ln()) / beta);
            let fail = rng.random::<f64>() < p;
            DemandPoint {
                im,
                delta: if fail { 1.0 } else { 0.5 },
            }
        })
        .collect()
}

/// `ln Δ = A ln IM + B + ζ ε` with `ln IM ~ U(ln 0.02, ln 3)`.
fn demand_data(seed: u64, n: usize, a: f64, b: f64, zeta: f64) -> Vec<DemandPoint> {
    let mut rng = RandomStream::new(seed, 1).rng();
    (0..n)
        .map(|_| {
            let l = (0.02f64).ln() + rng.random::<f64>() * (3.0f64 / 0.02).ln();
            let e: f64 = StandardNormal.sample(&mut rng);
            DemandPoint {
                im: l.exp(),
                delta: (a * l + b + zeta * e).exp(),
            }
        })
        .collect()
}

#[test]
fn lognormal_value_at_one_sigma() {
    let c = LognormalCurve::new(1.0, 0.5, ImKind::Pga, 0.01).unwrap();
    assert!((c.eval(0.5f64.exp()) - 0.841345).abs() < 1e-6);
}

#[test]
fn mle_recovers_known_curve() {
    let pts = bernoulli_data(3, 5000, 1.0, 0.5);
    let fit = fit_mle(&pts, 1.0, ImKind::Pga).unwrap();
    assert!((0.95..=1.05).contains(&fit.curve.alpha), "{:?}", fit.curve);
    assert!((0.45..=0.55).contains(&fit.curve.beta), "{:?}", fit.curve);
    assert!(fit.converged && fit.warnings.is_empty());
}

#[test]
fn mle_degenerate_outcomes() {
    let pts = bernoulli_data(1, 100, 1.0, 0.5);
    assert!(matches!(
        fit_mle(&pts, 10.0, ImKind::Pga),
        Err(seisfrag::error::Error::DegenerateData(_))
    ));
    assert!(matches!(
        fit_mle(&pts, 0.1, ImKind::Pga),
        Err(seisfrag::error::Error::DegenerateData(_))
    ));
}

#[test]
fn mle_separation_warns() {
    let pts: Vec<DemandPoint> = (1..=40)
        .map(|i| DemandPoint {
            im: i as f64 * 0.05,
            delta: if i > 20 { 1.0 } else { 0.1 },
        })
        .collect();
    let fit = fit_mle(&pts, 0.5, ImKind::Pga).unwrap();
    assert!(fit.curve.beta < 0.05, "{}", fit.curve.beta);
    assert!(!fit.warnings.is_empty());
    assert!(fit.curve.alpha > 1.0 && fit.curve.alpha < 1.05);
}

#[test]
fn mle_reorder_and_rescale() {
    let pts = bernoulli_data(9, 800, 0.6, 0.4);
    let a = fit_mle(&pts, 1.0, ImKind::Sa).unwrap().curve;
    let mut rev = pts.clone();
    rev.reverse();
    let b = fit_mle(&rev, 1.0, ImKind::Sa).unwrap().curve;
    assert!((a.alpha / b.alpha - 1.0).abs() < 1e-5 && (a.beta / b.beta - 1.0).abs() < 1e-5);
    let scaled: Vec<DemandPoint> = pts
        .iter()
        .map(|p| DemandPoint {
            im: 2.5 * p.im,
            ..*p
        })
        .collect();
    let c = fit_mle(&scaled, 1.0, ImKind::Sa).unwrap().curve;
    assert!((c.alpha / (2.5 * a.alpha) - 1.0).abs() < 1e-5);
    assert!((c.beta / a.beta - 1.0).abs() < 1e-5);
}

#[test]
fn lr_exact_on_noise_free_data() {
    let pts = demand_data(4, 200, 1.2, -4.0, 0.0);
    let fit = fit_linear_demand(&pts).unwrap();
    assert!((fit.slope - 1.2).abs() < 1e-10);
    assert!((fit.intercept + 4.0).abs() < 1e-10);
    assert!(fit.zeta_res < 1e-10);
    assert!((fit.r2 - 1.0).abs() < 1e-10);
}

#[test]
fn lr_recovers_generator() {
    let pts = demand_data(5, 20_000, 1.2, -4.0, 0.3);
    let fit = fit_linear_demand(&pts).unwrap();
    assert!((fit.slope / 1.2 - 1.0).abs() < 0.02);
    assert!((fit.intercept / -4.0 - 1.0).abs() < 0.02);
    assert!((fit.zeta_res / 0.3 - 1.0).abs() < 0.02);
}

#[test]
fn lr_null_model() {
    let mut pts = demand_data(6, 10_000, 1.2, -4.0, 0.3);
    let mut rng = RandomStream::new(6, 9).rng();
    // Fisher–Yates on the drifts only
    for i in (1..pts.len()).rev() {
        let j = rng.random_range(0..=i);
        let d = pts[i].delta;
        pts[i].delta = pts[j].delta;
        pts[j].delta = d;
    }
    assert!(fit_linear_demand(&pts).unwrap().r2 < 0.05);
}

#[test]
fn lr_residual_identities() {
    let pts = demand_data(8, 500, 0.9, -3.0, 0.4);
    let fit = fit_linear_demand(&pts).unwrap();
    let res: Vec<f64> = pts
        .iter()
        .map(|p| p.delta.ln() - fit.slope * p.im.ln() - fit.intercept)
        .collect();
    assert!(res.iter().sum::<f64>().abs() < 1e-9);
    let sse: f64 = res.iter().map(|r| r * r).sum();
    assert!((fit.zeta_res.powi(2) - sse / 498.0).abs() < 1e-12);
}

#[test]
fn lr_fragility_matches_monte_carlo() {
    let fit = DemandModelFit {
        slope: 1.2,
        intercept: -4.0,
        zeta_res: 0.3,
        r2: 0.0,
        n: 0,
    };
    let c = lr_to_fragility(&fit, 0.015, ImKind::Sa).unwrap();
    assert!((c.alpha - ((0.015f64.ln() + 4.0) / 1.2).exp()).abs() < 1e-14);
    assert!((c.beta - 0.25).abs() < 1e-15);
    let mut rng = RandomStream::new(10, 0).rng();
    for &im in &[0.2, 0.35, 0.6] {
        let n = 200_000;
        let hits = (0..n)
            .filter(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                1.2 * f64::ln(im) - 4.0 + 0.3 * e >= 0.015f64.ln()
            })
            .count();
        assert!(
            (hits as f64 / n as f64 - c.eval(im)).abs() < 0.005,
            "im={im}"
        );
    }
}

fn bilinear(l: f64, brk: f64) -> f64 {
    let c = brk.ln();
    if l <= c {
        1.0 * l - 4.0
    } else {
        1.0 * c - 4.0 + 2.0 * (l - c)
    }
}

#[test]
fn segmented_exact_recovery() {
    let pts: Vec<DemandPoint> = (0..400)
        .map(|i| {
            let l = (0.05f64).ln() + (3.0f64 / 0.05).ln() * (i as f64 + 0.5) / 400.0;
            DemandPoint {
                im: l.exp(),
                delta: bilinear(l, 0.45).exp(),
            }
        })
        .collect();
    let fit = fit_segmented(&pts).unwrap();
    assert!((fit.break_im / 0.45 - 1.0).abs() < 0.02, "{}", fit.break_im);
    assert!(fit.sse < 1e-12, "{}", fit.sse);
    assert!(!fit.effectively_linear && !fit.fallback_linear);
    assert!((fit.lower.slope - 1.0).abs() < 1e-6 && (fit.upper.slope - 2.0).abs() < 1e-6);
}

#[test]
fn segmented_on_linear_data_is_flagged() {
    let pts = demand_data(11, 300, 1.1, -3.5, 0.0);
    let fit = fit_segmented(&pts).unwrap();
    assert!(fit.effectively_linear);
}

#[test]
fn segmented_noisy_recovery() {
    let mut rng = RandomStream::new(12, 0).rng();
    let pts: Vec<DemandPoint> = (0..10_000)
        .map(|_| {
            let l = (0.05f64).ln() + rng.random::<f64>() * (3.0f64 / 0.05).ln();
            let e: f64 = StandardNormal.sample(&mut rng);
            DemandPoint {
                im: l.exp(),
                delta: (bilinear(l, 0.45) + 0.2 * e).exp(),
            }
        })
        .collect();
    let fit = fit_segmented(&pts).unwrap();
    assert!((fit.break_im / 0.45 - 1.0).abs() < 0.1, "{}", fit.break_im);
}

#[test]
fn segmented_needs_enough_points() {
    let pts = demand_data(13, 15, 1.0, -4.0, 0.1);
    assert!(fit_segmented(&pts).is_err());
    // 20 points with only 5 distinct IM values leave no admissible break
    let lumpy: Vec<DemandPoint> = (0..20)
        .map(|i| DemandPoint {
            im: if i < 18 { 0.1 } else { 1.0 },
            delta: 0.01 + i as f64 * 1e-4,
        })
        .collect();
    let fit = fit_segmented(&lumpy).unwrap();
    assert!(fit.fallback_linear);
}

#[test]
fn segmented_fragility_reductions() {
    let seg = |s, i, z| Segment {
        slope: s,
        intercept: i,
        zeta_res: z,
        r2: 1.0,
        n: 100,
    };
    let fit = SegmentedFit {
        break_im: 0.45,
        lower: seg(1.0, -4.0, 0.25),
        upper: seg(2.0, -4.0 + 0.45f64.ln() * (1.0 - 2.0), 0.25),
        sse: 0.0,
        sse_linear: 0.0,
        effectively_linear: false,
        fallback_linear: false,
    };
    let lr = lr_to_fragility(
        &DemandModelFit {
            slope: 1.0,
            intercept: -4.0,
            zeta_res: 0.25,
            r2: 1.0,
            n: 100,
        },
        0.01,
        ImKind::Sa,
    )
    .unwrap();
    for &im in &[0.01, 0.05, 0.2] {
        assert!((segmented_to_fragility(&fit, 0.01, im) - lr.eval(im)).abs() < 1e-14);
    }
    let below = segmented_to_fragility(&fit, 0.01, 0.45);
    let above = segmented_to_fragility(&fit, 0.01, 0.45 * (1.0 + 1e-12));
    assert!((below - above).abs() < 1e-9);

    // piecewise generative model with distinct dispersions, by Monte Carlo
    let mixed = SegmentedFit {
        upper: seg(2.0, -4.0 + 0.45f64.ln() * (1.0 - 2.0), 0.4),
        ..fit
    };
    let mut rng = RandomStream::new(14, 0).rng();
    for &im in &[0.1, 0.45, 0.9] {
        let s = mixed.segment(im);
        let n = 1_000_000;
        let hits = (0..n)
            .filter(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                s.slope * f64::ln(im) + s.intercept + s.zeta_res * e >= 0.01f64.ln()
            })
            .count();
        assert!((hits as f64 / n as f64 - segmented_to_fragility(&mixed, 0.01, im)).abs() < 0.01);
    }
}

proptest! {
    #[test]
    fn lognormal_strictly_increasing(alpha in 0.01f64..5.0, beta in 0.05f64..2.0, a in -4.0f64..2.0, d in 1e-3f64..1.0) {
        let c = LognormalCurve::new(alpha, beta, ImKind::Pga, 0.01).unwrap();
        // stay where Φ is not rounded to 0 or 1
        prop_assume!(((a - alpha.ln()) / beta).abs() < 7.0 && ((a + d - alpha.ln()) / beta).abs() < 7.0);
        let (lo, hi) = (c.eval(a.exp()), c.eval((a + d).exp()));
        prop_assert!(lo > 0.0 && hi < 1.0);
        prop_assert!(hi > lo);
    }

    #[test]
    fn lr_conversion_identity(
        a in 0.3f64..3.0, b in -6.0f64..0.0, z in 0.05f64..1.0,
        delta_o in 1e-3f64..0.1, l in -3.0f64..1.5,
    ) {
        let fit = DemandModelFit { slope: a, intercept: b, zeta_res: z, r2: 0.5, n: 10 };
        let c = lr_to_fragility(&fit, delta_o, ImKind::Sa).unwrap();
        let direct = 1.0 - norm_cdf((delta_o.ln() - (a * l + b)) / z);
        prop_assert!((c.eval(l.exp()) - direct).abs() < 1e-12);
    }
}
