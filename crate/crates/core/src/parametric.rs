//! Lognormal fragility curves: maximum likelihood on binary exceedance
//! data, and conversion from (segmented) log-linear demand models.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::intensity::{DemandPoint, ImKind};
use crate::numeric::{golden_section_min, nelder_mead, quantile_sorted, SimplexOptions};
use crate::special::{log_norm_cdf, norm_cdf};

/// Smallest log-standard deviation used for a degenerate (step) curve.
pub const STEP_BETA: f64 = 1e-12;
/// Below this `β̂` the data are treated as (nearly) perfectly separated.
pub const SEPARATION_BETA: f64 = 1e-4;

/// `P(Δ ≥ δ_o | IM = im) = Φ((ln im − ln α) / β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LognormalCurve {
    /// Median IM, g.
    pub alpha: f64,
    pub beta: f64,
    pub im_kind: ImKind,
    pub threshold: f64,
}

impl LognormalCurve {
    pub fn new(alpha: f64, beta: f64, im_kind: ImKind, threshold: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Parameter(format!(
                "lognormal curve needs alpha > 0 and beta > 0, got ({alpha}, {beta})"
            )));
        }
        Ok(Self {
            alpha,
            beta,
            im_kind,
            threshold,
        })
    }

    pub fn eval(&self, im: f64) -> f64 {
        lognormal_eval(self, im)
    }
}

pub fn lognormal_eval(curve: &LognormalCurve, im: f64) -> f64 {
    if im <= 0.0 {
        return 0.0;
    }
    norm_cdf((im.ln() - curve.alpha.ln()) / curve.beta)
}

/// Result of [`fit_mle`].
#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    pub curve: LognormalCurve,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

fn exceedances(points: &[DemandPoint], delta_o: f64) -> Vec<bool> {
    points.iter().map(|p| p.delta >= delta_o).collect()
}

/// Bernoulli log-likelihood of the lognormal curve `(α, β)`.
pub fn log_likelihood(points: &[DemandPoint], delta_o: f64, alpha: f64, beta: f64) -> f64 {
    let ln_a = alpha.ln();
    points
        .iter()
        .map(|p| {
            let z = (p.im.ln() - ln_a) / beta;
            if p.delta >= delta_o {
                log_norm_cdf(z)
            } else {
                log_norm_cdf(-z)
            }
        })
        .sum()
}

/// Maximum-likelihood lognormal curve for the exceedance of `delta_o`.
pub fn fit_mle(points: &[DemandPoint], delta_o: f64, im_kind: ImKind) -> Result<MleFit> {
    if points.iter().any(|p| !(p.im > 0.0) || !p.im.is_finite()) {
        return Err(Error::DegenerateData(
            "intensity measures must be positive".into(),
        ));
    }
    let y = exceedances(points, delta_o);
    let failures = y.iter().filter(|&&v| v).count();
    if failures == 0 || failures == y.len() {
        return Err(Error::DegenerateData(format!(
            "{failures} of {} records exceed {delta_o}; need both outcomes",
            y.len()
        )));
    }

    let start = fit_linear_demand(points)
        .and_then(|f| lr_to_fragility(&f, delta_o, im_kind))
        .ok()
        .filter(|c| c.beta > 1e-3 && c.beta < 10.0 && c.alpha.is_finite())
        .map(|c| (c.alpha, c.beta))
        .unwrap_or_else(|| {
            let mut ims: Vec<f64> = points
                .iter()
                .zip(&y)
                .filter(|(_, &f)| f)
                .map(|(p, _)| p.im)
                .collect();
            ims.sort_by(f64::total_cmp);
            (quantile_sorted(&ims, 0.5), 0.6)
        });

    let ln_im: Vec<f64> = points.iter().map(|p| p.im.ln()).collect();
    let nll = |x: &[f64]| {
        let beta = x[1].exp();
        -ln_im
            .iter()
            .zip(&y)
            .map(|(&l, &f)| {
                let z = (l - x[0]) / beta;
                if f {
                    log_norm_cdf(z)
                } else {
                    log_norm_cdf(-z)
                }
            })
            .sum::<f64>()
    };
    let res = nelder_mead(
        nll,
        &[start.0.ln(), start.1.ln()],
        &[0.2, 0.2],
        SimplexOptions {
            ftol_abs: 1e-9,
            ftol_rel: 0.0,
            xtol: 1e-7,
            max_iter: 5_000,
        },
    );
    let (alpha, beta) = (res.x[0].exp(), res.x[1].exp());
    let mut warnings = Vec::new();
    let max_survivor = points
        .iter()
        .zip(&y)
        .filter(|(_, &f)| !f)
        .map(|(p, _)| p.im)
        .fold(f64::MIN, f64::max);
    let min_failure = points
        .iter()
        .zip(&y)
        .filter(|(_, &f)| f)
        .map(|(p, _)| p.im)
        .fold(f64::MAX, f64::min);
    if beta < SEPARATION_BETA || max_survivor < min_failure {
        warnings.push(format!(
            "threshold {delta_o}: exceedance data are (nearly) perfectly separated in {im_kind}; beta collapsed to {beta:.3e}"
        ));
    } else if !res.converged {
        warnings.push(format!(
            "threshold {delta_o}: likelihood maximization stopped after {} iterations without meeting tolerances",
            res.iterations
        ));
    }
    Ok(MleFit {
        curve: LognormalCurve::new(alpha, beta.max(STEP_BETA), im_kind, delta_o)?,
        log_likelihood: -res.fx,
        iterations: res.iterations,
        converged: res.converged,
        warnings,
    })
}

/// Least-squares fit of `ln Δ = A ln IM + B + ζ ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandModelFit {
    pub slope: f64,
    pub intercept: f64,
    pub zeta_res: f64,
    pub r2: f64,
    pub n: usize,
}

fn log_pairs(points: &[DemandPoint]) -> Result<(Vec<f64>, Vec<f64>)> {
    if let Some(p) = points
        .iter()
        .find(|p| !(p.im > 0.0 && p.delta > 0.0) || !(p.im.is_finite() && p.delta.is_finite()))
    {
        return Err(Error::DegenerateData(format!(
            "log-linear demand model needs positive IM and drift, got ({}, {})",
            p.im, p.delta
        )));
    }
    Ok(points.iter().map(|p| (p.im.ln(), p.delta.ln())).unzip())
}

/// Ordinary least squares of `ln Δ` on `ln IM`.
pub fn fit_linear_demand(points: &[DemandPoint]) -> Result<DemandModelFit> {
    if points.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 records, got {}",
            points.len()
        )));
    }
    let (x, y) = log_pairs(points)?;
    ols(&x, &y)
}

fn ols(x: &[f64], y: &[f64]) -> Result<DemandModelFit> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit("ln IM has zero variance".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r2 = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(DemandModelFit {
        slope,
        intercept,
        zeta_res: (sse / (n - 2.0)).sqrt(),
        r2,
        n: x.len(),
    })
}

/// Lognormal curve implied by a demand model:
/// `α = exp((ln δ_o − B)/A)`, `β = ζ/A`.
pub fn lr_to_fragility(
    fit: &DemandModelFit,
    delta_o: f64,
    im_kind: ImKind,
) -> Result<LognormalCurve> {
    if !(fit.slope > 0.0) {
        return Err(Error::Fit(format!(
            "demand slope {} is not positive; the implied fragility would not increase with IM",
            fit.slope
        )));
    }
    if !(delta_o > 0.0) {
        return Err(Error::Parameter(format!(
            "threshold must be positive, got {delta_o}"
        )));
    }
    let alpha = ((delta_o.ln() - fit.intercept) / fit.slope).exp();
    let beta = (fit.zeta_res / fit.slope).max(STEP_BETA);
    LognormalCurve::new(alpha, beta, im_kind, delta_o)
}

/// One branch of a segmented demand model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub slope: f64,
    pub intercept: f64,
    pub zeta_res: f64,
    pub r2: f64,
    pub n: usize,
}

/// Continuous two-branch demand model in `(ln IM, ln Δ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedFit {
    /// Break point, g.
    pub break_im: f64,
    pub lower: Segment,
    pub upper: Segment,
    pub sse: f64,
    /// SSE of the single-line fit on the same data.
    pub sse_linear: f64,
    /// The break improves the fit by less than 1e-8 relative.
    pub effectively_linear: bool,
    /// No admissible break existed; both segments hold the single-line fit.
    pub fallback_linear: bool,
}

/// Minimum number of records on each side of a candidate break.
pub const MIN_SEGMENT_POINTS: usize = 10;
const BREAK_GRID: usize = 50;

struct Design {
    b: Vector3<f64>,
    sse: f64,
}

/// Least squares on regressors `[1, x, (x − c)₊]`.
fn hinge_fit(x: &[f64], y: &[f64], c: f64) -> Option<Design> {
    let mut xtx = Matrix3::zeros();
    let mut xty = Vector3::zeros();
    for (&xi, &yi) in x.iter().zip(y) {
        let r = Vector3::new(1.0, xi, (xi - c).max(0.0));
        xtx += r * r.transpose();
        xty += r * yi;
    }
    let b = xtx.cholesky()?.solve(&xty);
    let sse = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| (yi - b[0] - b[1] * xi - b[2] * (xi - c).max(0.0)).powi(2))
        .sum();
    Some(Design { b, sse })
}

fn segment_stats(x: &[f64], y: &[f64], slope: f64, intercept: f64) -> Segment {
    let n = x.len();
    let my = y.iter().sum::<f64>() / n.max(1) as f64;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    Segment {
        slope,
        intercept,
        zeta_res: if n > 2 {
            (sse / (n as f64 - 2.0)).sqrt()
        } else {
            f64::NAN
        },
        r2: if syy > 0.0 {
            (1.0 - sse / syy).clamp(0.0, 1.0)
        } else {
            1.0
        },
        n,
    }
}

/// Bilinear demand model with the break located by a grid search over the
/// 10–90 % quantiles of `ln IM` followed by golden-section refinement.
pub fn fit_segmented(points: &[DemandPoint]) -> Result<SegmentedFit> {
    if points.len() < 20 {
        return Err(Error::Fit(format!(
            "segmented fit needs at least 20 records, got {}",
            points.len()
        )));
    }
    let (x, y) = log_pairs(points)?;
    let linear = ols(&x, &y)?;
    let sse_linear = linear.zeta_res.powi(2) * (x.len() as f64 - 2.0);

    let mut sorted = x.clone();
    sorted.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&sorted, 0.1);
    let hi = quantile_sorted(&sorted, 0.9);
    let admissible = |c: f64| {
        let below = sorted.partition_point(|&v| v <= c);
        below >= MIN_SEGMENT_POINTS && sorted.len() - below >= MIN_SEGMENT_POINTS
    };
    let objective = |c: f64| {
        if !admissible(c) {
            return f64::INFINITY;
        }
        hinge_fit(&x, &y, c).map_or(f64::INFINITY, |d| d.sse)
    };

    let grid: Vec<f64> = (0..BREAK_GRID)
        .map(|i| lo + (hi - lo) * i as f64 / (BREAK_GRID - 1) as f64)
        .collect();
    let scores: Vec<f64> = grid.iter().map(|&c| objective(c)).collect();
    let best = (0..BREAK_GRID)
        .min_by(|&a, &b| scores[a].total_cmp(&scores[b]))
        .unwrap_or(0);

    if !scores[best].is_finite() || !(hi > lo) {
        let seg = Segment {
            slope: linear.slope,
            intercept: linear.intercept,
            zeta_res: linear.zeta_res,
            r2: linear.r2,
            n: x.len(),
        };
        return Ok(SegmentedFit {
            break_im: sorted[sorted.len() - 1].exp(),
            lower: seg,
            upper: seg,
            sse: sse_linear,
            sse_linear,
            effectively_linear: true,
            fallback_linear: true,
        });
    }

    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(BREAK_GRID - 1)];
    let (mut c, mut sse) = golden_section_min(objective, a, b, 1e-10 * (hi - lo).max(1e-300));
    if scores[best] < sse {
        c = grid[best];
        sse = scores[best];
    }
    let d = hinge_fit(&x, &y, c).expect("admissible break has a solution");

    let (s1, i1) = (d.b[1], d.b[0]);
    let (s2, i2) = (d.b[1] + d.b[2], d.b[0] - d.b[2] * c);
    let (mut xl, mut yl, mut xu, mut yu) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (&xi, &yi) in x.iter().zip(&y) {
        if xi <= c {
            xl.push(xi);
            yl.push(yi);
        } else {
            xu.push(xi);
            yu.push(yi);
        }
    }
    let sst: f64 = {
        let my = y.iter().sum::<f64>() / y.len() as f64;
        y.iter().map(|v| (v - my).powi(2)).sum()
    };
    let effectively_linear = sse_linear - sse <= 1e-8 * sse_linear.max(1e-12 * sst);
    Ok(SegmentedFit {
        break_im: c.exp(),
        lower: segment_stats(&xl, &yl, s1, i1),
        upper: segment_stats(&xu, &yu, s2, i2),
        sse,
        sse_linear,
        effectively_linear,
        fallback_linear: false,
    })
}

impl SegmentedFit {
    /// Branch governing `im`.
    pub fn segment(&self, im: f64) -> &Segment {
        if im.ln() <= self.break_im.ln() {
            &self.lower
        } else {
            &self.upper
        }
    }
}

/// `Φ((A_s ln im + B_s − ln δ_o)/ζ_s)` with the branch containing `im`.
pub fn segmented_to_fragility(fit: &SegmentedFit, delta_o: f64, im: f64) -> f64 {
    if im <= 0.0 {
        return 0.0;
    }
    let s = fit.segment(im);
    let zeta = if s.zeta_res.is_finite() {
        s.zeta_res.max(STEP_BETA)
    } else {
        STEP_BETA
    };
    norm_cdf((s.slope * im.ln() + s.intercept - delta_o.ln()) / zeta)
}
