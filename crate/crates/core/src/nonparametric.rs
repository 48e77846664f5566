//! Non-parametric fragility estimators.
//!
//! *Binned Monte Carlo* (bMCS) collects the records whose IM lies within a
//! relative half-width of a grid value, rescales their drifts to that IM and
//! reports the fraction exceeding the threshold.
//!
//! The *kernel* estimator smooths the joint density of `(Δ, IM)` with a
//! bivariate Gaussian kernel and the marginal of IM with a univariate one;
//! the fragility is the ratio of the joint mass above the threshold to the
//! marginal density. The inner integral over `Δ` is a Gaussian tail, so
//! every kernel contributes a closed-form term. By default both variables
//! are log-transformed first.
//!
//! Two-dimensional quantities use the ordering `(demand, intensity)`
//! throughout: `H₁₁` is the drift variance, `H₂₂` the IM variance.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::intensity::{DemandPoint, ImKind};
use crate::numeric::{logspace, mean, nelder_mead, quantile_sorted, sample_std, SimplexOptions};
use crate::parametric::DemandModelFit;
use crate::special::{norm_cdf, norm_pdf};

/// Estimator that produced a curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Mle,
    Lr,
    Segmented,
    Bmcs,
    Kde,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mle => "mle",
            Method::Lr => "lr",
            Method::Segmented => "segmented",
            Method::Bmcs => "bmcs",
            Method::Kde => "kde",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Fragility values on an IM grid; `None` marks points without enough
/// information.
#[derive(Debug, Clone, PartialEq)]
pub struct FragilityCurve {
    pub im_grid: Vec<f64>,
    pub probabilities: Vec<Option<f64>>,
    pub method: Method,
    pub im_kind: ImKind,
    pub threshold: f64,
    /// Records per bin (bMCS only).
    pub support: Option<Vec<usize>>,
}

impl FragilityCurve {
    /// Curve of a closed-form estimator sampled on `grid`.
    pub fn from_fn(
        grid: &[f64],
        method: Method,
        im_kind: ImKind,
        threshold: f64,
        f: impl Fn(f64) -> f64,
    ) -> Self {
        Self {
            im_grid: grid.to_vec(),
            probabilities: grid.iter().map(|&x| Some(f(x))).collect(),
            method,
            im_kind,
            threshold,
            support: None,
        }
    }
}

/// Checks that `grid` is positive and strictly increasing.
pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Parameter("IM grid is empty".into()));
    }
    if grid.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::Parameter(
            "IM grid values must be positive and finite".into(),
        ));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter(
            "IM grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// `n` log-spaced points between the 2nd and 98th percentiles of the
/// positive IM values.
pub fn default_grid(points: &[DemandPoint], n: usize) -> Result<Vec<f64>> {
    let mut ims: Vec<f64> = points
        .iter()
        .map(|p| p.im)
        .filter(|&x| x > 0.0 && x.is_finite())
        .collect();
    if ims.len() < 2 {
        return Err(Error::DegenerateData(
            "need at least two positive IM values for a grid".into(),
        ));
    }
    ims.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&ims, 0.02);
    let hi = quantile_sorted(&ims, 0.98);
    if !(hi > lo) {
        return Err(Error::DegenerateData("IM values have no spread".into()));
    }
    Ok(logspace(lo, hi, n))
}

/// Relative bin half-width and minimum support of the bMCS estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinSpec {
    pub h_rel: f64,
    pub n_min: usize,
}

impl Default for BinSpec {
    fn default() -> Self {
        Self {
            h_rel: 0.25,
            n_min: 30,
        }
    }
}

impl BinSpec {
    pub fn new(h_rel: f64, n_min: usize) -> Result<Self> {
        if !(h_rel > 0.0 && h_rel < 1.0) || n_min == 0 {
            return Err(Error::Config(format!(
                "bin half-width must lie in (0, 1) and n_min >= 1, got ({h_rel}, {n_min})"
            )));
        }
        Ok(Self { h_rel, n_min })
    }

    pub fn contains(&self, im: f64, im_o: f64) -> bool {
        im >= (1.0 - self.h_rel) * im_o && im <= (1.0 + self.h_rel) * im_o
    }
}

/// Drift rescaled to intensity `im_o`: `Δ_j · im_o / im_j`.
pub fn scale_drift(delta_j: f64, im_j: f64, im_o: f64) -> f64 {
    delta_j * im_o / im_j
}

pub fn bmcs_fragility(
    points: &[DemandPoint],
    delta_o: f64,
    im_grid: &[f64],
    spec: BinSpec,
    im_kind: ImKind,
) -> Result<FragilityCurve> {
    validate_grid(im_grid)?;
    let mut probabilities = Vec::with_capacity(im_grid.len());
    let mut support = Vec::with_capacity(im_grid.len());
    for &im_o in im_grid {
        let (mut n_s, mut n_f) = (0usize, 0usize);
        for p in points {
            if p.im > 0.0 && spec.contains(p.im, im_o) {
                n_s += 1;
                if scale_drift(p.delta, p.im, im_o) >= delta_o {
                    n_f += 1;
                }
            }
        }
        support.push(n_s);
        probabilities.push((n_s >= spec.n_min && n_s > 0).then(|| n_f as f64 / n_s as f64));
    }
    Ok(FragilityCurve {
        im_grid: im_grid.to_vec(),
        probabilities,
        method: Method::Bmcs,
        im_kind,
        threshold: delta_o,
        support: Some(support),
    })
}

/// Univariate Gaussian kernel density estimate at `x`.
pub fn kde_1d(samples: &[f64], h: f64, x: f64) -> f64 {
    let s: f64 = samples.iter().map(|&xi| norm_pdf((x - xi) / h)).sum();
    s / (samples.len() as f64 * h)
}

/// Bandwidth of the univariate kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidth1D {
    pub h: f64,
}

impl Bandwidth1D {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Bandwidth(format!("h must be positive, got {h}")));
        }
        Ok(Self { h })
    }
}

/// Symmetric positive definite bandwidth matrix in `(demand, intensity)`
/// ordering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidth2D {
    pub h11: f64,
    pub h12: f64,
    pub h22: f64,
}

impl Bandwidth2D {
    pub fn new(h11: f64, h12: f64, h22: f64) -> Result<Self> {
        let h = Self { h11, h12, h22 };
        if !(h11 > 0.0 && h22 > 0.0)
            || !(h.det() > 0.0)
            || ![h11, h12, h22].iter().all(|v| v.is_finite())
        {
            return Err(Error::Bandwidth(format!(
                "bandwidth matrix [[{h11}, {h12}], [{h12}, {h22}]] is not positive definite"
            )));
        }
        Ok(h)
    }

    pub fn det(&self) -> f64 {
        self.h11 * self.h22 - self.h12 * self.h12
    }

    pub fn trace(&self) -> f64 {
        self.h11 + self.h22
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let m = 0.5 * self.trace();
        let r = (0.25 * (self.h11 - self.h22).powi(2) + self.h12 * self.h12).sqrt();
        [m - r, m + r]
    }

    fn scaled(&self, c: f64) -> Self {
        Self {
            h11: c * self.h11,
            h12: c * self.h12,
            h22: c * self.h22,
        }
    }

    /// `vᵀ H⁻¹ v` for `v = (dv, da)`.
    fn quad(&self, dv: f64, da: f64) -> f64 {
        (self.h22 * dv * dv - 2.0 * self.h12 * dv * da + self.h11 * da * da) / self.det()
    }
}

/// Bivariate Gaussian kernel density estimate at `point = (δ, a)` from
/// samples in the same ordering.
pub fn kde_2d(samples: &[[f64; 2]], h: &Bandwidth2D, point: [f64; 2]) -> f64 {
    let s: f64 = samples
        .iter()
        .map(|s| (-0.5 * h.quad(point[0] - s[0], point[1] - s[1])).exp())
        .sum();
    s / (2.0 * PI * samples.len() as f64 * h.det().sqrt())
}

/// `∫_{δ_o}^∞ exp(−½ vᵀH⁻¹v) dδ` with `v = (δ − Δ_i, a − IM_i)`, in closed
/// form by conditioning the kernel on `a`.
pub fn kernel_exceedance_term(
    sample: [f64; 2],
    a: f64,
    delta_o: f64,
    h: &Bandwidth2D,
) -> Result<f64> {
    let var_c = h.h11 - h.h12 * h.h12 / h.h22;
    if !(var_c > 0.0) || !(h.h22 > 0.0) {
        return Err(Error::Bandwidth(format!(
            "conditional kernel variance {var_c} is not positive"
        )));
    }
    Ok(exceedance_unchecked(sample, a, delta_o, h, var_c))
}

#[inline]
fn exceedance_unchecked(
    sample: [f64; 2],
    a: f64,
    delta_o: f64,
    h: &Bandwidth2D,
    var_c: f64,
) -> f64 {
    let da = a - sample[1];
    let mu = sample[0] + h.h12 / h.h22 * da;
    let sd = var_c.sqrt();
    (-da * da / (2.0 * h.h22)).exp() * (2.0 * PI * var_c).sqrt() * norm_cdf((mu - delta_o) / sd)
}

/// Kernel fragility estimate. With `log_scale` the kernels act on
/// `(ln Δ, ln IM)`, the grid is mapped to `ln IM` and the threshold to
/// `ln δ_o`.
pub fn kde_fragility(
    points: &[DemandPoint],
    delta_o: f64,
    im_grid: &[f64],
    h_im: &Bandwidth1D,
    h: &Bandwidth2D,
    log_scale: bool,
    im_kind: ImKind,
) -> Result<FragilityCurve> {
    validate_grid(im_grid)?;
    if points.is_empty() {
        return Err(Error::DegenerateData("no records".into()));
    }
    Bandwidth2D::new(h.h11, h.h12, h.h22)?;
    Bandwidth1D::new(h_im.h)?;
    let samples = transform(points, log_scale)?;
    let (threshold, grid): (f64, Vec<f64>) = if log_scale {
        if !(delta_o > 0.0) {
            return Err(Error::Parameter(
                "log-scale kernel estimate needs a positive threshold".into(),
            ));
        }
        (delta_o.ln(), im_grid.iter().map(|x| x.ln()).collect())
    } else {
        (delta_o, im_grid.to_vec())
    };
    let var_c = h.h11 - h.h12 * h.h12 / h.h22;
    let joint_norm = 2.0 * PI * h.det().sqrt();
    let probabilities = grid
        .par_iter()
        .map(|&a| {
            let mut num = 0.0;
            let mut den = 0.0;
            for s in &samples {
                num += exceedance_unchecked(*s, a, threshold, h, var_c);
                den += norm_pdf((a - s[1]) / h_im.h);
            }
            let num = num / joint_norm;
            let den = den / h_im.h;
            (den >= 1e-300).then(|| (num / den).clamp(0.0, 1.0))
        })
        .collect();
    Ok(FragilityCurve {
        im_grid: im_grid.to_vec(),
        probabilities,
        method: Method::Kde,
        im_kind,
        threshold: delta_o,
        support: None,
    })
}

/// `(Δ, IM)` pairs, log-transformed when requested.
pub fn transform(points: &[DemandPoint], log_scale: bool) -> Result<Vec<[f64; 2]>> {
    if log_scale {
        if let Some(p) = points.iter().find(|p| !(p.im > 0.0 && p.delta > 0.0)) {
            return Err(Error::DegenerateData(format!(
                "log-scale kernel estimate needs positive IM and drift, got ({}, {})",
                p.im, p.delta
            )));
        }
        Ok(points.iter().map(|p| [p.delta.ln(), p.im.ln()]).collect())
    } else {
        Ok(points.iter().map(|p| [p.delta, p.im]).collect())
    }
}

/// `h = 1.06 σ̂ N^(−1/5)`.
pub fn bandwidth_normal_reference_1d(samples: &[f64]) -> Result<Bandwidth1D> {
    if samples.len() < 2 {
        return Err(Error::Bandwidth("need at least two samples".into()));
    }
    let s = sample_std(samples);
    if !(s > 0.0) {
        return Err(Error::Bandwidth("samples have zero variance".into()));
    }
    Bandwidth1D::new(1.06 * s * (samples.len() as f64).powf(-0.2))
}

/// `H = N^(−1/3) Σ̂`.
pub fn bandwidth_normal_reference_2d(samples: &[[f64; 2]]) -> Result<Bandwidth2D> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::Bandwidth("need at least two samples".into()));
    }
    let c = covariance(samples);
    let f = (n as f64).powf(-1.0 / 3.0);
    Bandwidth2D::new(f * c[0], f * c[1], f * c[2])
        .map_err(|_| Error::Bandwidth("sample covariance is singular".into()))
}

/// Sample covariance `(s11, s12, s22)` with `n − 1` denominators.
pub fn covariance(samples: &[[f64; 2]]) -> [f64; 3] {
    let n = samples.len() as f64;
    let m0 = samples.iter().map(|s| s[0]).sum::<f64>() / n;
    let m1 = samples.iter().map(|s| s[1]).sum::<f64>() / n;
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for s in samples {
        let (d0, d1) = (s[0] - m0, s[1] - m1);
        a += d0 * d0;
        b += d0 * d1;
        c += d1 * d1;
    }
    [a / (n - 1.0), b / (n - 1.0), c / (n - 1.0)]
}

/// Least-squares cross-validation score of `h` for Gaussian kernels:
/// `(1/N²) ΣΣ φ_{2H}(x_i − x_j) − 2/(N(N−1)) Σ_{i≠j} φ_H(x_i − x_j)`.
pub fn lscv_objective(samples: &[[f64; 2]], h: &Bandwidth2D) -> f64 {
    let n = samples.len();
    let h2 = h.scaled(2.0);
    let c1 = 1.0 / (2.0 * PI * h.det().sqrt());
    let c2 = 1.0 / (2.0 * PI * h2.det().sqrt());
    // per-row partial sums, merged in index order
    let rows: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = samples[i];
            let (mut s2, mut s1) = (0.0, 0.0);
            for xj in &samples[i + 1..] {
                let (d0, d1) = (xi[0] - xj[0], xi[1] - xj[1]);
                s2 += (-0.5 * h2.quad(d0, d1)).exp();
                s1 += (-0.5 * h.quad(d0, d1)).exp();
            }
            (s2, s1)
        })
        .collect();
    let (off2, off1) = rows
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let nf = n as f64;
    let int_sq = (nf * c2 + 2.0 * c2 * off2) / (nf * nf);
    let loo = 2.0 * c1 * off1 * 2.0 / (nf * (nf - 1.0));
    int_sq - loo
}

/// Smallest eigenvalue of an accepted cross-validated matrix, relative to
/// the normal-reference one.
pub const BOUNDARY_RATIO: f64 = 1e-6;

/// Outcome of [`bandwidth_lscv_2d`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LscvResult {
    pub bandwidth: Bandwidth2D,
    pub objective: f64,
    /// The search failed and the normal-reference matrix was returned.
    pub fell_back: bool,
}

/// Cross-validated bandwidth matrix. The search runs over the Cholesky
/// factor `L = [[e^p₀, 0], [p₁, e^p₂]]`, `H = LLᵀ`, from the
/// normal-reference matrix.
pub fn bandwidth_lscv_2d(samples: &[[f64; 2]]) -> Result<LscvResult> {
    if samples.len() < 50 {
        return Err(Error::Bandwidth(format!(
            "cross-validation needs at least 50 samples, got {}",
            samples.len()
        )));
    }
    let start = bandwidth_normal_reference_2d(samples)?;
    let l11 = start.h11.sqrt();
    let l21 = start.h12 / l11;
    let l22 = (start.h22 - l21 * l21).sqrt();
    let from = |p: &[f64]| {
        let (a, b, c) = (p[0].exp(), p[1], p[2].exp());
        Bandwidth2D {
            h11: a * a,
            h12: a * b,
            h22: b * b + c * c,
        }
    };
    let f = |p: &[f64]| {
        let h = from(p);
        if !(h.det() > 0.0) || !h.det().is_finite() {
            return f64::INFINITY;
        }
        lscv_objective(samples, &h)
    };
    let f0 = lscv_objective(samples, &start);
    let res = nelder_mead(
        f,
        &[l11.ln(), l21, l22.ln()],
        &[0.3, 0.3 * l22, 0.3],
        SimplexOptions {
            ftol_abs: 0.0,
            ftol_rel: 1e-8,
            xtol: 1e-8,
            max_iter: 2_000,
        },
    );
    let h = from(&res.x);
    // a collapsing eigenvalue means the search ran onto the singular boundary
    let floor = BOUNDARY_RATIO * start.eigenvalues()[0];
    match Bandwidth2D::new(h.h11, h.h12, h.h22) {
        Ok(b) if res.fx.is_finite() && res.fx <= f0 && b.eigenvalues()[0] > floor => {
            Ok(LscvResult {
                bandwidth: b,
                objective: res.fx,
                fell_back: false,
            })
        }
        _ => Ok(LscvResult {
            bandwidth: start,
            objective: f0,
            fell_back: true,
        }),
    }
}

/// Log-drift histogram of one bMCS bin with the normal implied by a
/// log-linear demand model.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalHistogram {
    pub im_level: f64,
    /// `ln` of the rescaled drifts in the bin.
    pub log_drifts: Vec<f64>,
    /// `n_bins + 1` cell edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub normal_mean: f64,
    pub normal_std: f64,
}

impl ConditionalHistogram {
    /// Density of the fitted normal at `x`.
    pub fn normal_density(&self, x: f64) -> f64 {
        norm_pdf((x - self.normal_mean) / self.normal_std) / self.normal_std
    }

    /// Histogram heights normalized to unit area.
    pub fn densities(&self) -> Vec<f64> {
        let n = self.log_drifts.len() as f64;
        self.counts
            .iter()
            .zip(self.edges.windows(2))
            .map(|(&c, w)| c as f64 / (n * (w[1] - w[0])))
            .collect()
    }
}

pub fn conditional_histogram(
    points: &[DemandPoint],
    im_level: f64,
    spec: BinSpec,
    n_bins: usize,
    model: &DemandModelFit,
) -> Result<ConditionalHistogram> {
    if n_bins == 0 {
        return Err(Error::Diagnostic("need at least one histogram cell".into()));
    }
    let log_drifts: Vec<f64> = points
        .iter()
        .filter(|p| p.im > 0.0 && p.delta > 0.0 && spec.contains(p.im, im_level))
        .map(|p| scale_drift(p.delta, p.im, im_level).ln())
        .collect();
    if log_drifts.len() < spec.n_min || log_drifts.is_empty() {
        return Err(Error::Diagnostic(format!(
            "bin at IM {im_level} holds {} records, need {}",
            log_drifts.len(),
            spec.n_min
        )));
    }
    let lo = log_drifts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = log_drifts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo {
        (hi - lo) / n_bins as f64
    } else {
        1.0
    };
    let edges: Vec<f64> = (0..=n_bins).map(|i| lo + i as f64 * width).collect();
    let mut counts = vec![0usize; n_bins];
    for &x in &log_drifts {
        let k = (((x - lo) / width) as usize).min(n_bins - 1);
        counts[k] += 1;
    }
    Ok(ConditionalHistogram {
        im_level,
        normal_mean: model.slope * im_level.ln() + model.intercept,
        normal_std: model.zeta_res,
        log_drifts,
        edges,
        counts,
    })
}

/// Mean and standard deviation of the log drifts in a histogram, for
/// reporting next to the model normal.
pub fn histogram_moments(hist: &ConditionalHistogram) -> (f64, f64) {
    (mean(&hist.log_drifts), sample_std(&hist.log_drifts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_examples() {
        assert!((scale_drift(0.02, 0.5, 0.4) - 0.016).abs() < 1e-15);
        assert_eq!(scale_drift(0.02, 0.4, 0.4), 0.02);
    }

    #[test]
    fn bin_ratio_examples() {
        let pts: Vec<DemandPoint> = (0..10)
            .map(|i| DemandPoint {
                im: 1.0,
                delta: if i < 3 { 0.05 } else { 0.001 },
            })
            .collect();
        let c = bmcs_fragility(
            &pts,
            0.01,
            &[1.0, 10.0],
            BinSpec::new(0.25, 1).unwrap(),
            ImKind::Pga,
        )
        .unwrap();
        assert_eq!(c.probabilities, vec![Some(0.3), None]);
        assert_eq!(c.support, Some(vec![10, 0]));
    }

    #[test]
    fn non_spd_rejected() {
        assert!(Bandwidth2D::new(1.0, 1.0, 1.0).is_err());
        assert!(Bandwidth2D::new(1.0, 0.5, 1.0).is_ok());
    }

    #[test]
    fn single_sample_peaks() {
        assert!((kde_1d(&[0.3], 0.2, 0.3) - 1.0 / (0.2 * (2.0 * PI).sqrt())).abs() < 1e-15);
        let h = Bandwidth2D::new(0.04, 0.01, 0.09).unwrap();
        let v = kde_2d(&[[0.1, 0.2]], &h, [0.1, 0.2]);
        assert!((v - 1.0 / (2.0 * PI * h.det().sqrt())).abs() < 1e-14);
    }
}
