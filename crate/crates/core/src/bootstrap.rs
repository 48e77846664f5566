//! Bootstrap uncertainty of fragility estimates.
//!
//! Each replicate resamples the records with replacement on its own
//! [`RandomStream`] (index = replicate number), reruns one estimator with
//! fixed settings, and the replicate curves are summarized pointwise by
//! percentiles. Undefined points are excluded point by point; replicates
//! whose estimator fails are kept in the ensemble as failures.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::intensity::{DemandPoint, ImKind};
use crate::nonparametric::{
    bandwidth_normal_reference_2d, bmcs_fragility, kde_fragility, transform, validate_grid,
    Bandwidth1D, Bandwidth2D, BinSpec, FragilityCurve, Method,
};
use crate::parametric::{
    fit_linear_demand, fit_mle, fit_segmented, lr_to_fragility, segmented_to_fragility,
};
use crate::rng::RandomStream;

/// Default number of replicates.
pub const DEFAULT_REPLICATES: usize = 100;
/// Largest tolerated share of failed replicates.
pub const MAX_FAILURE_RATE: f64 = 0.2;
/// Fewest valid median IMs for a dispersion estimate.
pub const MIN_MEDIAN_SAMPLES: usize = 10;

/// Bandwidth choice of the kernel estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KdeBandwidth {
    Fixed {
        h_im: Bandwidth1D,
        h: Bandwidth2D,
    },
    /// Normal-reference matrix of the data at hand, `h_im = √H₂₂`.
    NormalReference,
}

/// A fragility estimator with its settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    Mle,
    Lr,
    Segmented,
    Bmcs(BinSpec),
    Kde {
        bandwidth: KdeBandwidth,
        log_scale: bool,
    },
}

impl Estimator {
    pub fn method(&self) -> Method {
        match self {
            Estimator::Mle => Method::Mle,
            Estimator::Lr => Method::Lr,
            Estimator::Segmented => Method::Segmented,
            Estimator::Bmcs(_) => Method::Bmcs,
            Estimator::Kde { .. } => Method::Kde,
        }
    }

    /// Fragility curve of `points` on `grid`.
    pub fn evaluate(
        &self,
        points: &[DemandPoint],
        delta_o: f64,
        grid: &[f64],
        im_kind: ImKind,
    ) -> Result<FragilityCurve> {
        validate_grid(grid)?;
        let method = self.method();
        match *self {
            Estimator::Mle => {
                let c = fit_mle(points, delta_o, im_kind)?.curve;
                Ok(FragilityCurve::from_fn(
                    grid,
                    method,
                    im_kind,
                    delta_o,
                    |x| c.eval(x),
                ))
            }
            Estimator::Lr => {
                let c = lr_to_fragility(&fit_linear_demand(points)?, delta_o, im_kind)?;
                Ok(FragilityCurve::from_fn(
                    grid,
                    method,
                    im_kind,
                    delta_o,
                    |x| c.eval(x),
                ))
            }
            Estimator::Segmented => {
                let fit = fit_segmented(points)?;
                Ok(FragilityCurve::from_fn(
                    grid,
                    method,
                    im_kind,
                    delta_o,
                    |x| segmented_to_fragility(&fit, delta_o, x),
                ))
            }
            Estimator::Bmcs(spec) => bmcs_fragility(points, delta_o, grid, spec, im_kind),
            Estimator::Kde {
                bandwidth,
                log_scale,
            } => {
                let (h_im, h) = match bandwidth {
                    KdeBandwidth::Fixed { h_im, h } => (h_im, h),
                    KdeBandwidth::NormalReference => {
                        let h = bandwidth_normal_reference_2d(&transform(points, log_scale)?)?;
                        (Bandwidth1D::new(h.h22.sqrt())?, h)
                    }
                };
                kde_fragility(points, delta_o, grid, &h_im, &h, log_scale, im_kind)
            }
        }
    }
}

/// `N` draws with replacement from `points`.
pub fn resample(points: &[DemandPoint], stream: RandomStream) -> Result<Vec<DemandPoint>> {
    if points.is_empty() {
        return Err(Error::DegenerateData(
            "cannot resample an empty record set".into(),
        ));
    }
    let mut rng = stream.rng();
    let n = points.len();
    Ok((0..n).map(|_| points[rng.random_range(0..n)]).collect())
}

/// Order statistic for percentile `p` of sorted values: the
/// `⌈p·m⌉`-th smallest (1-based), so the median of two values is the lower.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let m = sorted.len();
    let k = ((p * m as f64).ceil() as usize).clamp(1, m);
    sorted[k - 1]
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapEnsemble {
    pub estimator: Estimator,
    pub im_grid: Vec<f64>,
    /// One entry per replicate; `Err` holds the failure message.
    pub curves: Vec<std::result::Result<FragilityCurve, String>>,
    pub level: f64,
    pub median: Vec<Option<f64>>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
    /// Replicates with a defined value at each grid point.
    pub valid_counts: Vec<usize>,
    /// Median IM of each replicate curve.
    pub median_ims: Vec<Option<f64>>,
}

impl BootstrapEnsemble {
    pub fn failures(&self) -> usize {
        self.curves.iter().filter(|c| c.is_err()).count()
    }
}

/// Runs `replicates` bootstrap replicates of `estimator`; replicate `r`
/// resamples on `base.with_index(r)`.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_curves(
    points: &[DemandPoint],
    estimator: Estimator,
    delta_o: f64,
    grid: &[f64],
    im_kind: ImKind,
    replicates: usize,
    level: f64,
    base: RandomStream,
) -> Result<BootstrapEnsemble> {
    if replicates < 2 {
        return Err(Error::Config(format!(
            "need at least 2 bootstrap replicates, got {replicates}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    validate_grid(grid)?;
    let curves: Vec<std::result::Result<FragilityCurve, String>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let sample = resample(points, base.with_index(r as u64)).map_err(|e| e.to_string())?;
            estimator
                .evaluate(&sample, delta_o, grid, im_kind)
                .map_err(|e| e.to_string())
        })
        .collect();
    let failed = curves.iter().filter(|c| c.is_err()).count();
    if failed as f64 > MAX_FAILURE_RATE * replicates as f64 {
        let first = curves
            .iter()
            .find_map(|c| c.as_ref().err())
            .cloned()
            .unwrap_or_default();
        return Err(Error::Ensemble(format!(
            "{failed} of {replicates} bootstrap replicates failed (first: {first})"
        )));
    }
    let n = grid.len();
    let (mut median, mut lower, mut upper, mut valid_counts) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    let tail = 0.5 * (1.0 - level);
    for k in 0..n {
        let mut vals: Vec<f64> = curves
            .iter()
            .filter_map(|c| c.as_ref().ok().and_then(|c| c.probabilities[k]))
            .collect();
        vals.sort_by(f64::total_cmp);
        valid_counts.push(vals.len());
        if vals.is_empty() {
            median.push(None);
            lower.push(None);
            upper.push(None);
        } else {
            median.push(Some(percentile(&vals, 0.5)));
            lower.push(Some(percentile(&vals, tail)));
            upper.push(Some(percentile(&vals, 1.0 - tail)));
        }
    }
    let median_ims = curves
        .iter()
        .map(|c| c.as_ref().ok().and_then(median_im))
        .collect();
    Ok(BootstrapEnsemble {
        estimator,
        im_grid: grid.to_vec(),
        curves,
        level,
        median,
        lower,
        upper,
        valid_counts,
        median_ims,
    })
}

/// IM at the first upward crossing of 0.5, interpolated linearly in
/// `(ln IM, probability)` between adjacent defined grid points.
pub fn median_im(curve: &FragilityCurve) -> Option<f64> {
    let pts: Vec<(f64, f64)> = curve
        .im_grid
        .iter()
        .zip(&curve.probabilities)
        .filter_map(|(&x, p)| p.map(|p| (x.ln(), p)))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    if pts[0].1 >= 0.5 {
        return (pts[0].1 == 0.5).then(|| pts[0].0.exp());
    }
    pts.windows(2).find_map(|w| {
        let ((x0, p0), (x1, p1)) = (w[0], w[1]);
        (p0 < 0.5 && p1 >= 0.5).then(|| (x0 + (0.5 - p0) / (p1 - p0) * (x1 - x0)).exp())
    })
}

/// Dispersion of the median IM across replicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianImStats {
    pub log_std: f64,
    pub valid: usize,
}

/// Sample standard deviation of `ln` of the valid median IMs.
pub fn median_im_logstd(median_ims: &[Option<f64>]) -> Result<MedianImStats> {
    let logs: Vec<f64> = median_ims
        .iter()
        .flatten()
        .filter(|&&m| m > 0.0)
        .map(|m| m.ln())
        .collect();
    if logs.len() < MIN_MEDIAN_SAMPLES {
        return Err(Error::Stats(format!(
            "need at least {MIN_MEDIAN_SAMPLES} valid median IMs, got {}",
            logs.len()
        )));
    }
    let n = logs.len() as f64;
    let m = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(MedianImStats {
        log_std: var.sqrt(),
        valid: logs.len(),
    })
}
