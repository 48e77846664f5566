//! Intensity measures and energy descriptors of accelerograms, and the
//! `(IM, Δ)` pairs every fragility estimator consumes.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use crate::accelerogram::{Accelerogram, STANDARD_GRAVITY};
use crate::error::{Error, Result};
use crate::structure::linear_sdof_response;

/// Peak absolute acceleration, g.
pub fn pga(acc: &Accelerogram) -> f64 {
    acc.samples().iter().fold(0.0_f64, |m, a| m.max(a.abs()))
}

/// Running Arias intensity `I(t_k)` (s·g) by the trapezoidal rule.
pub fn cumulative_arias(acc: &Accelerogram) -> Vec<f64> {
    let a = acc.samples();
    let half_step = 0.5 * acc.dt() * 0.5 * PI;
    let mut out = Vec::with_capacity(a.len());
    let mut total = 0.0;
    out.push(0.0);
    for w in a.windows(2) {
        total += half_step * (w[0] * w[0] + w[1] * w[1]);
        out.push(total);
    }
    out
}

/// Arias intensity `(π/2) ∫ a² dt` for `a` in g, s·g.
pub fn arias_intensity(acc: &Accelerogram) -> f64 {
    *cumulative_arias(acc).last().expect("non-empty record")
}

/// First time at which the running Arias intensity reaches `alpha` of its
/// total, interpolated linearly between samples.
pub fn t_alpha(acc: &Accelerogram, alpha: f64) -> Result<f64> {
    let cum = cumulative_arias(acc);
    t_alpha_from_cumulative(&cum, acc.dt(), alpha)
}

fn t_alpha_from_cumulative(cum: &[f64], dt: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let total = *cum.last().expect("non-empty record");
    if !(total > 0.0) {
        return Err(Error::UndefinedDescriptor(
            "record carries no energy".into(),
        ));
    }
    let target = alpha * total;
    let k = cum.partition_point(|&v| v < target);
    if k == 0 {
        return Ok(0.0);
    }
    let (lo, hi) = (cum[k - 1], cum[k]);
    let frac = if hi > lo {
        (target - lo) / (hi - lo)
    } else {
        0.0
    };
    Ok((k as f64 - 1.0 + frac) * dt)
}

/// 5–95 % significant duration, s.
pub fn d595(acc: &Accelerogram) -> Result<f64> {
    let cum = cumulative_arias(acc);
    Ok(t_alpha_from_cumulative(&cum, acc.dt(), 0.95)?
        - t_alpha_from_cumulative(&cum, acc.dt(), 0.05)?)
}

/// Peak absolute (total) acceleration of a linear oscillator, g.
pub fn spectral_acceleration(acc: &Accelerogram, period: f64, zeta: f64) -> Result<f64> {
    let r = linear_sdof_response(period, zeta, acc)?;
    Ok(r.absolute_accelerations[0]
        .iter()
        .fold(0.0_f64, |m, a| m.max(a.abs())))
}

/// `(2π/T)² max |u|` of a linear oscillator, g.
pub fn pseudo_spectral_acceleration(acc: &Accelerogram, period: f64, zeta: f64) -> Result<f64> {
    let r = linear_sdof_response(period, zeta, acc)?;
    Ok(psa_from_displacement(&r.displacements[0], period))
}

fn psa_from_displacement(u: &[f64], period: f64) -> f64 {
    let w = TAU / period;
    w * w * u.iter().fold(0.0_f64, |m, x| m.max(x.abs())) / STANDARD_GRAVITY
}

/// Intensity measures and energy descriptors of one motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IMRecord {
    pub pga: f64,
    pub sa: f64,
    pub psa: f64,
    pub arias: f64,
    pub d595: f64,
    pub t_mid_emp: f64,
}

impl IMRecord {
    /// Spectral values at `period` with damping `zeta`. Energy descriptors
    /// of a silent record are reported as 0.
    pub fn compute(acc: &Accelerogram, period: f64, zeta: f64) -> Result<Self> {
        let r = linear_sdof_response(period, zeta, acc)?;
        let sa = r.absolute_accelerations[0]
            .iter()
            .fold(0.0_f64, |m, a| m.max(a.abs()));
        let cum = cumulative_arias(acc);
        let arias = *cum.last().expect("non-empty record");
        let (d595, t_mid_emp) = if arias > 0.0 {
            let t = |a| t_alpha_from_cumulative(&cum, acc.dt(), a);
            (t(0.95)? - t(0.05)?, t(0.45)?)
        } else {
            (0.0, 0.0)
        };
        Ok(Self {
            pga: pga(acc),
            sa,
            psa: psa_from_displacement(&r.displacements[0], period),
            arias,
            d595,
            t_mid_emp,
        })
    }

    pub fn get(&self, kind: ImKind) -> f64 {
        match kind {
            ImKind::Pga => self.pga,
            ImKind::Sa => self.sa,
            ImKind::Psa => self.psa,
        }
    }
}

/// Which intensity measure a fragility curve is conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ImKind {
    Pga,
    Sa,
    Psa,
}

impl ImKind {
    pub const ALL: [ImKind; 3] = [ImKind::Pga, ImKind::Sa, ImKind::Psa];

    pub fn name(self) -> &'static str {
        match self {
            ImKind::Pga => "pga",
            ImKind::Sa => "sa",
            ImKind::Psa => "psa",
        }
    }
}

impl fmt::Display for ImKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ImKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pga" => Ok(ImKind::Pga),
            "sa" => Ok(ImKind::Sa),
            "psa" => Ok(ImKind::Psa),
            other => Err(Error::Config(format!(
                "unknown intensity measure '{other}'"
            ))),
        }
    }
}

/// Intensity measures of a motion paired with the structural demand.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandRecord {
    pub motion_id: usize,
    pub im: IMRecord,
    /// Maximal inter-storey drift ratio.
    pub delta: f64,
}

impl DemandRecord {
    pub fn new(motion_id: usize, im: IMRecord, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::Parameter(format!(
                "drift must be finite and >= 0, got {delta}"
            )));
        }
        Ok(Self {
            motion_id,
            im,
            delta,
        })
    }

    pub fn point(&self, kind: ImKind) -> DemandPoint {
        DemandPoint {
            im: self.im.get(kind),
            delta: self.delta,
        }
    }
}

/// One `(IM, Δ)` observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandPoint {
    pub im: f64,
    pub delta: f64,
}

/// Projects demand records onto one intensity measure.
pub fn demand_points(records: &[DemandRecord], kind: ImKind) -> Vec<DemandPoint> {
    records.iter().map(|r| r.point(kind)).collect()
}
