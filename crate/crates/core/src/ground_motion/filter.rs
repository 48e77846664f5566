//! Time-varying filter of the white-noise excitation: the pseudo-acceleration
//! impulse response of a damped oscillator whose frequency drifts linearly
//! through the record.

use crate::error::{Error, Result};

use super::params::GroundMotionParams;

/// Floor applied to the drifting filter frequency, rad/s.
pub const OMEGA_MIN: f64 = 0.5;

/// Impulse response at lag `t_lag` of the oscillator `(omega_f, zeta_f)`.
pub fn filter_irf(t_lag: f64, omega_f: f64, zeta_f: f64) -> Result<f64> {
    if !(zeta_f > 0.0 && zeta_f < 1.0) {
        return Err(Error::Parameter(format!(
            "filter damping must lie in (0, 1), got {zeta_f}"
        )));
    }
    if !(omega_f > 0.0) {
        return Err(Error::Parameter(format!(
            "filter frequency must be positive, got {omega_f}"
        )));
    }
    if t_lag < 0.0 {
        return Ok(0.0);
    }
    let root = (1.0 - zeta_f * zeta_f).sqrt();
    Ok(omega_f / root * (-zeta_f * omega_f * t_lag).exp() * (omega_f * root * t_lag).sin())
}

/// Filter frequency at time `tau`, with a flag set when the floor was hit.
pub fn frequency_at_checked(tau: f64, params: &GroundMotionParams) -> (f64, bool) {
    let raw = params.omega_mid + params.omega_slope * (tau - params.t_mid);
    if raw < OMEGA_MIN {
        (OMEGA_MIN, true)
    } else {
        (raw, false)
    }
}

/// Filter frequency at time `tau`, rad/s.
pub fn frequency_at(tau: f64, params: &GroundMotionParams) -> f64 {
    frequency_at_checked(tau, params).0
}
