//! Gamma-shaped modulating function `q(t) = α1 · t^(α2−1) · exp(−α3 t)` and
//! its inversion from the energy descriptors (Arias intensity, 5–95 %
//! significant duration, time to 45 % of the energy).
//!
//! Squaring `q` gives `α1² t^(k−1) e^(−θt)` with `k = 2α2 − 1` and
//! `θ = 2α3`, so the normalized cumulative energy at `t` is the regularized
//! lower incomplete gamma `P(k, θt)`. Percentile times are therefore
//! `x_p(k) / θ` with `x_p(k) = P⁻¹(k, p)`, and the ratio
//! `(x₉₅ − x₅) / x₄₅` depends on `k` only. Matching it to `D5-95 / t_mid` is
//! a one-dimensional root search; `θ` then follows from `t_mid` and `α1`
//! from the Arias intensity.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numeric::brent_root;
use crate::special::{gamma_p, gamma_p_inv, ln_gamma};

/// Fraction of the Arias intensity reached at `t_mid`.
pub const MID_ENERGY_FRACTION: f64 = 0.45;
/// Quiet tail appended after 99 % of the energy has arrived, seconds.
pub const TAIL_PADDING: f64 = 2.0;

/// Smallest shape exponent admitted: `α2 = 1` (`k = 1`) keeps `q(0)` finite.
const K_MIN: f64 = 1.0;
const K_MAX: f64 = 1e5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulatorCoeffs {
    /// Amplitude scale, g·s^(1−α2).
    pub alpha1: f64,
    /// Shape exponent, `>= 1`.
    pub alpha2: f64,
    /// Decay rate, 1/s.
    pub alpha3: f64,
    /// Length of the synthesized record, s.
    pub total_duration: f64,
}

impl ModulatorCoeffs {
    /// Validates the coefficients. `alpha1 = 0` is accepted and yields a
    /// silent record.
    pub fn new(alpha1: f64, alpha2: f64, alpha3: f64, total_duration: f64) -> Result<Self> {
        if !(alpha1 >= 0.0) || !alpha1.is_finite() {
            return Err(Error::Parameter(format!(
                "alpha1 must be >= 0, got {alpha1}"
            )));
        }
        if !(alpha2 >= 1.0) || !alpha2.is_finite() {
            return Err(Error::Parameter(format!(
                "alpha2 must be >= 1 so that q(0) stays finite, got {alpha2}"
            )));
        }
        if !(alpha3 > 0.0) || !alpha3.is_finite() {
            return Err(Error::Parameter(format!(
                "alpha3 must be > 0, got {alpha3}"
            )));
        }
        let coeffs = Self {
            alpha1,
            alpha2,
            alpha3,
            total_duration,
        };
        let t99 = coeffs.energy_time(0.99)?;
        if !(total_duration > t99) {
            return Err(Error::Parameter(format!(
                "total duration {total_duration} s must exceed the 99% energy time {t99} s"
            )));
        }
        Ok(coeffs)
    }

    /// Shape of the squared envelope, `k = 2α2 − 1`.
    pub fn energy_shape(&self) -> f64 {
        2.0 * self.alpha2 - 1.0
    }

    /// Rate of the squared envelope, `θ = 2α3`.
    pub fn energy_rate(&self) -> f64 {
        2.0 * self.alpha3
    }

    /// Fraction of the total envelope energy delivered by time `t`.
    pub fn cumulative_energy(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        gamma_p(self.energy_shape(), self.energy_rate() * t)
    }

    /// Time at which a fraction `p` of the envelope energy has arrived.
    pub fn energy_time(&self, p: f64) -> Result<f64> {
        Ok(gamma_p_inv(self.energy_shape(), p)? / self.energy_rate())
    }

    /// Arias intensity (s·g) carried by a unit-variance process under `q`:
    /// `(π/2) ∫₀^∞ q² dt`.
    pub fn arias_intensity(&self) -> f64 {
        let k = self.energy_shape();
        let theta = self.energy_rate();
        let log_integral = 2.0 * self.alpha1.ln() + ln_gamma(k) - k * theta.ln();
        0.5 * PI * log_integral.exp()
    }
}

/// Envelope value at `t >= 0`.
pub fn modulating_q(t: f64, c: &ModulatorCoeffs) -> f64 {
    if t <= 0.0 {
        return if c.alpha2 == 1.0 { c.alpha1 } else { 0.0 };
    }
    c.alpha1 * ((c.alpha2 - 1.0) * t.ln() - c.alpha3 * t).exp()
}

/// `(x₉₅(k) − x₅(k)) / x₄₅(k)`: significant duration over mid-energy time.
pub fn duration_ratio(k: f64) -> Result<f64> {
    let x5 = gamma_p_inv(k, 0.05)?;
    let x45 = gamma_p_inv(k, MID_ENERGY_FRACTION)?;
    let x95 = gamma_p_inv(k, 0.95)?;
    Ok((x95 - x5) / x45)
}

/// Largest `D5-95 / t_mid` ratio any admissible envelope can produce.
pub fn max_duration_ratio() -> f64 {
    duration_ratio(K_MIN).unwrap_or(f64::NAN)
}

/// Envelope coefficients reproducing `ia` (s·g), `d595` (s) and `tmid` (s).
pub fn solve_modulator(ia: f64, d595: f64, tmid: f64) -> Result<ModulatorCoeffs> {
    if !(ia > 0.0 && d595 > 0.0 && tmid > 0.0)
        || !(ia.is_finite() && d595.is_finite() && tmid.is_finite())
    {
        return Err(Error::Parameter(format!(
            "descriptors must be positive and finite: ia={ia}, d595={d595}, tmid={tmid}"
        )));
    }
    let target = d595 / tmid;
    let r_hi = duration_ratio(K_MIN)?;
    let r_lo = duration_ratio(K_MAX)?;
    if target > r_hi || target < r_lo {
        return Err(Error::InfeasibleDescriptor(format!(
            "D5-95/t_mid = {target:.4} outside achievable range [{r_lo:.4}, {r_hi:.4}]"
        )));
    }

    // The ratio falls monotonically with k; search in ln k for scale balance.
    let ln_k = brent_root(
        |s| Ok(duration_ratio(s.exp())? - target),
        K_MIN.ln(),
        K_MAX.ln(),
        1e-14,
        200,
    )?;
    let k = ln_k.exp();
    let residual = duration_ratio(k)? - target;
    if residual.abs() > 1e-9 * target {
        return Err(Error::Numerical(format!(
            "duration-ratio root search stopped with residual {residual:e} at k={k}"
        )));
    }

    let theta = gamma_p_inv(k, MID_ENERGY_FRACTION)? / tmid;
    // (π/2) α1² Γ(k) / θ^k = ia
    let ln_alpha1 = 0.5 * ((2.0 * ia / PI).ln() + k * theta.ln() - ln_gamma(k));
    let t99 = gamma_p_inv(k, 0.99)? / theta;
    ModulatorCoeffs::new(
        ln_alpha1.exp(),
        0.5 * (k + 1.0),
        0.5 * theta,
        t99 + TAIL_PADDING,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coeffs(a1: f64, a2: f64, a3: f64) -> ModulatorCoeffs {
        ModulatorCoeffs {
            alpha1: a1,
            alpha2: a2,
            alpha3: a3,
            total_duration: 100.0,
        }
    }

    #[test]
    fn q_at_origin() {
        assert_eq!(modulating_q(0.0, &coeffs(1.0, 2.0, 1.0)), 0.0);
        assert_eq!(modulating_q(0.0, &coeffs(1.0, 1.0, 1.0)), 1.0);
    }

    #[test]
    fn q_exponential_case() {
        let c = coeffs(1.0, 1.0, 1.0);
        for &t in &[0.1, 1.0, 3.7] {
            assert!((modulating_q(t, &c) - (-t).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn q_peak_by_grid_search() {
        let c = coeffs(0.3, 3.5, 0.4);
        let (mut best_t, mut best_q) = (0.0, 0.0);
        for i in 0..=200_000 {
            let t = i as f64 * 1e-4;
            let q = modulating_q(t, &c);
            if q > best_q {
                best_q = q;
                best_t = t;
            }
        }
        assert!((best_t - (c.alpha2 - 1.0) / c.alpha3).abs() < 2e-4);
    }

    #[test]
    fn ratio_decreases_in_k() {
        let mut prev = f64::INFINITY;
        for i in 0..60 {
            let k = (i as f64 * 0.2).exp();
            let r = duration_ratio(k).unwrap();
            assert!(r < prev, "not decreasing at k={k}");
            prev = r;
        }
    }

    #[test]
    fn infeasible_ratio_rejected() {
        // D5-95 / t_mid far above what k = 1 can give
        assert!(matches!(
            solve_modulator(0.05, 40.0, 1.0),
            Err(Error::InfeasibleDescriptor(_))
        ));
        assert!(matches!(
            solve_modulator(0.05, -1.0, 1.0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn arias_constraint_met() {
        let c = solve_modulator(0.05, 15.0, 8.0).unwrap();
        assert!((c.arias_intensity() - 0.05).abs() < 1e-12);
        assert!((c.cumulative_energy(8.0).unwrap() - 0.45).abs() < 1e-12);
        let d = c.energy_time(0.95).unwrap() - c.energy_time(0.05).unwrap();
        assert!((d - 15.0).abs() < 1e-9);
    }

    #[test]
    fn arias_scaling_only_touches_alpha1() {
        let a = solve_modulator(0.02, 12.0, 7.0).unwrap();
        let b = solve_modulator(0.08, 12.0, 7.0).unwrap();
        assert!((b.alpha1 / a.alpha1 - 2.0).abs() < 1e-12);
        assert!((b.alpha2 - a.alpha2).abs() < 1e-12);
        assert!((b.alpha3 - a.alpha3).abs() < 1e-12);
    }

    #[test]
    fn alpha2_below_one_rejected() {
        assert!(ModulatorCoeffs::new(1.0, 0.8, 1.0, 50.0).is_err());
    }
}
