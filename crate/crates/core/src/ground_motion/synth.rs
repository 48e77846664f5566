//! Discretized modulated filtered white noise.
//!
//! The record is `â(t_k) = q(t_k) Σ_{i≤k} s_i(t_k) U_i` with one standard
//! normal impulse `U_i` per time step. The weights are the filter impulse
//! responses `h[t_k − t_i, ω(t_i), ζ_f]` divided by the root of their sum of
//! squares over all impulses up to `t_k`, so the unmodulated sum has unit
//! variance at every output time.
//!
//! Each impulse response is a damped sinusoid, `c_i Im(z_i^(k−i))` with
//! `z_i = exp((−ζω_i + iω_d,i) dt)`, so the double sum is evaluated by
//! advancing one complex phasor per live impulse instead of calling
//! `exp`/`sin` for every pair. Impulses whose phasor has decayed below
//! `1e-17` are dropped.

use rand_distr::{Distribution, StandardNormal};

use crate::accelerogram::Accelerogram;
use crate::error::{Error, Result};
use crate::rng::RandomStream;

use super::filter::{filter_irf, frequency_at_checked};
use super::modulator::{modulating_q, solve_modulator, ModulatorCoeffs};
use super::params::GroundMotionParams;

/// Default output step, s.
pub const DEFAULT_DT: f64 = 0.01;
/// Coarsest admissible output step, s.
pub const MAX_DT: f64 = 0.02;

const DECAY_CUTOFF: f64 = 1e-17;
/// Sub-stream carrying the white-noise impulses of a motion.
pub const NOISE_DOMAIN: u64 = 0x6e_6f69_7365;

/// A synthesized record with the envelope that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMotion {
    pub accelerogram: Accelerogram,
    pub modulator: ModulatorCoeffs,
    /// True when the frequency floor was active for some impulse.
    pub frequency_clipped: bool,
}

/// Number of samples and the time grid used for an envelope of total
/// duration `total` at step `dt`: `n = ⌈T/dt⌉` samples at `k·dt`.
pub fn sample_count(total: f64, dt: f64) -> usize {
    ((total / dt) - 1e-9).ceil().max(1.0) as usize
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::Parameter(format!(
            "time step must lie in (0, {MAX_DT}] s, got {dt}"
        )));
    }
    Ok(())
}

/// Synthesizes one accelerogram (g) for `params`; impulses come from the
/// noise sub-stream of `stream`.
pub fn synthesize(
    params: &GroundMotionParams,
    stream: &RandomStream,
    dt: f64,
) -> Result<SyntheticMotion> {
    check_dt(dt)?;
    params.validate()?;
    let coeffs = solve_modulator(
        params.arias_intensity,
        params.effective_duration,
        params.t_mid,
    )?;
    synthesize_with(params, &coeffs, stream, dt)
}

/// As [`synthesize`] with an explicit envelope.
pub fn synthesize_with(
    params: &GroundMotionParams,
    coeffs: &ModulatorCoeffs,
    stream: &RandomStream,
    dt: f64,
) -> Result<SyntheticMotion> {
    check_dt(dt)?;
    let n = sample_count(coeffs.total_duration, dt);
    let noise = draw_impulses(stream, n);
    let (mut samples, clipped) = unit_process(params, &noise, dt)?;
    for (k, a) in samples.iter_mut().enumerate() {
        *a *= modulating_q(k as f64 * dt, coeffs);
    }
    let label = format!("seed={} index={}", stream.seed, stream.index);
    Ok(SyntheticMotion {
        accelerogram: Accelerogram::new(dt, samples, label)?,
        modulator: *coeffs,
        frequency_clipped: clipped,
    })
}

/// The `n` standard-normal impulses of a realization.
pub fn draw_impulses(stream: &RandomStream, n: usize) -> Vec<f64> {
    let mut rng = stream.derive(NOISE_DOMAIN).rng();
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Unmodulated, unit-variance filtered process `Σ_{i≤k} s_i(t_k) U_i` for
/// impulses `noise` at `t_i = i·dt`. Returns the process and whether the
/// frequency floor was hit.
pub fn unit_process(
    params: &GroundMotionParams,
    noise: &[f64],
    dt: f64,
) -> Result<(Vec<f64>, bool)> {
    let zeta = params.bandwidth_zeta;
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::Parameter(format!(
            "filter damping must lie in (0, 1), got {zeta}"
        )));
    }
    let root = (1.0 - zeta * zeta).sqrt();
    let n = noise.len();
    let mut clipped = false;

    // Live impulses: amplitude c_i·U_i, c_i, phasor (re, im), step (re, im).
    struct Live {
        c: f64,
        u: f64,
        re: f64,
        im: f64,
        step_re: f64,
        step_im: f64,
    }
    let mut live: Vec<Live> = Vec::with_capacity(n);
    let mut out = Vec::with_capacity(n);

    for (k, &u) in noise.iter().enumerate() {
        let (w, c_flag) = frequency_at_checked(k as f64 * dt, params);
        clipped |= c_flag;
        let decay = (-zeta * w * dt).exp();
        let (s, c) = (w * root * dt).sin_cos();
        live.push(Live {
            c: w / root,
            u,
            re: 1.0,
            im: 0.0,
            step_re: decay * c,
            step_im: decay * s,
        });

        let mut num = 0.0;
        let mut den = 0.0;
        for imp in &live {
            let h = imp.c * imp.im;
            num += h * imp.u;
            den += h * h;
        }
        out.push(if den > 0.0 { num / den.sqrt() } else { 0.0 });

        for imp in &mut live {
            let re = imp.re * imp.step_re - imp.im * imp.step_im;
            let im = imp.re * imp.step_im + imp.im * imp.step_re;
            imp.re = re;
            imp.im = im;
        }
        live.retain(|imp| imp.re.abs() + imp.im.abs() > DECAY_CUTOFF);
    }
    Ok((out, clipped))
}

/// Normalized weights `s_i(t_k)` for `i = 0..=k`, evaluated directly from
/// the impulse response. All zero when the denominator vanishes.
pub fn impulse_weights(params: &GroundMotionParams, k: usize, dt: f64) -> Result<Vec<f64>> {
    let t_k = k as f64 * dt;
    let mut h = Vec::with_capacity(k + 1);
    for i in 0..=k {
        let t_i = i as f64 * dt;
        let w = frequency_at_checked(t_i, params).0;
        h.push(filter_irf(t_k - t_i, w, params.bandwidth_zeta)?);
    }
    let den: f64 = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den > 0.0 {
        h.iter_mut().for_each(|v| *v /= den);
    } else {
        h.iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(h)
}
