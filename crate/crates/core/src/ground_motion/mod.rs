//! Stochastic ground-motion model: parameter sampling, envelope inversion,
//! time-varying filter and synthesis.

pub mod filter;
pub mod modulator;
pub mod params;
pub mod synth;

pub use filter::{filter_irf, frequency_at, frequency_at_checked, OMEGA_MIN};
pub use modulator::{modulating_q, solve_modulator, ModulatorCoeffs};
pub use params::{
    beta_shapes, sample_gm_params, Family, GMParamDistributions, GroundMotionParams, Marginal,
    MarginalSpec, ParamSampler, PARAM_NAMES,
};
pub use synth::{synthesize, synthesize_with, SyntheticMotion, DEFAULT_DT, MAX_DT};

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Sub-stream domain of parameter draw attempt `a` is `PARAM_DOMAIN + a`.
pub const PARAM_DOMAIN: u64 = 0x7061_7261_6d00;

/// A parameter set together with its solved envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibleDraw {
    pub params: GroundMotionParams,
    pub modulator: ModulatorCoeffs,
    /// Draws rejected before this one.
    pub rejected: u32,
}

/// Draws parameters until their energy descriptors admit an envelope, at
/// most `max_attempts` times. Attempt `a` uses its own sub-stream, so the
/// result depends only on `stream`.
pub fn draw_feasible(
    sampler: &ParamSampler,
    stream: &RandomStream,
    max_attempts: u32,
) -> Result<FeasibleDraw> {
    let mut last = None;
    for a in 0..max_attempts {
        let sub = stream.derive(PARAM_DOMAIN + a as u64);
        let outcome = sampler.sample(&sub).and_then(|p| {
            solve_modulator(p.arias_intensity, p.effective_duration, p.t_mid).map(|c| (p, c))
        });
        match outcome {
            Ok((params, modulator)) => {
                return Ok(FeasibleDraw {
                    params,
                    modulator,
                    rejected: a,
                })
            }
            Err(e @ (Error::InfeasibleDescriptor(_) | Error::Parameter(_))) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(Error::InfeasibleDescriptor(format!(
        "no feasible parameter set in {max_attempts} attempts for stream {}: {}",
        stream.index,
        last.map(|e| e.to_string()).unwrap_or_default()
    )))
}
