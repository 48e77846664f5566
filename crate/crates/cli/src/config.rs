//! Run configuration, read from a TOML file.
//!
//! Every key is optional; missing keys take the documented defaults. A
//! minimal file might read
//!
//! ```toml
//! seed = 7
//! motions = 2000
//!
//! [analysis]
//! im_kinds = ["pga", "sa"]
//! thresholds = [0.007, 0.014]
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use seisfrag::accelerogram::STANDARD_GRAVITY;
use seisfrag::bootstrap::{Estimator, KdeBandwidth};
use seisfrag::ground_motion::synth::MAX_DT;
use seisfrag::ground_motion::{Family, GMParamDistributions, GroundMotionParams, MarginalSpec};
use seisfrag::intensity::ImKind;
use seisfrag::nonparametric::BinSpec;
use seisfrag::structure::ShearFrameModel;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub motions: usize,
    /// Time step of synthetic motions (s).
    pub dt: f64,
    pub out: Option<PathBuf>,
    pub ground_motion: GroundMotionConfig,
    pub structure: StructureConfig,
    pub analysis: AnalysisConfig,
    pub fit: FitConfig,
    pub bootstrap: BootstrapConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            motions: 1000,
            dt: 0.01,
            out: None,
            ground_motion: GroundMotionConfig::default(),
            structure: StructureConfig::default(),
            analysis: AnalysisConfig::default(),
            fit: FitConfig::default(),
            bootstrap: BootstrapConfig::default(),
        }
    }
}

/// Ground-motion descriptors: either one fixed set, or sampled from the
/// default marginals with optional per-parameter overrides.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundMotionConfig {
    pub fixed: Option<FixedParams>,
    pub arias_intensity: Option<MarginalConfig>,
    pub d595: Option<MarginalConfig>,
    pub t_mid: Option<MarginalConfig>,
    pub f_mid: Option<MarginalConfig>,
    pub f_slope: Option<MarginalConfig>,
    pub zeta_f: Option<MarginalConfig>,
    /// 6×6 Gaussian-copula correlation in the order above.
    pub correlation: Option<Vec<Vec<f64>>>,
    /// Draws per motion before an infeasible descriptor set is an error.
    pub max_attempts: Option<u32>,
    /// Write accelerograms under `motions/` during `pipeline`.
    pub write_motions: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedParams {
    /// s·g
    pub arias_intensity: f64,
    /// s
    pub d595: f64,
    /// s
    pub t_mid: f64,
    /// Hz
    pub f_mid: f64,
    /// Hz/s
    pub f_slope: f64,
    pub zeta_f: f64,
}

impl FixedParams {
    pub fn to_params(&self) -> GroundMotionParams {
        GroundMotionParams {
            arias_intensity: self.arias_intensity,
            effective_duration: self.d595,
            t_mid: self.t_mid,
            omega_mid: std::f64::consts::TAU * self.f_mid,
            omega_slope: std::f64::consts::TAU * self.f_slope,
            bandwidth_zeta: self.zeta_f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalConfig {
    /// `lognormal`, `beta`, `gamma` or `two_sided_exponential`.
    pub family: FamilyName,
    pub mean: f64,
    pub std: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// Mode of the two-sided exponential.
    pub mode: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Lognormal,
    Beta,
    Gamma,
    TwoSidedExponential,
}

impl MarginalConfig {
    fn to_spec(self) -> MarginalSpec {
        let family = match self.family {
            FamilyName::Lognormal => Family::Lognormal,
            FamilyName::Beta => Family::Beta,
            FamilyName::Gamma => Family::Gamma,
            FamilyName::TwoSidedExponential => Family::TwoSidedExponential {
                mode: self.mode.unwrap_or(0.0),
            },
        };
        MarginalSpec::new(
            family,
            self.lower.unwrap_or(0.0),
            self.upper.unwrap_or(f64::INFINITY),
            self.mean,
            self.std,
        )
    }
}

impl GroundMotionConfig {
    pub fn distributions(&self) -> CliResult<GMParamDistributions> {
        let mut d = GMParamDistributions::default();
        let slots: [(&Option<MarginalConfig>, &mut MarginalSpec); 6] = [
            (&self.arias_intensity, &mut d.arias_intensity),
            (&self.d595, &mut d.effective_duration),
            (&self.t_mid, &mut d.t_mid),
            (&self.f_mid, &mut d.f_mid),
            (&self.f_slope, &mut d.f_slope),
            (&self.zeta_f, &mut d.bandwidth_zeta),
        ];
        for (over, spec) in slots {
            if let Some(m) = over {
                *spec = m.to_spec();
            }
        }
        if let Some(rows) = &self.correlation {
            if rows.len() != 6 || rows.iter().any(|r| r.len() != 6) {
                return Err(CliError::Config(
                    "ground_motion.correlation must be a 6x6 matrix".into(),
                ));
            }
            let mut c = [[0.0; 6]; 6];
            for (i, r) in rows.iter().enumerate() {
                c[i].copy_from_slice(r);
            }
            d.correlation = Some(c);
        }
        Ok(d)
    }

    pub fn max_attempts(&self) -> u32 {
        self.max_attempts.unwrap_or(10)
    }

    pub fn write_motions(&self) -> bool {
        self.write_motions.unwrap_or(true)
    }
}

/// Uniform shear building calibrated to a fundamental period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StructureConfig {
    pub storeys: usize,
    /// kg per floor
    pub storey_mass: f64,
    /// m
    pub storey_height: f64,
    /// s
    pub period: f64,
    pub yield_drift: f64,
    pub hardening: f64,
    pub damping: f64,
}

impl Default for StructureConfig {
    fn default() -> Self {
        Self {
            storeys: 3,
            storey_mass: 3.0 * 5.0 * 20e3 / STANDARD_GRAVITY,
            storey_height: 3.0,
            period: 0.61,
            yield_drift: 0.007,
            hardening: 0.01,
            damping: 0.02,
        }
    }
}

impl StructureConfig {
    pub fn model(&self) -> CliResult<ShearFrameModel> {
        Ok(ShearFrameModel::uniform_calibrated(
            self.storeys,
            self.storey_mass,
            self.storey_height,
            self.period,
            self.yield_drift,
            self.hardening,
            self.damping,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub im_kinds: Vec<String>,
    /// Drift thresholds δ_o, strictly positive and increasing.
    pub thresholds: Vec<f64>,
    /// Damping of the spectral oscillator.
    pub sa_damping: f64,
    pub grid_points: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            im_kinds: vec!["pga".into(), "sa".into()],
            thresholds: vec![0.007, 0.014],
            sa_damping: 0.05,
            grid_points: 60,
        }
    }
}

impl AnalysisConfig {
    pub fn kinds(&self) -> CliResult<Vec<ImKind>> {
        self.im_kinds
            .iter()
            .map(|s| ImKind::from_str(s).map_err(CliError::from))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthMode {
    NormalReference,
    Lscv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Any of `mle`, `lr`, `segmented`, `bmcs`, `kde`.
    pub methods: Vec<String>,
    pub bin_half_width: f64,
    pub bin_min_support: usize,
    pub bandwidth: BandwidthMode,
    pub log_scale: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            methods: ["mle", "lr", "segmented", "bmcs", "kde"]
                .map(String::from)
                .to_vec(),
            bin_half_width: 0.25,
            bin_min_support: 30,
            bandwidth: BandwidthMode::NormalReference,
            log_scale: true,
        }
    }
}

/// Estimator names understood by `fit` and `bootstrap`.
pub const METHODS: [&str; 5] = ["mle", "lr", "segmented", "bmcs", "kde"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub level: f64,
    pub methods: Vec<String>,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 100,
            level: 0.95,
            methods: vec!["bmcs".into(), "kde".into()],
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.motions == 0 {
            return bad("motions must be at least 1".into());
        }
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return bad(format!("dt must lie in (0, {MAX_DT}], got {}", self.dt));
        }
        let t = &self.analysis.thresholds;
        if t.is_empty()
            || t.iter().any(|&x| !(x > 0.0 && x.is_finite()))
            || t.windows(2).any(|w| w[1] <= w[0])
        {
            return bad("thresholds must be non-empty, positive and strictly increasing".into());
        }
        if self.analysis.kinds()?.is_empty() {
            return bad("at least one IM kind is required".into());
        }
        if self.analysis.grid_points < 2 {
            return bad("grid_points must be at least 2".into());
        }
        if !(self.analysis.sa_damping > 0.0 && self.analysis.sa_damping < 1.0) {
            return bad(format!(
                "sa_damping must lie in (0, 1), got {}",
                self.analysis.sa_damping
            ));
        }
        for m in self.fit.methods.iter().chain(&self.bootstrap.methods) {
            if !METHODS.contains(&m.as_str()) {
                return bad(format!(
                    "unknown estimator '{m}' (expected one of {})",
                    METHODS.join(", ")
                ));
            }
        }
        BinSpec::new(self.fit.bin_half_width, self.fit.bin_min_support)?;
        if self.bootstrap.replicates < 2 {
            return bad("bootstrap.replicates must be at least 2".into());
        }
        if !(self.bootstrap.level > 0.0 && self.bootstrap.level < 1.0) {
            return bad("bootstrap.level must lie in (0, 1)".into());
        }
        if let Some(f) = &self.ground_motion.fixed {
            f.to_params().validate()?;
        } else {
            self.ground_motion.distributions()?.compile()?;
        }
        self.structure.model()?;
        Ok(())
    }

    pub fn bin_spec(&self) -> BinSpec {
        BinSpec {
            h_rel: self.fit.bin_half_width,
            n_min: self.fit.bin_min_support,
        }
    }

    /// Estimator for a method name; kernel bandwidths are chosen later
    /// from the data.
    pub fn estimator(&self, name: &str) -> CliResult<Estimator> {
        Ok(match name {
            "mle" => Estimator::Mle,
            "lr" => Estimator::Lr,
            "segmented" => Estimator::Segmented,
            "bmcs" => Estimator::Bmcs(self.bin_spec()),
            "kde" => Estimator::Kde {
                bandwidth: KdeBandwidth::NormalReference,
                log_scale: self.fit.log_scale,
            },
            other => return Err(CliError::Config(format!("unknown estimator '{other}'"))),
        })
    }
}
