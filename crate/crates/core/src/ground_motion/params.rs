//! Ground-motion model parameters and their probability distributions.
//!
//! Each of the six parameters has a marginal family whose shape parameters
//! are obtained by matching a target mean and standard deviation. Draws go
//! through the quantile functions of the marginals, so an optional rank
//! correlation is imposed with a Gaussian copula at no extra cost.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numeric::{nelder_mead, SimplexOptions};
use crate::rng::RandomStream;
use crate::special::{gamma_p_inv, norm_cdf};

/// The six descriptors driving one synthetic motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundMotionParams {
    /// Arias intensity, s·g.
    pub arias_intensity: f64,
    /// 5–95 % significant duration `D5-95`, s.
    pub effective_duration: f64,
    /// Time at 45 % of the Arias intensity, s.
    pub t_mid: f64,
    /// Filter frequency at `t_mid`, rad/s.
    pub omega_mid: f64,
    /// Rate of change of the filter frequency, rad/s².
    pub omega_slope: f64,
    /// Filter damping (bandwidth) ratio.
    pub bandwidth_zeta: f64,
}

impl GroundMotionParams {
    pub fn validate(&self) -> Result<()> {
        let p = self;
        let bad = |what: String| Err(Error::Parameter(what));
        if !(p.arias_intensity > 0.0) || !p.arias_intensity.is_finite() {
            return bad(format!(
                "arias intensity must be > 0, got {}",
                p.arias_intensity
            ));
        }
        if !(5.0..=45.0).contains(&p.effective_duration) {
            return bad(format!(
                "D5-95 must lie in [5, 45] s, got {}",
                p.effective_duration
            ));
        }
        if !(0.5..=40.0).contains(&p.t_mid) {
            return bad(format!("t_mid must lie in [0.5, 40] s, got {}", p.t_mid));
        }
        if !(p.omega_mid > 0.0) || !p.omega_mid.is_finite() {
            return bad(format!("omega_mid must be > 0, got {}", p.omega_mid));
        }
        if !p.omega_slope.is_finite() {
            return bad(format!("omega_slope must be finite, got {}", p.omega_slope));
        }
        if !(p.bandwidth_zeta >= 0.02 && p.bandwidth_zeta < 1.0) {
            return bad(format!(
                "zeta_f must lie in [0.02, 1), got {}",
                p.bandwidth_zeta
            ));
        }
        Ok(())
    }
}

/// Distribution family of one marginal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Lognormal,
    Beta,
    Gamma,
    /// Asymmetric Laplace with its mode fixed at `mode`, truncated to the
    /// support.
    TwoSidedExponential {
        mode: f64,
    },
}

/// A marginal as specified: family, support and target moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalSpec {
    pub family: Family,
    pub lower: f64,
    pub upper: f64,
    pub mean: f64,
    pub std: f64,
}

impl MarginalSpec {
    pub fn new(family: Family, lower: f64, upper: f64, mean: f64, std: f64) -> Self {
        Self {
            family,
            lower,
            upper,
            mean,
            std,
        }
    }

    /// Moment-matched distribution; `name` labels configuration errors.
    pub fn fit(&self, name: &str) -> Result<Marginal> {
        let fail = |why: &str| Err(Error::Config(format!("{name}: {why}")));
        if !(self.std > 0.0) || !self.mean.is_finite() {
            return fail("need a finite mean and a positive standard deviation");
        }
        match self.family {
            Family::Lognormal => {
                if !(self.mean > 0.0) {
                    return fail("lognormal mean must be positive");
                }
                let s2 = (1.0 + (self.std / self.mean).powi(2)).ln();
                Ok(Marginal::Lognormal {
                    mu: self.mean.ln() - 0.5 * s2,
                    sigma: s2.sqrt(),
                })
            }
            Family::Gamma => {
                if !(self.mean > 0.0) {
                    return fail("gamma mean must be positive");
                }
                Ok(Marginal::Gamma {
                    shape: (self.mean / self.std).powi(2),
                    scale: self.std * self.std / self.mean,
                })
            }
            Family::Beta => match beta_shapes(self.lower, self.upper, self.mean, self.std) {
                Some((a, b)) => Ok(Marginal::ScaledBeta {
                    lower: self.lower,
                    upper: self.upper,
                    a,
                    b,
                }),
                None => fail("no Beta shape parameters reproduce this mean/std on the support"),
            },
            Family::TwoSidedExponential { mode } => {
                if !(self.lower < mode && mode < self.upper) {
                    return fail("mode must lie strictly inside the support");
                }
                fit_two_sided_exponential(self.lower, self.upper, mode, self.mean, self.std)
                    .ok_or(())
                    .or_else(|_| fail("two-sided exponential moment matching failed"))
            }
        }
    }
}

/// Closed-form Beta moment inversion on `[lower, upper]`.
pub fn beta_shapes(lower: f64, upper: f64, mean: f64, std: f64) -> Option<(f64, f64)> {
    if !(upper > lower) {
        return None;
    }
    let w = upper - lower;
    let m = (mean - lower) / w;
    let v = (std / w).powi(2);
    if !(m > 0.0 && m < 1.0) {
        return None;
    }
    let common = m * (1.0 - m) / v - 1.0;
    if !(common > 0.0) {
        return None;
    }
    Some((m * common, (1.0 - m) * common))
}

/// A fully parameterized marginal distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marginal {
    Lognormal {
        mu: f64,
        sigma: f64,
    },
    ScaledBeta {
        lower: f64,
        upper: f64,
        a: f64,
        b: f64,
    },
    Gamma {
        shape: f64,
        scale: f64,
    },
    TwoSidedExponential(TruncatedAsymLaplace),
}

impl Marginal {
    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::Lognormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            Marginal::ScaledBeta { lower, upper, a, b } => lower + (upper - lower) * a / (a + b),
            Marginal::Gamma { shape, scale } => shape * scale,
            Marginal::TwoSidedExponential(d) => d.moments().0,
        }
    }

    pub fn std(&self) -> f64 {
        match *self {
            Marginal::Lognormal { mu, sigma } => {
                ((sigma * sigma).exp_m1() * (2.0 * mu + sigma * sigma).exp()).sqrt()
            }
            Marginal::ScaledBeta { lower, upper, a, b } => {
                (upper - lower) * (a * b / ((a + b).powi(2) * (a + b + 1.0))).sqrt()
            }
            Marginal::Gamma { shape, scale } => shape.sqrt() * scale,
            Marginal::TwoSidedExponential(d) => d.moments().1,
        }
    }

    /// Value at standard-normal score `z`, i.e. `F⁻¹(Φ(z))`.
    pub fn from_normal_score(&self, z: f64) -> f64 {
        match *self {
            Marginal::Lognormal { mu, sigma } => (mu + sigma * z).exp(),
            _ => self.quantile(norm_cdf(z)),
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match *self {
            Marginal::Lognormal { mu, sigma } => (mu + sigma * crate::special::norm_ppf(u)).exp(),
            Marginal::ScaledBeta { lower, upper, a, b } => {
                lower + (upper - lower) * statrs::function::beta::inv_beta_reg(a, b, u)
            }
            Marginal::Gamma { shape, scale } => scale * gamma_p_inv(shape, u).unwrap_or(f64::NAN),
            Marginal::TwoSidedExponential(d) => d.quantile(u),
        }
    }
}

/// Density proportional to `exp(λL (x − m))` left of the mode `m` and
/// `exp(−λR (x − m))` right of it, restricted to `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedAsymLaplace {
    pub lower: f64,
    pub upper: f64,
    pub mode: f64,
    pub left_rate: f64,
    pub right_rate: f64,
}

/// `∫₀^b yⁿ e^(−λy) dy` for n = 0, 1, 2.
fn truncated_exp_moments(rate: f64, b: f64) -> [f64; 3] {
    let e = (-rate * b).exp();
    let lb = rate * b;
    [
        (1.0 - e) / rate,
        (1.0 - e * (1.0 + lb)) / (rate * rate),
        (2.0 - e * (2.0 + 2.0 * lb + lb * lb)) / (rate * rate * rate),
    ]
}

impl TruncatedAsymLaplace {
    fn masses(&self) -> (f64, f64) {
        let l = truncated_exp_moments(self.left_rate, self.mode - self.lower)[0];
        let r = truncated_exp_moments(self.right_rate, self.upper - self.mode)[0];
        (l, r)
    }

    /// `(mean, std)`.
    pub fn moments(&self) -> (f64, f64) {
        let l = truncated_exp_moments(self.left_rate, self.mode - self.lower);
        let r = truncated_exp_moments(self.right_rate, self.upper - self.mode);
        let z = l[0] + r[0];
        let shift = (r[1] - l[1]) / z;
        let second = (l[2] + r[2]) / z;
        (self.mode + shift, (second - shift * shift).max(0.0).sqrt())
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let (wl, wr) = self.masses();
        let z = wl + wr;
        let x = if u * z <= wl {
            let floor = (-self.left_rate * (self.mode - self.lower)).exp();
            self.mode + (u * z * self.left_rate + floor).ln() / self.left_rate
        } else {
            let arg = 1.0 - (u * z - wl) * self.right_rate;
            self.mode - arg.max(f64::MIN_POSITIVE).ln() / self.right_rate
        };
        x.clamp(self.lower, self.upper)
    }
}

fn fit_two_sided_exponential(
    lower: f64,
    upper: f64,
    mode: f64,
    mean: f64,
    std: f64,
) -> Option<Marginal> {
    // Untruncated solution: scales a (left), b (right) with b − a = mean − mode
    // and a² + b² = std² seed the search.
    let d = mean - mode;
    let disc = 2.0 * std * std - d * d;
    let (a0, b0) = if disc > 0.0 {
        let b = (d + disc.sqrt()) / 2.0;
        (b - d, b)
    } else {
        (std, std)
    };
    if !(a0 > 0.0 && b0 > 0.0) {
        return None;
    }
    let build = |p: &[f64]| TruncatedAsymLaplace {
        lower,
        upper,
        mode,
        left_rate: (-p[0]).exp(),
        right_rate: (-p[1]).exp(),
    };
    let objective = |p: &[f64]| {
        let (m, s) = build(p).moments();
        ((m - mean) / std).powi(2) + ((s - std) / std).powi(2)
    };
    let res = nelder_mead(
        objective,
        &[a0.ln(), b0.ln()],
        &[0.05, 0.05],
        SimplexOptions {
            ftol_abs: 1e-24,
            ftol_rel: 0.0,
            xtol: 1e-12,
            max_iter: 5_000,
        },
    );
    if res.fx > 1e-16 {
        return None;
    }
    Some(Marginal::TwoSidedExponential(build(&res.x)))
}

/// Marginal specifications of the six parameters plus an optional
/// correlation matrix of their normal scores. Parameter order everywhere is
/// `[I_a, D5-95, t_mid, ω_mid/2π, ω′/2π, ζ_f]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GMParamDistributions {
    pub arias_intensity: MarginalSpec,
    pub effective_duration: MarginalSpec,
    pub t_mid: MarginalSpec,
    /// `ω_mid / 2π`, Hz.
    pub f_mid: MarginalSpec,
    /// `ω′ / 2π`, Hz/s.
    pub f_slope: MarginalSpec,
    pub bandwidth_zeta: MarginalSpec,
    pub correlation: Option<[[f64; 6]; 6]>,
}

pub const PARAM_NAMES: [&str; 6] = [
    "arias_intensity",
    "d595",
    "t_mid",
    "f_mid",
    "f_slope",
    "zeta_f",
];

impl Default for GMParamDistributions {
    /// Strike-slip / reverse-fault statistics for moment magnitudes 6–8 and
    /// rupture distances 10–100 km, with independent marginals.
    fn default() -> Self {
        Self {
            arias_intensity: MarginalSpec::new(
                Family::Lognormal,
                0.0,
                f64::INFINITY,
                0.0468,
                0.164,
            ),
            effective_duration: MarginalSpec::new(Family::Beta, 5.0, 45.0, 17.3, 9.31),
            t_mid: MarginalSpec::new(Family::Beta, 0.5, 40.0, 12.4, 7.44),
            f_mid: MarginalSpec::new(Family::Gamma, 0.0, f64::INFINITY, 5.87, 3.11),
            f_slope: MarginalSpec::new(
                Family::TwoSidedExponential { mode: 0.0 },
                -2.0,
                0.5,
                -0.089,
                0.185,
            ),
            bandwidth_zeta: MarginalSpec::new(Family::Beta, 0.02, 1.0, 0.213, 0.143),
            correlation: None,
        }
    }
}

impl GMParamDistributions {
    fn specs(&self) -> [&MarginalSpec; 6] {
        [
            &self.arias_intensity,
            &self.effective_duration,
            &self.t_mid,
            &self.f_mid,
            &self.f_slope,
            &self.bandwidth_zeta,
        ]
    }

    /// Fits every marginal and factors the correlation matrix.
    pub fn compile(&self) -> Result<ParamSampler> {
        let mut marginals = Vec::with_capacity(6);
        for (spec, name) in self.specs().into_iter().zip(PARAM_NAMES) {
            marginals.push(spec.fit(name)?);
        }
        let factor = match &self.correlation {
            None => None,
            Some(c) => Some(correlation_factor(c)?),
        };
        Ok(ParamSampler {
            marginals: marginals.try_into().expect("six marginals"),
            factor,
        })
    }
}

fn correlation_factor(c: &[[f64; 6]; 6]) -> Result<[[f64; 6]; 6]> {
    for i in 0..6 {
        if (c[i][i] - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "correlation diagonal entry {i} is not 1"
            )));
        }
        for j in 0..6 {
            if (c[i][j] - c[j][i]).abs() > 1e-12 {
                return Err(Error::Config("correlation matrix is not symmetric".into()));
            }
            if c[i][j].abs() > 1.0 {
                return Err(Error::Config(
                    "correlation entries must lie in [-1, 1]".into(),
                ));
            }
        }
    }
    let m = DMatrix::from_fn(6, 6, |i, j| c[i][j]);
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.iter().any(|&l| l < -1e-10) {
        return Err(Error::Config(
            "correlation matrix is not positive semi-definite".into(),
        ));
    }
    let mut f = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            f[i][j] = eig.eigenvectors[(i, j)] * eig.eigenvalues[j].max(0.0).sqrt();
        }
    }
    Ok(f)
}

/// Ready-to-draw parameter distribution.
#[derive(Debug, Clone)]
pub struct ParamSampler {
    pub marginals: [Marginal; 6],
    factor: Option<[[f64; 6]; 6]>,
}

impl ParamSampler {
    /// Raw draw of the six parameters in natural units (Hz for the
    /// frequencies), before any feasibility screening.
    pub fn draw_raw(&self, stream: &RandomStream) -> [f64; 6] {
        let mut rng = stream.rng();
        let mut z = [0.0; 6];
        for zi in &mut z {
            *zi = StandardNormal.sample(&mut rng);
        }
        if let Some(f) = &self.factor {
            let mut y = [0.0; 6];
            for i in 0..6 {
                y[i] = (0..6).map(|j| f[i][j] * z[j]).sum();
            }
            z = y;
        }
        let mut out = [0.0; 6];
        for i in 0..6 {
            out[i] = self.marginals[i].from_normal_score(z[i]);
        }
        out
    }

    pub fn sample(&self, stream: &RandomStream) -> Result<GroundMotionParams> {
        let [ia, d595, tmid, f_mid, f_slope, zeta] = self.draw_raw(stream);
        let params = GroundMotionParams {
            arias_intensity: ia,
            effective_duration: d595,
            t_mid: tmid,
            omega_mid: TAU * f_mid,
            omega_slope: TAU * f_slope,
            bandwidth_zeta: zeta,
        };
        params
            .validate()
            .map_err(|e| Error::InfeasibleDescriptor(e.to_string()))?;
        Ok(params)
    }
}

/// One parameter set drawn from `dists` on `stream`.
pub fn sample_gm_params(
    dists: &GMParamDistributions,
    stream: &RandomStream,
) -> Result<GroundMotionParams> {
    dists.compile()?.sample(stream)
}
