//! Lumped-mass shear building with bilinear storey springs, integrated with
//! the average-acceleration Newmark scheme.
//!
//! Degrees of freedom are floor displacements relative to the ground. Storey
//! `i` connects floor `i − 1` (the ground for `i = 0`) to floor `i`, so the
//! stiffness, damping and effective matrices are all tridiagonal and every
//! linear solve is a Thomas sweep.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::accelerogram::{Accelerogram, STANDARD_GRAVITY};
use crate::error::{Error, Result};

const GAMMA: f64 = 0.5;
const BETA: f64 = 0.25;
/// Relative force-residual tolerance of the Newton iteration.
pub const NEWTON_TOL: f64 = 1e-8;
pub const NEWTON_MAX_ITER: usize = 50;
/// Internal steps per smallest natural period.
pub const STEPS_PER_PERIOD: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ShearFrameModel {
    masses: Vec<f64>,
    stiffnesses: Vec<f64>,
    heights: Vec<f64>,
    yield_drift_ratio: f64,
    hardening: f64,
    zeta: f64,
    a0: f64,
    a1: f64,
}

impl ShearFrameModel {
    /// Builds the model; Rayleigh coefficients follow from the first two
    /// modes (the single-mode limit for one storey).
    pub fn new(
        masses: Vec<f64>,
        stiffnesses: Vec<f64>,
        heights: Vec<f64>,
        yield_drift_ratio: f64,
        hardening: f64,
        zeta: f64,
    ) -> Result<Self> {
        let n = masses.len();
        if n == 0 || stiffnesses.len() != n || heights.len() != n {
            return Err(Error::Model(format!(
                "need equal, non-zero numbers of masses, stiffnesses and heights (got {}, {}, {})",
                n,
                stiffnesses.len(),
                heights.len()
            )));
        }
        let positive = |v: &[f64]| v.iter().all(|&x| x > 0.0 && x.is_finite());
        if !positive(&masses) || !positive(&stiffnesses) || !positive(&heights) {
            return Err(Error::Model(
                "masses, stiffnesses and heights must be positive".into(),
            ));
        }
        if !(hardening > 0.0 && hardening < 1.0) {
            return Err(Error::Model(format!(
                "hardening ratio must lie in (0, 1), got {hardening}"
            )));
        }
        if !(yield_drift_ratio > 0.0 && yield_drift_ratio < 0.05) {
            return Err(Error::Model(format!(
                "yield drift ratio must lie in (0, 0.05), got {yield_drift_ratio}"
            )));
        }
        if !(zeta > 0.0 && zeta < 0.2) {
            return Err(Error::Model(format!(
                "damping ratio must lie in (0, 0.2), got {zeta}"
            )));
        }
        let mut model = Self {
            masses,
            stiffnesses,
            heights,
            yield_drift_ratio,
            hardening,
            zeta,
            a0: 0.0,
            a1: 0.0,
        };
        let modes = modal_analysis(&model)?;
        let w1 = modes.omegas[0];
        let w2 = modes.omegas.get(1).copied().unwrap_or(w1);
        (model.a0, model.a1) = rayleigh_coeffs(w1, w2, zeta);
        Ok(model)
    }

    /// Uniform building whose fundamental period equals `t1`.
    pub fn uniform_calibrated(
        storeys: usize,
        mass: f64,
        height: f64,
        t1: f64,
        yield_drift_ratio: f64,
        hardening: f64,
        zeta: f64,
    ) -> Result<Self> {
        if storeys == 0 || !(t1 > 0.0) {
            return Err(Error::Model(
                "need at least one storey and a positive period".into(),
            ));
        }
        let unit = Self::new(
            vec![mass; storeys],
            vec![1.0; storeys],
            vec![height; storeys],
            yield_drift_ratio,
            hardening,
            zeta,
        )?;
        // periods scale as k^(-1/2)
        let t_unit = modal_analysis(&unit)?.periods[0];
        let k = (t_unit / t1).powi(2);
        Self::new(
            vec![mass; storeys],
            vec![k; storeys],
            vec![height; storeys],
            yield_drift_ratio,
            hardening,
            zeta,
        )
    }

    /// Three storeys of 3 m, T1 = 0.61 s, 2 % damping, yield at 0.7 % drift,
    /// 1 % hardening.
    pub fn reference_frame() -> Self {
        Self::uniform_calibrated(
            3,
            3.0 * 5.0 * 20e3 / STANDARD_GRAVITY,
            3.0,
            0.61,
            0.007,
            0.01,
            0.02,
        )
        .expect("reference frame is valid")
    }

    pub fn storeys(&self) -> usize {
        self.masses.len()
    }
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
    pub fn stiffnesses(&self) -> &[f64] {
        &self.stiffnesses
    }
    pub fn heights(&self) -> &[f64] {
        &self.heights
    }
    pub fn yield_drift_ratio(&self) -> f64 {
        self.yield_drift_ratio
    }
    pub fn hardening(&self) -> f64 {
        self.hardening
    }
    pub fn zeta(&self) -> f64 {
        self.zeta
    }
    /// Rayleigh coefficients `(a0, a1)` with `C = a0 M + a1 K`.
    pub fn rayleigh(&self) -> (f64, f64) {
        (self.a0, self.a1)
    }
    /// Yield displacement of storey `i`, m.
    pub fn yield_displacement(&self, i: usize) -> f64 {
        self.yield_drift_ratio * self.heights[i]
    }

    /// Initial stiffness matrix as dense rows.
    pub fn stiffness_matrix(&self) -> DMatrix<f64> {
        let n = self.storeys();
        let k = &self.stiffnesses;
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                k[i] + if i + 1 < n { k[i + 1] } else { 0.0 }
            } else if j == i + 1 {
                -k[j]
            } else if i == j + 1 {
                -k[i]
            } else {
                0.0
            }
        })
    }
}

/// Natural periods (descending) with mass-normalized mode shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalResult {
    pub periods: Vec<f64>,
    pub omegas: Vec<f64>,
    /// `shapes[m][i]`: component `i` of mode `m`.
    pub shapes: Vec<Vec<f64>>,
}

pub fn modal_analysis(model: &ShearFrameModel) -> Result<ModalResult> {
    let n = model.storeys();
    let k = model.stiffness_matrix();
    if k.clone().cholesky().is_none() {
        return Err(Error::Model(
            "stiffness matrix is not positive definite".into(),
        ));
    }
    let inv_sqrt_m: Vec<f64> = model.masses.iter().map(|m| 1.0 / m.sqrt()).collect();
    let a = DMatrix::from_fn(n, n, |i, j| inv_sqrt_m[i] * k[(i, j)] * inv_sqrt_m[j]);
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let mut periods = Vec::with_capacity(n);
    let mut omegas = Vec::with_capacity(n);
    let mut shapes = Vec::with_capacity(n);
    for &m in &order {
        let lambda = eig.eigenvalues[m];
        if !(lambda > 0.0) {
            return Err(Error::Model(format!("non-positive eigenvalue {lambda}")));
        }
        let w = lambda.sqrt();
        omegas.push(w);
        periods.push(std::f64::consts::TAU / w);
        let mut phi: Vec<f64> = (0..n)
            .map(|i| eig.eigenvectors[(i, m)] * inv_sqrt_m[i])
            .collect();
        // sign convention: roof component positive
        if phi[n - 1] < 0.0 {
            phi.iter_mut().for_each(|v| *v = -*v);
        }
        shapes.push(phi);
    }
    Ok(ModalResult {
        periods,
        omegas,
        shapes,
    })
}

/// Mass- and stiffness-proportional coefficients giving damping `zeta` at
/// both `omega1` and `omega2`.
pub fn rayleigh_coeffs(omega1: f64, omega2: f64, zeta: f64) -> (f64, f64) {
    let s = omega1 + omega2;
    (2.0 * zeta * omega1 * omega2 / s, 2.0 * zeta / s)
}

/// State of one bilinear storey spring: an elastic-perfectly-plastic
/// element of stiffness `(1 − b)k` in parallel with a linear one of
/// stiffness `bk`. Together they give elastic slope `k`, post-yield slope
/// `bk` and kinematic hardening.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HystereticState {
    /// Plastic slip of the elastic-perfectly-plastic element, m.
    pub plastic_displacement: f64,
    /// True when the last evaluation was on the post-yield branch.
    pub yielding: bool,
    /// Cumulative plastic work, J.
    pub plastic_work: f64,
}

/// Force and tangent of a bilinear spring at `drift`, starting from the
/// committed `state`. Returns `(force, tangent, trial state)`.
pub fn bilinear_restoring(
    state: &HystereticState,
    drift: f64,
    k: f64,
    u_y: f64,
    b: f64,
) -> (f64, f64, HystereticState) {
    let ke = (1.0 - b) * k;
    let fy = ke * u_y;
    let trial = ke * (drift - state.plastic_displacement);
    let mut next = *state;
    let (f_epp, tangent) = if trial.abs() > fy {
        let f = fy.copysign(trial);
        next.plastic_displacement = drift - f / ke;
        let slip = next.plastic_displacement - state.plastic_displacement;
        next.plastic_work = state.plastic_work + fy * slip.abs();
        next.yielding = true;
        (f, b * k)
    } else {
        next.yielding = false;
        (trial, k)
    };
    (f_epp + b * k * drift, tangent, next)
}

/// Relative floor displacements and velocities plus absolute floor
/// accelerations, sampled at the input time step.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseHistory {
    pub dt: f64,
    /// `displacements[i][t]`, m.
    pub displacements: Vec<Vec<f64>>,
    /// `velocities[i][t]`, m/s.
    pub velocities: Vec<Vec<f64>>,
    /// `absolute_accelerations[i][t]`, g.
    pub absolute_accelerations: Vec<Vec<f64>>,
    /// Cumulative plastic work per storey at the end of the record, J.
    pub plastic_work: Vec<f64>,
}

impl ResponseHistory {
    pub fn len(&self) -> usize {
        self.displacements.first().map_or(0, Vec::len)
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Integration controls. `substeps: None` applies the default rule
/// `dt_int = min(dt, T_min / 20)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewmarkOptions {
    pub substeps: Option<usize>,
    pub initial_displacement: Option<Vec<f64>>,
    pub initial_velocity: Option<Vec<f64>>,
}

/// Response of `model` to the ground acceleration `acc` (g) from rest.
pub fn integrate(model: &ShearFrameModel, acc: &Accelerogram) -> Result<ResponseHistory> {
    integrate_with(model, acc, &NewmarkOptions::default())
}

pub fn integrate_with(
    model: &ShearFrameModel,
    acc: &Accelerogram,
    opts: &NewmarkOptions,
) -> Result<ResponseHistory> {
    let t_min = *modal_analysis(model)?
        .periods
        .last()
        .expect("at least one storey");
    let springs: Vec<Spring> = (0..model.storeys())
        .map(|i| Spring::Bilinear {
            k: model.stiffnesses[i],
            u_y: model.yield_displacement(i),
            b: model.hardening,
        })
        .collect();
    let (a0, a1) = model.rayleigh();
    run(
        &model.masses,
        &model.stiffnesses,
        &springs,
        a0,
        a1,
        t_min,
        acc,
        opts,
    )
}

/// Unit-mass linear oscillator of period `period` and damping `zeta`.
pub fn linear_sdof_response(period: f64, zeta: f64, acc: &Accelerogram) -> Result<ResponseHistory> {
    linear_sdof_response_with(period, zeta, acc, &NewmarkOptions::default())
}

pub fn linear_sdof_response_with(
    period: f64,
    zeta: f64,
    acc: &Accelerogram,
    opts: &NewmarkOptions,
) -> Result<ResponseHistory> {
    if !(period > 0.0) || !period.is_finite() {
        return Err(Error::Parameter(format!(
            "period must be positive, got {period}"
        )));
    }
    if !(0.0..1.0).contains(&zeta) {
        return Err(Error::Parameter(format!(
            "damping ratio must lie in [0, 1), got {zeta}"
        )));
    }
    let w = std::f64::consts::TAU / period;
    run(
        &[1.0],
        &[w * w],
        &[Spring::Linear { k: w * w }],
        2.0 * zeta * w,
        0.0,
        period,
        acc,
        opts,
    )
}

/// Largest `|u_i − u_{i−1}| / H_i` over all times and storeys.
pub fn max_interstorey_drift(resp: &ResponseHistory, heights: &[f64]) -> f64 {
    let mut best = 0.0_f64;
    for (i, h) in heights.iter().enumerate().take(resp.displacements.len()) {
        let upper = &resp.displacements[i];
        for t in 0..upper.len() {
            let below = if i == 0 {
                0.0
            } else {
                resp.displacements[i - 1][t]
            };
            best = best.max((upper[t] - below).abs() / h);
        }
    }
    best
}

#[derive(Debug, Clone, Copy)]
enum Spring {
    Linear { k: f64 },
    Bilinear { k: f64, u_y: f64, b: f64 },
}

/// Storey forces and tangents for floor displacements `u`.
fn storey_response(
    springs: &[Spring],
    states: &[HystereticState],
    u: &[f64],
    forces: &mut [f64],
    tangents: &mut [f64],
    trial: &mut [HystereticState],
) {
    for (i, spring) in springs.iter().enumerate() {
        let drift = u[i] - if i == 0 { 0.0 } else { u[i - 1] };
        match *spring {
            Spring::Linear { k } => {
                forces[i] = k * drift;
                tangents[i] = k;
                trial[i] = states[i];
            }
            Spring::Bilinear { k, u_y, b } => {
                let (f, kt, s) = bilinear_restoring(&states[i], drift, k, u_y, b);
                forces[i] = f;
                tangents[i] = kt;
                trial[i] = s;
            }
        }
    }
}

/// `y = T x` for the tridiagonal matrix assembled from storey values `s`.
fn tri_mul(s: &[f64], x: &[f64], y: &mut [f64]) {
    let n = s.len();
    for i in 0..n {
        let below = if i == 0 { 0.0 } else { x[i - 1] };
        let mut v = s[i] * (x[i] - below);
        if i + 1 < n {
            v -= s[i + 1] * (x[i + 1] - x[i]);
        }
        y[i] = v;
    }
}

/// Floor forces from storey forces.
fn assemble_forces(storey: &[f64], out: &mut [f64]) {
    let n = storey.len();
    for i in 0..n {
        out[i] = storey[i] - if i + 1 < n { storey[i + 1] } else { 0.0 };
    }
}

/// Solves `(diag + T(s)) x = r` with the Thomas algorithm.
fn tri_solve(diag: &[f64], s: &[f64], r: &[f64], x: &mut [f64], work: &mut [f64]) -> bool {
    let n = s.len();
    // main diagonal d_i = diag_i + s_i + s_{i+1}; off-diagonal (i, i+1) = −s_{i+1}
    let main = |i: usize| diag[i] + s[i] + if i + 1 < n { s[i + 1] } else { 0.0 };
    let mut denom = main(0);
    if denom == 0.0 {
        return false;
    }
    x[0] = r[0] / denom;
    for i in 1..n {
        let off = -s[i];
        work[i] = off / denom;
        denom = main(i) - off * work[i];
        if denom == 0.0 {
            return false;
        }
        x[i] = (r[i] - off * x[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        let w = work[i + 1];
        x[i] -= w * x[i + 1];
    }
    true
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[allow(clippy::too_many_arguments)]
fn run(
    masses: &[f64],
    k0: &[f64],
    springs: &[Spring],
    a0: f64,
    a1: f64,
    t_min: f64,
    acc: &Accelerogram,
    opts: &NewmarkOptions,
) -> Result<ResponseHistory> {
    let n = masses.len();
    let dt_in = acc.dt();
    let sub = match opts.substeps {
        Some(s) if s >= 1 => s,
        Some(_) => return Err(Error::Parameter("substeps must be at least 1".into())),
        None => (dt_in / (t_min / STEPS_PER_PERIOD) - 1e-9).ceil().max(1.0) as usize,
    };
    let h = dt_in / sub as f64;
    let ag: Vec<f64> = acc.samples().iter().map(|a| a * STANDARD_GRAVITY).collect();
    let steps = ag.len();

    let damping: Vec<f64> = k0.iter().map(|k| a1 * k).collect();
    let c_diag: Vec<f64> = masses.iter().map(|m| a0 * m).collect();

    let mut u = opts
        .initial_displacement
        .clone()
        .unwrap_or_else(|| vec![0.0; n]);
    let mut v = opts
        .initial_velocity
        .clone()
        .unwrap_or_else(|| vec![0.0; n]);
    if u.len() != n || v.len() != n {
        return Err(Error::Parameter(
            "initial conditions must have one entry per storey".into(),
        ));
    }

    let mut states = vec![HystereticState::default(); n];
    let mut trial = states.clone();
    let mut fs = vec![0.0; n];
    let mut kt = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut cv = vec![0.0; n];

    // initial acceleration from equilibrium: M a = −M a_g − C v − f(u)
    storey_response(springs, &states, &u, &mut fs, &mut kt, &mut trial);
    states.copy_from_slice(&trial);
    for s in &mut states {
        s.plastic_work = 0.0;
    }
    assemble_forces(&fs, &mut f);
    tri_mul(&damping, &v, &mut cv);
    let mut a: Vec<f64> = (0..n)
        .map(|i| (-masses[i] * ag[0] - c_diag[i] * v[i] - cv[i] - f[i]) / masses[i])
        .collect();

    let mut hist_u = vec![Vec::with_capacity(steps); n];
    let mut hist_v = vec![Vec::with_capacity(steps); n];
    let mut hist_a = vec![Vec::with_capacity(steps); n];
    let record = |u: &[f64],
                  v: &[f64],
                  a: &[f64],
                  g: f64,
                  hu: &mut [Vec<f64>],
                  hv: &mut [Vec<f64>],
                  ha: &mut [Vec<f64>]| {
        for i in 0..n {
            hu[i].push(u[i]);
            hv[i].push(v[i]);
            ha[i].push((a[i] + g) / STANDARD_GRAVITY);
        }
    };
    record(&u, &v, &a, ag[0], &mut hist_u, &mut hist_v, &mut hist_a);

    let c_mass = 1.0 / (BETA * h * h);
    let c_damp = GAMMA / (BETA * h);
    let eff_diag: Vec<f64> = (0..n)
        .map(|i| c_mass * masses[i] + c_damp * c_diag[i])
        .collect();
    let mut eff_s = vec![0.0; n];
    let mut u_new = u.clone();
    let mut v_new = v.clone();
    let mut a_new = a.clone();
    let mut r = vec![0.0; n];
    let mut du = vec![0.0; n];
    let mut work = vec![0.0; n];

    for step in 1..steps {
        for j in 1..=sub {
            let frac = j as f64 / sub as f64;
            let g = ag[step - 1] + (ag[step] - ag[step - 1]) * frac;
            let global = (step - 1) * sub + j;
            u_new.copy_from_slice(&u);
            let mut converged = false;
            for _ in 0..NEWTON_MAX_ITER {
                for i in 0..n {
                    a_new[i] =
                        c_mass * (u_new[i] - u[i]) - v[i] / (BETA * h) - (0.5 / BETA - 1.0) * a[i];
                    v_new[i] = v[i] + h * ((1.0 - GAMMA) * a[i] + GAMMA * a_new[i]);
                }
                storey_response(springs, &states, &u_new, &mut fs, &mut kt, &mut trial);
                assemble_forces(&fs, &mut f);
                tri_mul(&damping, &v_new, &mut cv);
                let mut scale = 0.0_f64;
                for i in 0..n {
                    let p = -masses[i] * g;
                    let inertia = masses[i] * a_new[i];
                    let damp = c_diag[i] * v_new[i] + cv[i];
                    r[i] = p - inertia - damp - f[i];
                    scale = scale
                        .max(p.abs())
                        .max(inertia.abs())
                        .max(f[i].abs())
                        .max(damp.abs());
                }
                if norm(&r) <= NEWTON_TOL * scale || scale == 0.0 {
                    converged = true;
                    break;
                }
                for i in 0..n {
                    eff_s[i] = kt[i] + c_damp * damping[i];
                }
                if !tri_solve(&eff_diag, &eff_s, &r, &mut du, &mut work) {
                    return Err(Error::Integration {
                        step: global,
                        reason: "singular effective stiffness".into(),
                    });
                }
                for i in 0..n {
                    u_new[i] += du[i];
                }
            }
            if !converged {
                return Err(Error::Integration {
                    step: global,
                    reason: format!(
                        "Newton iteration did not converge in {NEWTON_MAX_ITER} iterations"
                    ),
                });
            }
            if u_new.iter().chain(&v_new).any(|x| !x.is_finite()) {
                return Err(Error::Integration {
                    step: global,
                    reason: "non-finite response".into(),
                });
            }
            states.copy_from_slice(&trial);
            u.copy_from_slice(&u_new);
            v.copy_from_slice(&v_new);
            a.copy_from_slice(&a_new);
        }
        record(&u, &v, &a, ag[step], &mut hist_u, &mut hist_v, &mut hist_a);
    }

    Ok(ResponseHistory {
        dt: dt_in,
        displacements: hist_u,
        velocities: hist_v,
        absolute_accelerations: hist_a,
        plastic_work: states.iter().map(|s| s.plastic_work).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rayleigh_limits() {
        let (a0, a1) = rayleigh_coeffs(3.0, 3.0, 0.05);
        assert!((a0 - 0.15).abs() < 1e-15 && (a1 - 0.05 / 3.0).abs() < 1e-15);
        assert_eq!(rayleigh_coeffs(1.0, 2.0, 0.0), (0.0, 0.0));
    }

    #[test]
    fn thomas_matches_dense() {
        let s = [3.0, 1.5, 2.0, 0.7];
        let d = [0.4, 0.1, 0.2, 0.3];
        let r = [1.0, -2.0, 0.5, 3.0];
        let mut x = [0.0; 4];
        let mut w = [0.0; 4];
        assert!(tri_solve(&d, &s, &r, &mut x, &mut w));
        let mut y = [0.0; 4];
        tri_mul(&s, &x, &mut y);
        for i in 0..4 {
            assert!((y[i] + d[i] * x[i] - r[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn monotonic_push_follows_backbone() {
        let (k, uy, b) = (1000.0, 0.01, 0.05);
        let mut st = HystereticState::default();
        for i in 0..=200 {
            let d = 2.0 * uy * i as f64 / 200.0;
            let (f, _, next) = bilinear_restoring(&st, d, k, uy, b);
            let exact = if d <= uy {
                k * d
            } else {
                k * uy + b * k * (d - uy)
            };
            assert!((f - exact).abs() < 1e-12 * k * uy, "d={d}");
            st = next;
        }
    }

    #[test]
    fn zero_motion_zero_response() {
        let m = ShearFrameModel::reference_frame();
        let acc = Accelerogram::new(0.01, vec![0.0; 200], "").unwrap();
        let r = integrate(&m, &acc).unwrap();
        assert!(r.displacements.iter().flatten().all(|&x| x == 0.0));
        assert_eq!(r.len(), 200);
    }
}
