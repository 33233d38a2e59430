//! Time integration of the semi-discrete sheet dynamics.
//!
//! The state advances by `dz/dt = conj(v̄)` with the conjugate velocity from
//! [`crate::kernel`] (or the treecode). Only the periodic part of the state
//! is integrated; the linear part of a flat sheet is carried exactly.
//! An optional spectral noise filter zeroes Fourier modes below a relative
//! floor after every step, suppressing round-off-seeded growth of the
//! high-wavenumber instability.
//!
//! Evolution aborts (returning the partial trajectory) when the adaptive
//! step underflows or the fitted analyticity width of the state drops below
//! two grid spacings; past that point the grid no longer resolves the
//! solution.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{analyticity_width, AnalyticityFit};
use crate::kernel::{velocity, KernelError, KernelKind, KernelSpec};
use crate::sheet::{SheetError, SheetState, Topology};
use crate::treecode::{
    treecode_velocity, treecode_velocity_periodic, TreecodeError, TreecodeParams,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Method {
    /// Classical fixed-step fourth-order Runge-Kutta.
    Rk4 { dt: f64 },
    /// Dormand-Prince 5(4) with step-size control on the periodic part.
    Rk45 { tol: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub t_end: f64,
    pub filter_level: f64,
    pub snapshot_every: usize,
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), EvolveError> {
        match self.method {
            Method::Rk4 { dt } if !(dt > 0.0) => {
                return Err(EvolveError::BadConfig(format!("dt = {dt} must be > 0")))
            }
            Method::Rk45 { tol } if !(tol > 0.0) => {
                return Err(EvolveError::BadConfig(format!("tol = {tol} must be > 0")))
            }
            _ => {}
        }
        if !(self.t_end >= 0.0) {
            return Err(EvolveError::BadConfig(format!(
                "t_end = {} must be >= 0",
                self.t_end
            )));
        }
        if !(self.filter_level >= 0.0 && self.filter_level < 1.0) {
            return Err(EvolveError::BadConfig(format!(
                "filter_level = {} must lie in [0, 1)",
                self.filter_level
            )));
        }
        if self.snapshot_every < 1 {
            return Err(EvolveError::BadConfig(
                "snapshot_every must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Summation {
    Direct,
    Treecode(TreecodeParams),
}

impl Summation {
    pub fn label(&self) -> String {
        match self {
            Summation::Direct => "direct".into(),
            Summation::Treecode(p) => format!(
                "treecode(theta={},max_leaf={},order={})",
                p.theta, p.max_leaf, p.expansion_order
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("invalid integrator configuration: {0}")]
    BadConfig(String),
    #[error("adaptive step underflow at t = {t}: dt = {dt:.3e}")]
    StepUnderflow { t: f64, dt: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Treecode(#[from] TreecodeError),
    #[error(transparent)]
    Sheet(#[from] SheetError),
}

/// Why a run stopped before `t_end`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum AbortReason {
    StepUnderflow { t: f64, dt: f64 },
    AnalyticityLoss { t: f64, sigma: f64 },
    VelocityFailure { t: f64, message: String },
}

impl AbortReason {
    pub fn describe(&self) -> String {
        match self {
            AbortReason::StepUnderflow { t, dt } => {
                format!("singularity approach: step underflow at t = {t} (dt = {dt:.3e})")
            }
            AbortReason::AnalyticityLoss { t, sigma } => format!(
                "singularity approach: analyticity width {sigma:.3e} below resolution at t = {t}"
            ),
            AbortReason::VelocityFailure { t, message } => {
                format!("velocity evaluation failed at t = {t}: {message}")
            }
        }
    }
}

/// Run provenance recorded alongside the snapshots.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Provenance {
    pub kernel: KernelSpec,
    pub summation: String,
    pub config_digest: String,
}

/// Ordered snapshots with strictly increasing times.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<SheetState>,
    pub provenance: Provenance,
    pub abort: Option<AbortReason>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time()).collect()
    }

    pub fn final_state(&self) -> &SheetState {
        self.snapshots.last().expect("trajectory never empty")
    }
}

/// FNV-1a digest used for config provenance.
pub fn fnv1a_hex(data: &str) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in data.as_bytes() {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

fn rhs(
    state: &SheetState,
    kernel: &KernelSpec,
    summation: &Summation,
) -> Result<Vec<Complex64>, EvolveError> {
    let vbar = match summation {
        Summation::Direct => velocity(state, kernel)?,
        Summation::Treecode(params) => match state.topology() {
            Topology::Closed => treecode_velocity(state, kernel, params)?.velocity,
            Topology::PeriodicFlat => {
                treecode_velocity_periodic(state, kernel, params)?.velocity
            }
        },
    };
    Ok(vbar.into_iter().map(|v| v.conj()).collect())
}

fn advanced(state: &SheetState, stages: &[(f64, &[Complex64])], dt: f64) -> SheetState {
    let mut p = state.periodic_part().to_vec();
    for (coeff, k) in stages {
        for (pi, ki) in p.iter_mut().zip(*k) {
            *pi += dt * coeff * ki;
        }
    }
    state.replace_periodic(p, state.time() + dt)
}

/// One classical RK4 step with a caller-supplied right-hand side.
pub fn rk4_step_with<F>(state: &SheetState, dt: f64, mut f: F) -> Result<SheetState, EvolveError>
where
    F: FnMut(&SheetState) -> Result<Vec<Complex64>, EvolveError>,
{
    let k1 = f(state)?;
    let k2 = f(&advanced(state, &[(0.5, &k1)], dt))?;
    let k3 = f(&advanced(state, &[(0.5, &k2)], dt))?;
    let k4 = f(&advanced(state, &[(1.0, &k3)], dt))?;
    let mut p = state.periodic_part().to_vec();
    for (i, pi) in p.iter_mut().enumerate() {
        *pi += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(state.replace_periodic(p, state.time() + dt))
}

// Dormand-Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct DpStep {
    state: SheetState,
    error_ratio: f64,
}

fn dormand_prince_attempt<F>(
    state: &SheetState,
    dt: f64,
    tol: f64,
    f: &mut F,
) -> Result<DpStep, EvolveError>
where
    F: FnMut(&SheetState) -> Result<Vec<Complex64>, EvolveError>,
{
    let n = state.n();
    let mut k: Vec<Vec<Complex64>> = Vec::with_capacity(7);
    k.push(f(state)?);
    for stage in 0..6 {
        let coeffs: Vec<(f64, &[Complex64])> = DP_A[stage]
            .iter()
            .take(stage + 1)
            .enumerate()
            .map(|(i, &a)| (a, k[i].as_slice()))
            .collect();
        let y = advanced(state, &coeffs, dt);
        let mut ys = y;
        ys.set_time(state.time() + DP_C[stage + 1] * dt);
        k.push(f(&ys)?);
    }
    let p0 = state.periodic_part();
    let mut p5 = p0.to_vec();
    let mut err_max: f64 = 0.0;
    for i in 0..n {
        let mut acc5 = Complex64::new(0.0, 0.0);
        let mut acc4 = Complex64::new(0.0, 0.0);
        for s in 0..7 {
            acc5 += DP_B5[s] * k[s][i];
            acc4 += DP_B4[s] * k[s][i];
        }
        p5[i] += dt * acc5;
        let scale = tol * (1.0 + p0[i].norm());
        err_max = err_max.max((dt * (acc5 - acc4)).norm() / scale);
    }
    Ok(DpStep {
        state: state.replace_periodic(p5, state.time() + dt),
        error_ratio: err_max,
    })
}

const DT_MIN: f64 = 1e-12;

/// One explicit step of the configured scheme, with the spectral filter
/// applied afterwards. For the adaptive method this is one accepted step.
pub fn step(
    state: &SheetState,
    cfg: &IntegratorConfig,
    kernel: &KernelSpec,
) -> Result<SheetState, EvolveError> {
    cfg.validate()?;
    let mut f = |s: &SheetState| rhs(s, kernel, &Summation::Direct);
    let mut next = match cfg.method {
        Method::Rk4 { dt } => rk4_step_with(state, dt, &mut f)?,
        Method::Rk45 { tol } => {
            let mut dt = initial_dt(tol);
            loop {
                let attempt = dormand_prince_attempt(state, dt, tol, &mut f)?;
                if attempt.error_ratio <= 1.0 {
                    break attempt.state;
                }
                dt *= (0.9 * attempt.error_ratio.powf(-0.2)).clamp(0.2, 1.0);
                if dt < DT_MIN {
                    return Err(EvolveError::StepUnderflow {
                        t: state.time(),
                        dt,
                    });
                }
            }
        }
    };
    next.apply_filter(cfg.filter_level);
    Ok(next)
}

fn initial_dt(tol: f64) -> f64 {
    (0.1 * tol.powf(0.2)).clamp(1e-6, 0.05)
}

/// Integrate to `t_end`, collecting snapshots at the configured cadence.
/// Aborting returns the partial trajectory with the reason attached.
pub fn run(
    z0: &SheetState,
    cfg: &IntegratorConfig,
    kernel: &KernelSpec,
) -> Result<Trajectory, EvolveError> {
    run_with_summation(z0, cfg, kernel, &Summation::Direct)
}

pub fn run_with_summation(
    z0: &SheetState,
    cfg: &IntegratorConfig,
    kernel: &KernelSpec,
    summation: &Summation,
) -> Result<Trajectory, EvolveError> {
    cfg.validate()?;
    kernel.validate().map_err(EvolveError::Kernel)?;
    let provenance = Provenance {
        kernel: *kernel,
        summation: summation.label(),
        config_digest: fnv1a_hex(&format!("{cfg:?}|{kernel:?}|{}", summation.label())),
    };

    // The resolution-loss abort applies to the exact kernel only: the blob
    // regularization exists to continue through the singular time, and its
    // spectra legitimately reach widths comparable to δ.
    let sigma_abort_active = kernel.kind == KernelKind::PointVortex;
    let sigma_check = |s: &SheetState| -> Option<AbortReason> {
        if sigma_abort_active {
            sigma_abort_check(s)
        } else {
            None
        }
    };
    let mut snapshots = vec![z0.clone()];
    let mut abort = sigma_check(z0);
    let mut state = z0.clone();
    let mut accepted: usize = 0;
    let mut dt_adaptive = match cfg.method {
        Method::Rk45 { tol } => initial_dt(tol),
        Method::Rk4 { dt } => dt,
    };
    let mut f = |s: &SheetState| rhs(s, kernel, summation);

    while abort.is_none() && state.time() < cfg.t_end - 1e-14 {
        let remaining = cfg.t_end - state.time();
        let next = match cfg.method {
            Method::Rk4 { dt } => {
                let dt_eff = dt.min(remaining);
                match rk4_step_with(&state, dt_eff, &mut f) {
                    Ok(s) => s,
                    Err(e) => match velocity_failure(&e) {
                        Some(message) => {
                            abort = Some(AbortReason::VelocityFailure {
                                t: state.time(),
                                message,
                            });
                            break;
                        }
                        None => return Err(e),
                    },
                }
            }
            Method::Rk45 { tol } => {
                let mut dt = dt_adaptive.min(remaining);
                let mut accepted_state: Option<SheetState> = None;
                loop {
                    if dt < DT_MIN {
                        abort = Some(AbortReason::StepUnderflow {
                            t: state.time(),
                            dt,
                        });
                        break;
                    }
                    let attempt = match dormand_prince_attempt(&state, dt, tol, &mut f) {
                        Ok(a) => a,
                        Err(e) => match velocity_failure(&e) {
                            Some(message) => {
                                abort = Some(AbortReason::VelocityFailure {
                                    t: state.time(),
                                    message,
                                });
                                break;
                            }
                            None => return Err(e),
                        },
                    };
                    let factor =
                        (0.9 * attempt.error_ratio.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
                    if attempt.error_ratio <= 1.0 {
                        dt_adaptive = dt * factor;
                        accepted_state = Some(attempt.state);
                        break;
                    }
                    dt *= factor.min(1.0);
                }
                match accepted_state {
                    Some(s) => s,
                    None => break, // abort reason recorded above
                }
            }
        };
        state = next;
        state.apply_filter(cfg.filter_level);
        accepted += 1;
        if state
            .periodic_part()
            .iter()
            .any(|p| !p.re.is_finite() || !p.im.is_finite())
        {
            abort = Some(AbortReason::VelocityFailure {
                t: state.time(),
                message: "non-finite state after step".into(),
            });
            break;
        }
        abort = sigma_check(&state);
        if accepted % cfg.snapshot_every == 0 || abort.is_some() {
            snapshots.push(state.clone());
        }
    }
    if snapshots.last().map(|s| s.time()) != Some(state.time()) {
        snapshots.push(state.clone());
    }
    Ok(Trajectory {
        snapshots,
        provenance,
        abort,
    })
}

fn velocity_failure(e: &EvolveError) -> Option<String> {
    match e {
        EvolveError::Kernel(k) => Some(k.to_string()),
        EvolveError::Treecode(t) => Some(t.to_string()),
        _ => None,
    }
}

/// The resolution-loss criterion: a fitted analyticity width below two grid
/// spacings. Indeterminate fits (too few active modes) never trigger it,
/// and neither do fits over a band of round-off-level magnitudes.
fn sigma_abort_check(state: &SheetState) -> Option<AbortReason> {
    if state.n() < 64 {
        return None;
    }
    match analyticity_width(state) {
        AnalyticityFit::Fit {
            sigma,
            band_peak_rel,
            ..
        } if sigma < 2.0 * state.grid_spacing() && band_peak_rel > 1e-8 => {
            Some(AbortReason::AnalyticityLoss {
                t: state.time(),
                sigma,
            })
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use std::f64::consts::TAU;

    fn cfg_rk4(dt: f64, t_end: f64) -> IntegratorConfig {
        IntegratorConfig {
            method: Method::Rk4 { dt },
            t_end,
            filter_level: 0.0,
            snapshot_every: 1,
        }
    }

    #[test]
    fn flat_sheet_is_steady() {
        let z0 = SheetState::flat_perturbed(64, &[]).unwrap();
        let k = KernelSpec::point_vortex();
        let stepped = step(&z0, &cfg_rk4(0.1, 1.0), &k).unwrap();
        for (a, b) in stepped.periodic_part().iter().zip(z0.periodic_part()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn t_end_zero_returns_initial_only() {
        let z0 = SheetState::flat_perturbed(64, &[(1, c64(0.0, 0.01))]).unwrap();
        let k = KernelSpec::point_vortex();
        let traj = run(&z0, &cfg_rk4(0.01, 0.0), &k).unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        assert!(traj.abort.is_none());
    }

    #[test]
    fn rk4_order_via_richardson() {
        // circle rotation over a modest interval: halving dt divides the
        // endpoint error by ~2^4
        let z0 = SheetState::circle(64, 1.0).unwrap();
        let k = KernelSpec::point_vortex();
        let t_end = 0.8;
        let endpoint = |dt: f64| {
            let traj = run(
                &z0,
                &IntegratorConfig {
                    method: Method::Rk4 { dt },
                    t_end,
                    filter_level: 0.0,
                    snapshot_every: usize::MAX - 1,
                },
                &k,
            )
            .unwrap();
            traj.final_state().clone()
        };
        let exact: Vec<Complex64> = z0
            .positions()
            .iter()
            .map(|z| z * c64(0.0, 0.5 * t_end).exp())
            .collect();
        let err = |s: &SheetState| -> f64 {
            s.positions()
                .iter()
                .zip(&exact)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
        };
        let e1 = err(&endpoint(0.05));
        let e2 = err(&endpoint(0.025));
        let ratio = e1 / e2;
        assert!(
            (10.0..24.0).contains(&ratio),
            "rk4 order ratio {ratio} (e1={e1:.3e}, e2={e2:.3e})"
        );
    }

    #[test]
    fn circle_radius_preserved_over_period() {
        // The noise filter is essential here: unfiltered, round-off seeds
        // the high-wavenumber instability and destroys the circle well
        // before one revolution.
        let z0 = SheetState::circle(256, 1.0).unwrap();
        let k = KernelSpec::point_vortex();
        let traj = run(
            &z0,
            &IntegratorConfig {
                method: Method::Rk4 { dt: 1e-3 },
                t_end: TAU, // half a revolution at angular velocity 1/2
                filter_level: 1e-12,
                snapshot_every: 1000,
            },
            &k,
        )
        .unwrap();
        assert!(traj.abort.is_none(), "{:?}", traj.abort);
        for z in traj.final_state().positions() {
            assert!((z.norm() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn reversibility_to_integrator_order() {
        let z0 = SheetState::flat_perturbed(64, &[(1, c64(0.0, 0.05))]).unwrap();
        let k = KernelSpec::point_vortex();
        let dt = 0.01;
        let steps = 30;
        let mut state = z0.clone();
        let mut forward = |s: &SheetState| rhs(s, &k, &Summation::Direct);
        for _ in 0..steps {
            state = rk4_step_with(&state, dt, &mut forward).unwrap();
        }
        let mut backward = |s: &SheetState| {
            rhs(s, &k, &Summation::Direct)
                .map(|v| v.into_iter().map(|x| -x).collect::<Vec<_>>())
        };
        for _ in 0..steps {
            state = rk4_step_with(&state, dt, &mut backward).unwrap();
        }
        let err = state
            .periodic_part()
            .iter()
            .zip(z0.periodic_part())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "reversibility error {err:.3e}");
    }

    #[test]
    fn adaptive_matches_rk4_on_smooth_state() {
        let z0 = SheetState::circle(64, 1.0).unwrap();
        let k = KernelSpec::point_vortex();
        let t_end = 1.0;
        let fixed = run(&z0, &cfg_rk4(2e-3, t_end), &k).unwrap();
        let adaptive = run(
            &z0,
            &IntegratorConfig {
                method: Method::Rk45 { tol: 1e-10 },
                t_end,
                filter_level: 0.0,
                snapshot_every: usize::MAX - 1,
            },
            &k,
        )
        .unwrap();
        assert!(adaptive.abort.is_none());
        let err = adaptive
            .final_state()
            .positions()
            .iter()
            .zip(fixed.final_state().positions())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-7, "adaptive vs fixed endpoint {err:.3e}");
    }

    #[test]
    fn mean_of_periodic_part_conserved() {
        let z0 = SheetState::flat_perturbed(128, &[(2, c64(0.0, 0.01))]).unwrap();
        let k = KernelSpec::point_vortex();
        let traj = run(&z0, &cfg_rk4(5e-3, 0.5), &k).unwrap();
        let mean = |s: &SheetState| -> Complex64 {
            s.periodic_part().iter().sum::<Complex64>() / s.n() as f64
        };
        let drift = (mean(traj.final_state()) - mean(&z0)).norm();
        assert!(drift < 1e-10, "centroid drift {drift:.3e}");
    }

    #[test]
    fn filter_level_applied_after_step() {
        let z0 = SheetState::flat_perturbed(64, &[(1, c64(0.0, 1e-2))]).unwrap();
        let k = KernelSpec::point_vortex();
        let cfg = IntegratorConfig {
            method: Method::Rk4 { dt: 1e-3 },
            t_end: 1e-3,
            filter_level: 1e-8,
            snapshot_every: 1,
        };
        let traj = run(&z0, &cfg, &k).unwrap();
        let sp = traj.final_state().spectrum();
        let max = sp.max_abs();
        // the band between transform round-off and the floor must be empty
        for (idx, c) in sp.coeffs().iter().enumerate() {
            let mag = c.norm();
            assert!(
                mag < 1e-13 * max || mag >= 1e-8 * max,
                "mode {idx} survived below the filter floor: {mag:.3e}"
            );
        }
    }
}
