//! Singular velocity evaluation on and off the sheet.
//!
//! The on-sheet conjugate velocity is the principal-value average
//! `v̄(α) = (1/2πi) pv ∫ dβ / (z(α) - z(β))`. For the periodic-flat topology
//! the whole-line integral is periodized through
//! `Σ_n 1/(w - 2πn) = (1/2) cot(w/2)`.
//!
//! Discretization: composite trapezoid on the uniform α-grid with the
//! singular node replaced by the analytic diagonal limit
//! `z_αα / (2 z_α²)` of the regularized integrand. With the limit term the
//! rule is spectrally accurate for analytic sheets; plain self-term omission
//! (the classical point-vortex sum) leaves an O(1/N) defect. The blob
//! kernels use the same rule, which keeps the δ → 0 limit equal to the
//! point-vortex evaluation term by term.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

use crate::c64;
use crate::curve::PlanarCurve;
use crate::sheet::{SheetState, Topology};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum KernelKind {
    PointVortex,
    Blob,
}

/// Kernel selection: exact point-vortex kernel or the δ-smoothed blob kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub delta: f64,
}

impl KernelSpec {
    pub fn point_vortex() -> KernelSpec {
        KernelSpec {
            kind: KernelKind::PointVortex,
            delta: 0.0,
        }
    }

    pub fn blob(delta: f64) -> Result<KernelSpec, KernelError> {
        if !(delta > 0.0) {
            return Err(KernelError::BadBlobParameter(delta));
        }
        Ok(KernelSpec {
            kind: KernelKind::Blob,
            delta,
        })
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        match self.kind {
            KernelKind::PointVortex if self.delta != 0.0 => {
                Err(KernelError::BadBlobParameter(self.delta))
            }
            KernelKind::Blob if !(self.delta > 0.0) => {
                Err(KernelError::BadBlobParameter(self.delta))
            }
            _ => Ok(()),
        }
    }

    fn delta_sq(&self) -> f64 {
        self.delta * self.delta
    }
}

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("blob parameter delta = {0} is invalid (point-vortex requires 0, blob requires > 0)")]
    BadBlobParameter(f64),
    #[error("operation requires {expected:?} topology, state is {got:?}")]
    WrongTopology { expected: Topology, got: Topology },
    #[error("singular configuration: samples {i} and {j} coincide")]
    SingularConfiguration { i: usize, j: usize },
    #[error("query point {index} is within {dist:.3e} of a sheet sample; refusing with delta = 0")]
    NearSample { index: usize, dist: f64 },
    #[error("vortex strength blowup: |z_alpha| = {min_abs:.3e} at sample {index}")]
    VanishingDerivative { index: usize, min_abs: f64 },
    #[error("coincident curve samples {i} and {j}")]
    CoincidentCurveSamples { i: usize, j: usize },
}

/// `cosh y - cos x` through `2(sinh²(y/2) + sin²(x/2))`: exact identity,
/// free of the cancellation that otherwise costs ~eps/h² relative error on
/// near-diagonal pairs.
#[inline]
pub fn cosh_minus_cos(x: f64, y: f64) -> f64 {
    let sh = (0.5 * y).sinh();
    let sn = (0.5 * x).sin();
    2.0 * (sh * sh + sn * sn)
}

/// Periodized kernel summand `(1/2) cot((x+iy)/2)`, blob-smoothed in the
/// denominator: `(sin x - i sinh y) / (2 (cosh y - cos x + δ²))`.
#[inline]
pub fn periodic_summand(u: Complex64, delta_sq: f64) -> Complex64 {
    let denom = cosh_minus_cos(u.re, u.im) + delta_sq;
    c64(u.re.sin(), -u.im.sinh()) / (2.0 * denom)
}

/// Closed-sheet summand `conj(u) / (|u|² + δ²)`; equals `1/u` at δ = 0.
#[inline]
pub fn closed_summand(u: Complex64, delta_sq: f64) -> Complex64 {
    u.conj() / (u.norm_sqr() + delta_sq)
}

/// Diagonal limit `z_αα / (2 z_α²)` of the regularized kernel at the
/// singular node, per sample.
fn diagonal_terms(state: &SheetState) -> Result<Vec<Complex64>, KernelError> {
    let z_a = state.derivative();
    let z_aa = state.second_derivative();
    let mut out = Vec::with_capacity(z_a.len());
    for (i, (da, daa)) in z_a.iter().zip(&z_aa).enumerate() {
        let n2 = da.norm();
        if n2 < 1e-13 {
            return Err(KernelError::VanishingDerivative {
                index: i,
                min_abs: n2,
            });
        }
        out.push(daa / (2.0 * da * da));
    }
    Ok(out)
}

const PREF: Complex64 = Complex64 { re: 0.0, im: -1.0 }; // 1/i

fn sum_targets<F>(n: usize, f: F) -> Result<Vec<Complex64>, KernelError>
where
    F: Fn(usize) -> Result<Complex64, KernelError> + Sync + Send,
{
    // Targets are partitioned across workers; each target accumulates its own
    // sum serially, so results do not depend on the partitioning.
    (0..n).into_par_iter().map(f).collect()
}

/// Conjugate velocity of a periodic-flat sheet.
pub fn velocity_periodic(
    state: &SheetState,
    kernel: &KernelSpec,
) -> Result<Vec<Complex64>, KernelError> {
    if state.topology() != Topology::PeriodicFlat {
        return Err(KernelError::WrongTopology {
            expected: Topology::PeriodicFlat,
            got: state.topology(),
        });
    }
    kernel.validate()?;
    let z = state.positions();
    let diag = diagonal_terms(state)?;
    let n = z.len();
    let h = TAU / n as f64;
    let d2 = kernel.delta_sq();
    let singular_floor = 1e-28;
    sum_targets(n, |i| {
        let zi = z[i];
        let mut acc = c64(0.0, 0.0);
        for (j, &zj) in z.iter().enumerate() {
            if j == i {
                continue;
            }
            let u = zi - zj;
            let denom = cosh_minus_cos(u.re, u.im) + d2;
            if denom < singular_floor {
                return Err(KernelError::SingularConfiguration { i, j });
            }
            acc += c64(u.re.sin(), -u.im.sinh()) / (2.0 * denom);
        }
        acc += diag[i];
        Ok(PREF * acc * (h / TAU))
    })
}

/// Conjugate velocity of a closed sheet.
pub fn velocity_closed(
    state: &SheetState,
    kernel: &KernelSpec,
) -> Result<Vec<Complex64>, KernelError> {
    if state.topology() != Topology::Closed {
        return Err(KernelError::WrongTopology {
            expected: Topology::Closed,
            got: state.topology(),
        });
    }
    kernel.validate()?;
    let z = state.positions();
    let diag = diagonal_terms(state)?;
    let n = z.len();
    let h = TAU / n as f64;
    let d2 = kernel.delta_sq();
    sum_targets(n, |i| {
        let zi = z[i];
        let mut acc = c64(0.0, 0.0);
        for (j, &zj) in z.iter().enumerate() {
            if j == i {
                continue;
            }
            let u = zi - zj;
            let den = u.norm_sqr() + d2;
            if den == 0.0 {
                return Err(KernelError::SingularConfiguration { i, j });
            }
            acc += u.conj() / den;
        }
        acc += diag[i];
        Ok(PREF * acc * (h / TAU))
    })
}

/// Topology dispatch used by the integrator.
pub fn velocity(state: &SheetState, kernel: &KernelSpec) -> Result<Vec<Complex64>, KernelError> {
    match state.topology() {
        Topology::PeriodicFlat => velocity_periodic(state, kernel),
        Topology::Closed => velocity_closed(state, kernel),
    }
}

/// Conjugate velocity induced at points off the sheet (plain Biot-Savart
/// sum, no principal value needed).
pub fn velocity_offsheet(
    state: &SheetState,
    points: &[Complex64],
    kernel: &KernelSpec,
) -> Result<Vec<Complex64>, KernelError> {
    kernel.validate()?;
    let z = state.positions();
    let n = z.len();
    let h = TAU / n as f64;
    let d2 = kernel.delta_sq();
    let periodic = state.topology() == Topology::PeriodicFlat;
    let near_sq = 1e-24;
    (0..points.len())
        .into_par_iter()
        .map(|q| {
            let w = points[q];
            let mut acc = c64(0.0, 0.0);
            for &zj in &z {
                let u = w - zj;
                if periodic {
                    let denom = cosh_minus_cos(u.re, u.im) + d2;
                    // cosh y - cos x ≈ |u|²/2 near a sample
                    if d2 == 0.0 && denom < near_sq {
                        return Err(KernelError::NearSample {
                            index: q,
                            dist: (2.0 * denom.max(0.0)).sqrt(),
                        });
                    }
                    acc += c64(u.re.sin(), -u.im.sinh()) / (2.0 * denom);
                } else {
                    let nsq = u.norm_sqr();
                    if d2 == 0.0 && nsq < near_sq {
                        return Err(KernelError::NearSample {
                            index: q,
                            dist: nsq.sqrt(),
                        });
                    }
                    acc += u.conj() / (nsq + d2);
                }
            }
            Ok(PREF * acc * (h / TAU))
        })
        .collect()
}

/// Cauchy integral operator on a sampled curve:
/// `C_Γ f(s_i) = Σ_{j≠i} f(s_j) ξ'(s_j) Δs_j / (ξ(s_i) - ξ(s_j))`,
/// principal value by omission of the self term.
pub fn cauchy_operator(
    curve: &PlanarCurve,
    f: &[Complex64],
) -> Result<Vec<Complex64>, KernelError> {
    assert_eq!(curve.n(), f.len(), "sample count mismatch");
    let n = curve.n();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let xi_i = curve.xi[i];
            let mut acc = c64(0.0, 0.0);
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d = xi_i - curve.xi[j];
                if d.norm_sqr() == 0.0 {
                    return Err(KernelError::CoincidentCurveSamples { i, j });
                }
                acc += f[j] * curve.tangent[j] * curve.weight[j] / d;
            }
            Ok(acc)
        })
        .collect()
}

/// L²(ds) norm of samples with the curve's quadrature weights.
pub fn curve_l2_norm(curve: &PlanarCurve, f: &[Complex64]) -> f64 {
    f.iter()
        .zip(&curve.weight)
        .map(|(v, w)| v.norm_sqr() * w)
        .sum::<f64>()
        .sqrt()
}
