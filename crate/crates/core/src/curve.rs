//! Open test curves used by the diagnostics and the Cauchy operator probe.

use num_complex::Complex64;
use thiserror::Error;

use crate::c64;

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("degenerate curve: need at least 2 samples and a nonempty parameter range")]
    Degenerate,
    #[error("sample count mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// A sampled rectifiable plane curve with arclength bookkeeping.
///
/// `s` are arclength values at the samples, `tangent` the unit tangent
/// `ξ'(s)`, and `weight` the per-sample `ds` quadrature weights (trapezoid).
#[derive(Clone, Debug)]
pub struct PlanarCurve {
    pub s: Vec<f64>,
    pub xi: Vec<Complex64>,
    pub tangent: Vec<Complex64>,
    pub weight: Vec<f64>,
}

impl PlanarCurve {
    pub fn n(&self) -> usize {
        self.xi.len()
    }

    /// Total arclength spanned by the samples.
    pub fn length(&self) -> f64 {
        self.s.last().copied().unwrap_or(0.0) - self.s.first().copied().unwrap_or(0.0)
    }

    /// Build from position samples alone: arclength by chord accumulation,
    /// tangents by centered differences (one-sided at the ends).
    pub fn from_samples(xi: Vec<Complex64>) -> Result<PlanarCurve, CurveError> {
        let n = xi.len();
        if n < 2 {
            return Err(CurveError::Degenerate);
        }
        let mut s = vec![0.0; n];
        for i in 1..n {
            s[i] = s[i - 1] + (xi[i] - xi[i - 1]).norm();
        }
        let mut tangent = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b) = if i == 0 {
                (0, 1)
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            let d = xi[b] - xi[a];
            let norm = d.norm();
            tangent.push(if norm > 0.0 { d / norm } else { c64(1.0, 0.0) });
        }
        let weight = trapezoid_weights(&s);
        Ok(PlanarCurve {
            s,
            xi,
            tangent,
            weight,
        })
    }
}

fn trapezoid_weights(s: &[f64]) -> Vec<f64> {
    let n = s.len();
    let mut w = vec![0.0; n];
    for i in 0..n {
        let left = if i == 0 { s[0] } else { s[i - 1] };
        let right = if i == n - 1 { s[n - 1] } else { s[i + 1] };
        w[i] = 0.5 * (right - left);
    }
    w
}

/// Logarithmic spiral `ξ(θ) = e^θ e^{iθ}` sampled at N uniformly spaced θ.
///
/// A standard example of a chord-arc curve; used as a diagnostics test curve,
/// never evolved. Arclength and tangent come from the closed forms
/// `s(θ) = √2 (e^θ - e^{θ_min})`, `ξ'(s) = (1+i) e^{iθ} / √2`.
pub fn make_log_spiral(
    n: usize,
    theta_min: f64,
    theta_max: f64,
) -> Result<PlanarCurve, CurveError> {
    if n < 2 || !(theta_max > theta_min) {
        return Err(CurveError::Degenerate);
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    let dtheta = (theta_max - theta_min) / (n - 1) as f64;
    let mut s = Vec::with_capacity(n);
    let mut xi = Vec::with_capacity(n);
    let mut tangent = Vec::with_capacity(n);
    let mut weight = Vec::with_capacity(n);
    for j in 0..n {
        let theta = theta_min + dtheta * j as f64;
        let r = theta.exp();
        s.push(sqrt2 * (r - theta_min.exp()));
        xi.push(r * c64(0.0, theta).exp());
        tangent.push(c64(1.0, 1.0) / sqrt2 * c64(0.0, theta).exp());
        // ds = √2 e^θ dθ, trapezoid ends get half weight
        let end = j == 0 || j == n - 1;
        weight.push(sqrt2 * r * dtheta * if end { 0.5 } else { 1.0 });
    }
    Ok(PlanarCurve {
        s,
        xi,
        tangent,
        weight,
    })
}

/// Straight real segment `[a, b]` with N samples; `C_Γ` on it is the
/// finite-interval Hilbert transform (times πi structure).
pub fn make_segment(n: usize, a: f64, b: f64) -> Result<PlanarCurve, CurveError> {
    if n < 2 || !(b > a) {
        return Err(CurveError::Degenerate);
    }
    let h = (b - a) / (n - 1) as f64;
    let s: Vec<f64> = (0..n).map(|j| a + h * j as f64).collect();
    let xi: Vec<Complex64> = s.iter().map(|&x| c64(x, 0.0)).collect();
    let tangent = vec![c64(1.0, 0.0); n];
    let weight = trapezoid_weights(&s);
    Ok(PlanarCurve {
        s,
        xi,
        tangent,
        weight,
    })
}
