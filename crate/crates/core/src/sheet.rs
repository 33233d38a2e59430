//! Sheet states in the circulation variable.
//!
//! A sheet is sampled at N uniform nodes `α_j = 2πj/N` of the circulation
//! variable. Two topologies are supported:
//!
//! - `PeriodicFlat`: a perturbed flat sheet, `z(α) = α + p(α)` with `p`
//!   2π-periodic. Only `p` is stored, so the representation itself enforces
//!   periodicity of `z(α) - α`.
//! - `Closed`: a closed loop, `z` itself 2π-periodic. The sample polygon is
//!   required to be simple at construction; evolution may later produce
//!   self-intersections, which diagnostics detect rather than prevent.

use num_complex::Complex64;
use std::f64::consts::TAU;
use thiserror::Error;

use crate::c64;
use crate::spectral::Spectrum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Topology {
    PeriodicFlat,
    Closed,
}

impl Topology {
    pub fn as_str(&self) -> &'static str {
        match self {
            Topology::PeriodicFlat => "periodic_flat",
            Topology::Closed => "closed",
        }
    }

    pub fn parse(s: &str) -> Option<Topology> {
        match s {
            "periodic_flat" => Some(Topology::PeriodicFlat),
            "closed" => Some(Topology::Closed),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum SheetError {
    #[error("grid size {0} is invalid: need an even number of samples, at least 8")]
    BadGridSize(usize),
    #[error("mode k={k} is not resolvable on an N={n} grid (need |k| <= N/2 - 1)")]
    UnresolvableMode { k: i64, n: usize },
    #[error("closed sheet polygon is not simple: segments {0} and {1} intersect")]
    SelfIntersecting(usize, usize),
    #[error("vortex strength blowup: |z_alpha| = {min_abs:.3e} at sample {index}")]
    VanishingDerivative { index: usize, min_abs: f64 },
    #[error("sample count mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
}

/// Sampled sheet position in the circulation variable at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct SheetState {
    topology: Topology,
    /// Periodic part: `z - α` for `PeriodicFlat`, `z` itself for `Closed`.
    periodic: Vec<Complex64>,
    time: f64,
    /// Physical circulation carried by one 2π period of α, divided by 2π.
    /// Construction from arclength data rescales total circulation to 2π and
    /// records the factor here; directly built states have scale 1.
    alpha_scale: f64,
}

fn check_grid(n: usize) -> Result<(), SheetError> {
    if n < 8 || n % 2 != 0 {
        return Err(SheetError::BadGridSize(n));
    }
    Ok(())
}

fn check_finite(samples: &[Complex64]) -> Result<(), SheetError> {
    for (i, s) in samples.iter().enumerate() {
        if !s.re.is_finite() || !s.im.is_finite() {
            return Err(SheetError::NonFinite(i));
        }
    }
    Ok(())
}

fn orient(a: Complex64, b: Complex64, c: Complex64) -> f64 {
    (b.re - a.re) * (c.im - a.im) - (b.im - a.im) * (c.re - a.re)
}

fn segments_cross(p1: Complex64, p2: Complex64, q1: Complex64, q2: Complex64) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

impl SheetState {
    /// Flat sheet plus a finite set of Fourier modes:
    /// `z(α_j) = α_j + Σ a_k exp(ik α_j)`.
    pub fn flat_perturbed(
        n: usize,
        modes: &[(i64, Complex64)],
    ) -> Result<SheetState, SheetError> {
        check_grid(n)?;
        let half = n as i64 / 2;
        for &(k, _) in modes {
            if k.abs() > half - 1 {
                return Err(SheetError::UnresolvableMode { k, n });
            }
        }
        let mut periodic = vec![c64(0.0, 0.0); n];
        for (j, p) in periodic.iter_mut().enumerate() {
            let alpha = TAU * j as f64 / n as f64;
            for &(k, a) in modes {
                *p += a * c64(0.0, k as f64 * alpha).exp();
            }
        }
        Ok(SheetState {
            topology: Topology::PeriodicFlat,
            periodic,
            time: 0.0,
            alpha_scale: 1.0,
        })
    }

    /// Closed sheet from position samples; rejects self-intersecting polygons.
    pub fn closed(samples: Vec<Complex64>, time: f64) -> Result<SheetState, SheetError> {
        let n = samples.len();
        check_grid(n)?;
        check_finite(&samples)?;
        // O(N^2) proper-crossing test over non-adjacent segment pairs.
        for i in 0..n {
            let p1 = samples[i];
            let p2 = samples[(i + 1) % n];
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue; // adjacent around the wrap
                }
                let q1 = samples[j];
                let q2 = samples[(j + 1) % n];
                if segments_cross(p1, p2, q1, q2) {
                    return Err(SheetError::SelfIntersecting(i, j));
                }
            }
        }
        Ok(SheetState {
            topology: Topology::Closed,
            periodic: samples,
            time,
            alpha_scale: 1.0,
        })
    }

    /// Circle of given radius about the origin, uniform vortex strength,
    /// total circulation 2π. Known simple; skips the polygon test.
    pub fn circle(n: usize, radius: f64) -> Result<SheetState, SheetError> {
        check_grid(n)?;
        let samples = (0..n)
            .map(|j| {
                let alpha = TAU * j as f64 / n as f64;
                radius * c64(0.0, alpha).exp()
            })
            .collect();
        Ok(SheetState {
            topology: Topology::Closed,
            periodic: samples,
            time: 0.0,
            alpha_scale: 1.0,
        })
    }

    /// Rebuild a state from its periodic part without geometric validation.
    ///
    /// Used by the integrator and by snapshot loading: evolved sheets may
    /// legitimately self-intersect, and diagnostics must still run on them.
    pub fn from_periodic_part(
        topology: Topology,
        periodic: Vec<Complex64>,
        time: f64,
    ) -> Result<SheetState, SheetError> {
        check_grid(periodic.len())?;
        check_finite(&periodic)?;
        Ok(SheetState {
            topology,
            periodic,
            time,
            alpha_scale: 1.0,
        })
    }

    pub fn with_alpha_scale(mut self, scale: f64) -> SheetState {
        self.alpha_scale = scale;
        self
    }

    pub fn n(&self) -> usize {
        self.periodic.len()
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn alpha_scale(&self) -> f64 {
        self.alpha_scale
    }

    pub fn grid_spacing(&self) -> f64 {
        TAU / self.n() as f64
    }

    pub fn alpha(&self) -> Vec<f64> {
        let n = self.n();
        (0..n).map(|j| TAU * j as f64 / n as f64).collect()
    }

    /// The stored periodic part (`z - α` or `z`, by topology).
    pub fn periodic_part(&self) -> &[Complex64] {
        &self.periodic
    }

    /// Positions `z(α_j)`.
    pub fn positions(&self) -> Vec<Complex64> {
        match self.topology {
            Topology::Closed => self.periodic.clone(),
            Topology::PeriodicFlat => {
                let n = self.n();
                self.periodic
                    .iter()
                    .enumerate()
                    .map(|(j, p)| p + c64(TAU * j as f64 / n as f64, 0.0))
                    .collect()
            }
        }
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum::from_samples(&self.periodic)
    }

    /// `z_α` samples: spectral derivative of the periodic part plus the
    /// derivative of the linear part (1 for `PeriodicFlat`, 0 for `Closed`).
    pub fn derivative(&self) -> Vec<Complex64> {
        let mut d = self.spectrum().derivative().to_samples();
        if self.topology == Topology::PeriodicFlat {
            for v in &mut d {
                *v += 1.0;
            }
        }
        d
    }

    /// `z_αα` samples.
    pub fn second_derivative(&self) -> Vec<Complex64> {
        self.spectrum().derivative().derivative().to_samples()
    }

    /// Continuous branch of `ln z_α`: real part `ln |z_α|`, imaginary part
    /// the argument unwrapped along the grid so neighbor jumps stay below π,
    /// anchored at the principal argument of the first sample.
    pub fn log_derivative(&self) -> Result<Vec<Complex64>, SheetError> {
        let z_alpha = self.derivative();
        let mut min_abs = f64::INFINITY;
        let mut min_idx = 0;
        for (i, v) in z_alpha.iter().enumerate() {
            let a = v.norm();
            if a < min_abs {
                min_abs = a;
                min_idx = i;
            }
        }
        if min_abs < 1e-13 {
            return Err(SheetError::VanishingDerivative {
                index: min_idx,
                min_abs,
            });
        }
        let mut out = Vec::with_capacity(z_alpha.len());
        let mut arg = z_alpha[0].arg();
        out.push(c64(z_alpha[0].norm().ln(), arg));
        for w in z_alpha.windows(2) {
            // principal argument of the ratio is the jump, always in (-π, π]
            arg += (w[1] / w[0]).arg();
            out.push(c64(w[1].norm().ln(), arg));
        }
        Ok(out)
    }

    /// Apply the spectral noise filter to the periodic part in place.
    pub fn apply_filter(&mut self, level: f64) -> usize {
        if level <= 0.0 {
            return 0;
        }
        let mut sp = self.spectrum();
        let cut = sp.krasny_filter(level);
        if cut > 0 {
            self.periodic = sp.to_samples();
        }
        cut
    }

    /// Replace the periodic part, keeping topology and scale (integrator use).
    pub fn replace_periodic(&self, periodic: Vec<Complex64>, time: f64) -> SheetState {
        SheetState {
            topology: self.topology,
            periodic,
            time,
            alpha_scale: self.alpha_scale,
        }
    }
}

/// Tangent-angle winding: total range of the unwrapped `arg z_α`. A sheet
/// rolled into a spiral with inner turns shows winding above 2π.
pub fn tangent_winding(state: &SheetState) -> Result<f64, SheetError> {
    let ln_za = state.log_derivative()?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in &ln_za {
        lo = lo.min(v.im);
        hi = hi.max(v.im);
    }
    Ok(hi - lo)
}
