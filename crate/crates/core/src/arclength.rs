//! Arclength/vortex-density form of a sheet and the change of variables
//! to and from the circulation parameterization.
//!
//! With `γ > 0`, `α(s) = ∫_0^s γ` is increasing and invertible; the sheet in
//! the circulation variable is `z(α) = ξ(s(α))`, and conversely
//! `s(α) = ∫_0^α |z_α|`, `γ = 1/|z_α|`. Cumulative integrals are evaluated
//! spectrally; the monotone inversion uses a monotone cubic interpolant.

use num_complex::Complex64;
use std::f64::consts::TAU;
use thiserror::Error;

use crate::c64;
use crate::sheet::{SheetError, SheetState, Topology};
use crate::spectral::Spectrum;

#[derive(Debug, Error)]
pub enum ArclengthError {
    #[error("vortex density must be positive everywhere: gamma = {value:.3e} at sample {index}")]
    NonPositiveDensity { index: usize, value: f64 },
    #[error("arclength parameterization broken: |xi'(s)| = {value:.6} at sample {index} (expected 1)")]
    NotUnitSpeed { index: usize, value: f64 },
    #[error("circulation is not increasing at sample {0}")]
    NonMonotone(usize),
    #[error(transparent)]
    Sheet(#[from] SheetError),
}

/// Sheet as `(ξ(s), γ(s))` on a uniform arclength grid.
///
/// For `Closed` topology `ξ` is S-periodic (S the total length); for
/// `PeriodicFlat` one spatial period is covered, `ξ(s + S) = ξ(s) + 2π`.
#[derive(Clone, Debug)]
pub struct ArclengthSheet {
    topology: Topology,
    ds: f64,
    xi: Vec<Complex64>,
    gamma: Vec<f64>,
    time: f64,
}

impl ArclengthSheet {
    pub fn new(
        topology: Topology,
        ds: f64,
        xi: Vec<Complex64>,
        gamma: Vec<f64>,
        time: f64,
    ) -> Result<ArclengthSheet, ArclengthError> {
        for (i, &g) in gamma.iter().enumerate() {
            if !(g > 0.0) {
                return Err(ArclengthError::NonPositiveDensity { index: i, value: g });
            }
        }
        let sheet = ArclengthSheet {
            topology,
            ds,
            xi,
            gamma,
            time,
        };
        sheet.check_unit_speed()?;
        Ok(sheet)
    }

    fn check_unit_speed(&self) -> Result<(), ArclengthError> {
        let n = self.xi.len();
        let offset = self.period_offset();
        for i in 0..n {
            let next = if i + 1 < n {
                self.xi[i + 1]
            } else {
                self.xi[0] + offset
            };
            let prev = if i > 0 {
                self.xi[i - 1]
            } else {
                *self.xi.last().unwrap() - offset
            };
            let speed = (next - prev).norm() / (2.0 * self.ds);
            // centered differences of the chordal samples: quadrature-level check
            if (speed - 1.0).abs() > 1e-2 {
                return Err(ArclengthError::NotUnitSpeed {
                    index: i,
                    value: speed,
                });
            }
        }
        Ok(())
    }

    fn period_offset(&self) -> Complex64 {
        match self.topology {
            Topology::Closed => c64(0.0, 0.0),
            Topology::PeriodicFlat => c64(TAU, 0.0),
        }
    }

    pub fn n(&self) -> usize {
        self.xi.len()
    }

    pub fn ds(&self) -> f64 {
        self.ds
    }

    pub fn total_length(&self) -> f64 {
        self.ds * self.xi.len() as f64
    }

    pub fn s(&self) -> Vec<f64> {
        (0..self.xi.len()).map(|j| self.ds * j as f64).collect()
    }

    pub fn xi(&self) -> &[Complex64] {
        &self.xi
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn time(&self) -> f64 {
        self.time
    }
}

/// Monotone cubic interpolant (Fritsch-Carlson) through strictly increasing
/// knots; preserves monotonicity of the data.
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    slope: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<MonotoneCubic, ArclengthError> {
        assert_eq!(x.len(), y.len());
        let n = x.len();
        let mut d = vec![0.0; n - 1];
        for i in 0..n - 1 {
            let dx = x[i + 1] - x[i];
            if !(dx > 0.0) {
                return Err(ArclengthError::NonMonotone(i));
            }
            d[i] = (y[i + 1] - y[i]) / dx;
        }
        let mut slope = vec![0.0; n];
        slope[0] = d[0];
        slope[n - 1] = d[n - 2];
        for i in 1..n - 1 {
            slope[i] = if d[i - 1] * d[i] <= 0.0 {
                0.0
            } else {
                // harmonic mean limiter keeps the interpolant monotone
                let w1 = 2.0 * (x[i + 1] - x[i]) + (x[i] - x[i - 1]);
                let w2 = (x[i + 1] - x[i]) + 2.0 * (x[i] - x[i - 1]);
                (w1 + w2) / (w1 / d[i - 1] + w2 / d[i])
            };
        }
        Ok(MonotoneCubic { x, y, slope })
    }

    pub fn eval(&self, xq: f64) -> f64 {
        let n = self.x.len();
        let i = match self
            .x
            .binary_search_by(|v| v.partial_cmp(&xq).unwrap())
        {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) if i >= n => n - 2,
            Err(i) => i - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let t = ((xq - self.x[i]) / h).clamp(0.0, 1.0);
        let (h00, h10, h01, h11) = hermite_basis(t);
        h00 * self.y[i] + h10 * h * self.slope[i] + h01 * self.y[i + 1] + h11 * h * self.slope[i + 1]
    }
}

fn hermite_basis(t: f64) -> (f64, f64, f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    (
        2.0 * t3 - 3.0 * t2 + 1.0,
        t3 - 2.0 * t2 + t,
        -2.0 * t3 + 3.0 * t2,
        t3 - t2,
    )
}

/// `(ξ(s), γ(s)) → z(α)`: cumulative circulation `α(s) = ∫ γ`, inverted
/// monotonically, with `ξ` resampled on a uniform α-grid. Total circulation
/// is rescaled to 2π; the factor is recorded on the returned state.
pub fn to_circulation(sheet: &ArclengthSheet) -> Result<SheetState, ArclengthError> {
    let n = sheet.n();
    let ds = sheet.ds();
    let total_s = sheet.total_length();

    // α(s) by spectral antiderivative of the periodic samples of γ.
    // Sampled on the s-grid scaled to 2π for the FFT, then mapped back.
    let gamma_c: Vec<Complex64> = sheet.gamma.iter().map(|&g| c64(g, 0.0)).collect();
    let gamma_sp = Spectrum::from_samples(&gamma_c);
    let scale = total_s / TAU; // ds in the 2π variable
    let alpha_at = |s: f64| -> f64 { gamma_sp.antiderivative_eval(s / scale).re * scale };

    let alpha_knots: Vec<f64> = (0..=n).map(|j| alpha_at(ds * j as f64)).collect();
    for w in alpha_knots.windows(2) {
        if !(w[1] > w[0]) {
            return Err(ArclengthError::NonMonotone(0));
        }
    }
    let total_circulation = alpha_knots[n];

    // periodic part of ξ in s (linear part 2π·s/S for the flat topology)
    let offset = sheet.period_offset();
    let xi_periodic: Vec<Complex64> = sheet
        .xi
        .iter()
        .enumerate()
        .map(|(j, &x)| x - offset * (j as f64 / n as f64))
        .collect();
    let xi_sp = Spectrum::from_samples(&xi_periodic);
    let xi_at = |s: f64| -> Complex64 { xi_sp.eval(s / scale) + offset * (s / total_s) };

    // invert α(s) on the rescaled grid ᾱ = 2π α / Γ with a monotone cubic
    let s_knots: Vec<f64> = (0..=n).map(|j| ds * j as f64).collect();
    let inverse = MonotoneCubic::new(alpha_knots, s_knots)?;

    let mut periodic = Vec::with_capacity(n);
    for i in 0..n {
        let alpha_bar = TAU * i as f64 / n as f64;
        let s_star = inverse.eval(alpha_bar / TAU * total_circulation);
        let z = xi_at(s_star);
        periodic.push(match sheet.topology {
            Topology::Closed => z,
            Topology::PeriodicFlat => z - c64(alpha_bar, 0.0),
        });
    }
    Ok(
        SheetState::from_periodic_part(sheet.topology, periodic, sheet.time)?
            .with_alpha_scale(total_circulation / TAU),
    )
}

/// `z(α) → (ξ(s), γ(s))`: arclength by cumulative `|z_α|`, density
/// `γ = 1/|z_α|`, both resampled on a uniform s-grid.
pub fn from_circulation(state: &SheetState) -> Result<ArclengthSheet, ArclengthError> {
    let n = state.n();
    let z_alpha = state.derivative();
    for (i, v) in z_alpha.iter().enumerate() {
        if v.norm() < 1e-13 {
            return Err(SheetError::VanishingDerivative {
                index: i,
                min_abs: v.norm(),
            }
            .into());
        }
    }
    let speed: Vec<Complex64> = z_alpha.iter().map(|v| c64(v.norm(), 0.0)).collect();
    let speed_sp = Spectrum::from_samples(&speed);
    let s_at = |alpha: f64| -> f64 { speed_sp.antiderivative_eval(alpha).re };

    let s_knots: Vec<f64> = (0..=n).map(|j| s_at(TAU * j as f64 / n as f64)).collect();
    for w in s_knots.windows(2) {
        if !(w[1] > w[0]) {
            return Err(ArclengthError::NonMonotone(0));
        }
    }
    let total_s = s_knots[n];
    let alpha_knots: Vec<f64> = (0..=n).map(|j| TAU * j as f64 / n as f64).collect();
    let inverse = MonotoneCubic::new(s_knots, alpha_knots)?;

    // spectral evaluation of z and z_α at the resampled α values
    let p_sp = state.spectrum();
    let za_sp = Spectrum::from_samples(&z_alpha);
    let offset = match state.topology() {
        Topology::Closed => c64(0.0, 0.0),
        Topology::PeriodicFlat => c64(1.0, 0.0),
    };

    let ds = total_s / n as f64;
    let mut xi = Vec::with_capacity(n);
    let mut gamma = Vec::with_capacity(n);
    for i in 0..n {
        let s_i = ds * i as f64;
        let alpha_star = inverse.eval(s_i);
        let z = p_sp.eval(alpha_star) + offset * alpha_star;
        xi.push(z);
        gamma.push(1.0 / za_sp.eval(alpha_star).norm());
    }
    ArclengthSheet::new(state.topology(), ds, xi, gamma, state.time())
}
