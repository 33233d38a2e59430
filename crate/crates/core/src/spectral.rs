//! Fourier machinery on uniform periodic grids.
//!
//! All sheet representations live on N uniformly spaced nodes of a
//! 2π-periodic variable. Coefficients are stored in FFT order with the
//! convention `c_k = (1/N) Σ_j f_j exp(-ik α_j)`, so `f_j = Σ_k c_k exp(ik α_j)`.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::sync::{Mutex, OnceLock};

use crate::c64;

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

/// Forward DFT with 1/N normalization.
pub fn fft_forward(samples: &[Complex64]) -> Vec<Complex64> {
    let n = samples.len();
    let fft = planner().lock().unwrap().plan_fft_forward(n);
    let mut buf = samples.to_vec();
    fft.process(&mut buf);
    let scale = 1.0 / n as f64;
    for c in &mut buf {
        *c *= scale;
    }
    buf
}

/// Inverse DFT matching [`fft_forward`].
pub fn fft_inverse(coeffs: &[Complex64]) -> Vec<Complex64> {
    let n = coeffs.len();
    let fft = planner().lock().unwrap().plan_fft_inverse(n);
    let mut buf = coeffs.to_vec();
    fft.process(&mut buf);
    buf
}

/// Fourier coefficients of one periodic sample set.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn from_samples(samples: &[Complex64]) -> Self {
        Spectrum {
            coeffs: fft_forward(samples),
        }
    }

    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Self {
        Spectrum { coeffs }
    }

    pub fn n(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Signed wavenumber of the FFT-order index: 0,1,..,N/2-1,-N/2,..,-1.
    pub fn wavenumber(&self, idx: usize) -> i64 {
        let n = self.coeffs.len() as i64;
        let i = idx as i64;
        if 2 * i < n {
            i
        } else {
            i - n
        }
    }

    /// Coefficient of signed wavenumber `k` (taken modulo N).
    pub fn coeff(&self, k: i64) -> Complex64 {
        let n = self.coeffs.len() as i64;
        self.coeffs[(k.rem_euclid(n)) as usize]
    }

    pub fn set_coeff(&mut self, k: i64, value: Complex64) {
        let n = self.coeffs.len() as i64;
        self.coeffs[(k.rem_euclid(n)) as usize] = value;
    }

    pub fn to_samples(&self) -> Vec<Complex64> {
        fft_inverse(&self.coeffs)
    }

    /// Spectral derivative. The Nyquist mode is zeroed: for band-limited data
    /// it carries no content and zeroing keeps derivatives of real data real.
    pub fn derivative(&self) -> Spectrum {
        let n = self.coeffs.len();
        let mut out = Vec::with_capacity(n);
        for (idx, &c) in self.coeffs.iter().enumerate() {
            let k = self.wavenumber(idx);
            if n % 2 == 0 && idx == n / 2 {
                out.push(c64(0.0, 0.0));
            } else {
                out.push(c * c64(0.0, k as f64));
            }
        }
        Spectrum { coeffs: out }
    }

    /// Evaluate the trigonometric interpolant at an arbitrary point.
    pub fn eval(&self, x: f64) -> Complex64 {
        let mut acc = c64(0.0, 0.0);
        for (idx, &c) in self.coeffs.iter().enumerate() {
            let k = self.wavenumber(idx) as f64;
            acc += c * c64(0.0, k * x).exp();
        }
        acc
    }

    /// Evaluate `∫_0^x f` of the interpolant: mean part integrates to
    /// `c_0 x`, every other mode to `c_k (e^{ikx}-1)/(ik)`.
    pub fn antiderivative_eval(&self, x: f64) -> Complex64 {
        let mut acc = self.coeffs[0] * x;
        for (idx, &c) in self.coeffs.iter().enumerate() {
            let k = self.wavenumber(idx);
            if k == 0 {
                continue;
            }
            let ik = c64(0.0, k as f64);
            acc += c * ((ik * x).exp() - 1.0) / ik;
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Zero every mode below `level * max_k |c_k|`; returns how many were cut.
    pub fn krasny_filter(&mut self, level: f64) -> usize {
        if level <= 0.0 {
            return 0;
        }
        let floor = level * self.max_abs();
        let mut cut = 0;
        for c in &mut self.coeffs {
            let norm = c.norm();
            if norm > 0.0 && norm < floor {
                *c = c64(0.0, 0.0);
                cut += 1;
            }
        }
        cut
    }

    /// Magnitude of the mode pair `±k`, as the larger of the two.
    pub fn mode_magnitude(&self, k: i64) -> f64 {
        self.coeff(k).norm().max(self.coeff(-k).norm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|j| TAU * j as f64 / n as f64).collect()
    }

    #[test]
    fn round_trip_reproduces_samples() {
        let n = 64;
        let samples: Vec<Complex64> = grid(n)
            .iter()
            .map(|&a| c64((3.0 * a).cos(), (2.0 * a).sin() + 0.3))
            .collect();
        let back = Spectrum::from_samples(&samples).to_samples();
        let max_abs = samples.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (a, b) in samples.iter().zip(&back) {
            assert!((a - b).norm() <= 1e-12 * max_abs);
        }
    }

    #[test]
    fn derivative_of_single_mode() {
        let n = 32;
        let samples: Vec<Complex64> = grid(n).iter().map(|&a| c64(0.0, 5.0 * a).exp()).collect();
        let deriv = Spectrum::from_samples(&samples).derivative().to_samples();
        for (j, &a) in grid(n).iter().enumerate() {
            let expect = c64(0.0, 5.0) * c64(0.0, 5.0 * a).exp();
            assert!((deriv[j] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn antiderivative_matches_closed_form() {
        let n = 64;
        // f = 2 + cos(3a): ∫_0^x f = 2x + sin(3x)/3
        let samples: Vec<Complex64> = grid(n).iter().map(|&a| c64(2.0 + (3.0 * a).cos(), 0.0)).collect();
        let sp = Spectrum::from_samples(&samples);
        for &x in &[0.3, 1.7, 4.0, TAU] {
            let expect = 2.0 * x + (3.0 * x).sin() / 3.0;
            assert!((sp.antiderivative_eval(x) - c64(expect, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn filter_is_idempotent_and_keeps_max() {
        let n = 32;
        let samples: Vec<Complex64> = grid(n)
            .iter()
            .map(|&a| c64(a.cos() + 1e-14 * (7.0 * a).cos(), 0.0))
            .collect();
        let mut sp = Spectrum::from_samples(&samples);
        let cut1 = sp.krasny_filter(1e-12);
        assert!(cut1 > 0);
        let once = sp.clone();
        let cut2 = sp.krasny_filter(1e-12);
        assert_eq!(cut2, 0);
        assert_eq!(once, sp);
    }
}
