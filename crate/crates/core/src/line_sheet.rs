//! Whole-line sheets that equal the flat sheet outside a compact window,
//! and the two-point velocity-difference evaluator.
//!
//! The raw Biot-Savart integral over the line is only conditionally
//! convergent; differences of velocities between two points stay integrable.
//! For `N_cut` beyond the perturbation support the outer integral has the
//! closed-form antiderivative `ln((z(α') - β)/(z(α) - β))`, so only the
//! inner window needs quadrature.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

use crate::c64;

#[derive(Debug, Error)]
pub enum LineError {
    #[error("line grid is invalid: need an even cell count >= 8 and positive extents")]
    BadGrid,
    #[error("perturbation support {support} exceeds the sampled half-width {half_width}")]
    SupportExceedsWidth { support: f64, half_width: f64 },
    #[error("perturbation does not vanish at the support boundary: |p| = {0:.3e}")]
    NotCompactlySupported(f64),
    #[error("cut {n_cut} must satisfy n_cut > |alpha| + |alpha'| + 1 = {required}")]
    CutTooSmall { n_cut: f64, required: f64 },
    #[error("cut {n_cut} lies outside the sampled window (half-width {half_width})")]
    CutOutOfRange { n_cut: f64, half_width: f64 },
    #[error("cut {n_cut} is inside the perturbation support {support}; the flat-tail closed form does not apply")]
    CutInsideSupport { n_cut: f64, support: f64 },
    #[error("index {0} is outside the grid")]
    BadIndex(usize),
    #[error("singular configuration: positions at indices {i} and {j} coincide")]
    Singular { i: usize, j: usize },
}

/// Sheet on `[-L, L]` with `z(β) = β` exactly for `|β| >= support`.
#[derive(Clone, Debug)]
pub struct LineSheet {
    half_width: f64,
    support: f64,
    h: f64,
    z: Vec<Complex64>,
}

impl LineSheet {
    /// Build from a perturbation `p(β)` with `z = β + p(β)`. The perturbation
    /// is required to vanish (to round-off) outside `|β| < support` and is
    /// clamped to zero there so the flat tails are exact.
    pub fn from_perturbation(
        half_width: f64,
        support: f64,
        cells: usize,
        p: impl Fn(f64) -> Complex64,
    ) -> Result<LineSheet, LineError> {
        if cells < 8 || cells % 2 != 0 || !(half_width > 0.0) || !(support > 0.0) {
            return Err(LineError::BadGrid);
        }
        if support > half_width {
            return Err(LineError::SupportExceedsWidth {
                support,
                half_width,
            });
        }
        let h = 2.0 * half_width / cells as f64;
        let mut z = Vec::with_capacity(cells + 1);
        let mut boundary_residual: f64 = 0.0;
        for j in 0..=cells {
            let beta = -half_width + h * j as f64;
            let inside = beta.abs() < support;
            let val = if inside { p(beta) } else { c64(0.0, 0.0) };
            if !inside || support - beta.abs() < 2.0 * h {
                boundary_residual = boundary_residual.max(p(beta).norm());
            }
            z.push(c64(beta, 0.0) + val);
        }
        if boundary_residual > 1e-13 {
            return Err(LineError::NotCompactlySupported(boundary_residual));
        }
        Ok(LineSheet {
            half_width,
            support,
            h,
            z,
        })
    }

    /// Smooth bump perturbation `a · exp(κ(1 - 1/(1 - (β/support)²)))` with
    /// κ = 2.5, compactly supported with maximum `a` at the origin. The
    /// sharpening keeps the truncated edge below round-off on the grids in
    /// use, so the flat tails are exact.
    pub fn bump(
        half_width: f64,
        support: f64,
        cells: usize,
        amplitude: Complex64,
    ) -> Result<LineSheet, LineError> {
        Self::from_perturbation(half_width, support, cells, move |beta| {
            let u = beta / support;
            let u2 = u * u;
            if u2 >= 1.0 {
                c64(0.0, 0.0)
            } else {
                amplitude * (2.5 * (1.0 - 1.0 / (1.0 - u2))).exp()
            }
        })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    pub fn beta(&self, idx: usize) -> f64 {
        -self.half_width + self.h * idx as f64
    }

    pub fn position(&self, idx: usize) -> Complex64 {
        self.z[idx]
    }

    /// Grid index closest to the coordinate `beta`.
    pub fn index_near(&self, beta: f64) -> usize {
        let raw = ((beta + self.half_width) / self.h).round();
        (raw.max(0.0) as usize).min(self.z.len() - 1)
    }

    /// `(z', z'')` at a node by fourth-order differences; exact `(1, 0)` in
    /// the flat tails.
    fn node_derivatives(&self, idx: usize) -> Result<(Complex64, Complex64), LineError> {
        let n = self.z.len();
        if idx < 2 || idx + 2 >= n {
            return Err(LineError::BadIndex(idx));
        }
        if self.beta(idx).abs() >= self.support {
            return Ok((c64(1.0, 0.0), c64(0.0, 0.0)));
        }
        let h = self.h;
        let zm2 = self.z[idx - 2];
        let zm1 = self.z[idx - 1];
        let z0 = self.z[idx];
        let zp1 = self.z[idx + 1];
        let zp2 = self.z[idx + 2];
        let d1 = (8.0 * (zp1 - zm1) - (zp2 - zm2)) / (12.0 * h);
        let d2 = (16.0 * (zp1 + zm1) - (zp2 + zm2) - 30.0 * z0) / (12.0 * h * h);
        Ok((d1, d2))
    }

    /// Principal-value node corrections for a pole interior to the window
    /// `[lo, hi]`: the diagonal limit `z''/(2 z'²)` plus the harmonic
    /// endpoint term `(1/12)(1/m₋² - 1/m₊²)/z'` of the omission rule, with
    /// `m∓` the step counts to the window ends. Leaves O(m⁻⁴) residuals.
    /// The caller multiplies the whole sum by h, so the (unweighted)
    /// harmonic term carries a 1/h here.
    fn pole_corrections(&self, idx: usize, lo: usize, hi: usize) -> Result<Complex64, LineError> {
        let (d1, d2) = self.node_derivatives(idx)?;
        let m_lo = (idx - lo) as f64;
        let m_hi = (hi - idx) as f64;
        let harmonic = (1.0 / (m_lo * m_lo) - 1.0 / (m_hi * m_hi)) / 12.0;
        Ok(d2 / (2.0 * d1 * d1) + harmonic / (d1 * self.h))
    }

    fn pv_quadrature(
        &self,
        target: usize,
        lo: usize,
        hi: usize,
    ) -> Result<Complex64, LineError> {
        let zt = self.z[target];
        let mut acc = c64(0.0, 0.0);
        for j in lo..=hi {
            if j == target {
                continue;
            }
            let d = zt - self.z[j];
            if d.norm_sqr() == 0.0 {
                return Err(LineError::Singular { i: target, j });
            }
            let w = if j == lo || j == hi { 0.5 } else { 1.0 };
            acc += w / d;
        }
        acc += self.pole_corrections(target, lo, hi)?;
        Ok(acc * self.h)
    }

    /// `z̄_t(α) - z̄_t(α')` through the split form: quadrature of the
    /// bracketed kernel difference over `|β| <= n_cut`, closed-form tail
    /// with `z(β) = β` beyond. Both target indices must be grid nodes.
    pub fn velocity_difference(
        &self,
        i_alpha: usize,
        i_alpha_prime: usize,
        n_cut: f64,
    ) -> Result<Complex64, LineError> {
        let n = self.z.len();
        if i_alpha >= n || i_alpha_prime >= n {
            return Err(LineError::BadIndex(i_alpha.max(i_alpha_prime)));
        }
        if i_alpha == i_alpha_prime {
            return Ok(c64(0.0, 0.0));
        }
        // snap the cut to the grid
        let m_cut = (n_cut / self.h).round() as i64;
        let cut = m_cut as f64 * self.h;
        if cut > self.half_width + 1e-12 {
            return Err(LineError::CutOutOfRange {
                n_cut: cut,
                half_width: self.half_width,
            });
        }
        if cut < self.support - 1e-12 {
            return Err(LineError::CutInsideSupport {
                n_cut: cut,
                support: self.support,
            });
        }
        let a = self.beta(i_alpha);
        let b = self.beta(i_alpha_prime);
        let required = a.abs() + b.abs() + 1.0;
        if !(cut > required) {
            return Err(LineError::CutTooSmall {
                n_cut: cut,
                required,
            });
        }

        let center = (n - 1) / 2;
        let lo = center - m_cut as usize;
        let hi = center + m_cut as usize;

        let za = self.z[i_alpha];
        let zb = self.z[i_alpha_prime];

        let mut acc = c64(0.0, 0.0);
        for j in lo..=hi {
            if j == i_alpha || j == i_alpha_prime {
                continue;
            }
            let da = za - self.z[j];
            let db = zb - self.z[j];
            if da.norm_sqr() == 0.0 {
                return Err(LineError::Singular { i: i_alpha, j });
            }
            if db.norm_sqr() == 0.0 {
                return Err(LineError::Singular {
                    i: i_alpha_prime,
                    j,
                });
            }
            let w = if j == lo || j == hi { 0.5 } else { 1.0 };
            acc += w * (1.0 / da - 1.0 / db);
        }
        // each excluded node removed one regular kernel value too; restore it
        acc += 1.0 / (za - self.z[i_alpha_prime]);
        acc -= 1.0 / (zb - self.z[i_alpha]);
        acc += self.pole_corrections(i_alpha, lo, hi)?;
        acc -= self.pole_corrections(i_alpha_prime, lo, hi)?;
        let inner = acc * self.h;

        // ∫_{|β|>cut} of the partial-fraction difference, antiderivative
        // ln((z(α') - β)/(z(α) - β)); the tails sit where z(β) = β.
        let cutc = c64(cut, 0.0);
        let tail = ((zb + cutc) / (za + cutc)).ln() - ((zb - cutc) / (za - cutc)).ln();

        Ok((inner + tail) / c64(0.0, 2.0 * PI))
    }

    /// Direct conjugate velocity at a node: principal-value quadrature over
    /// the sampled window plus the closed-form flat tail, with the outer
    /// limit taken symmetrically.
    pub fn direct_velocity(&self, idx: usize) -> Result<Complex64, LineError> {
        let n = self.z.len();
        if idx >= n {
            return Err(LineError::BadIndex(idx));
        }
        let inner = self.pv_quadrature(idx, 0, n - 1)?;
        let z = self.z[idx];
        let l = self.half_width;
        let tail = if z.im == 0.0 {
            // pole on the real axis: tails are real principal values
            c64(((l - z.re) / (l + z.re)).ln(), 0.0)
        } else {
            let main = ((z - l) / (z + l)).ln();
            main - c64(0.0, PI * z.im.signum())
        };
        Ok((inner + tail) / c64(0.0, 2.0 * PI))
    }
}
