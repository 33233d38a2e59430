//! Numerical laboratory for singular vortex-sheet dynamics.
//!
//! The crate evolves sampled sheet states under the self-induced Biot-Savart
//! velocity, provides closed-form and linearized reference solutions, fast
//! treecode summation, and the regularity diagnostics (chord-arc constants,
//! local BMO of `ln z_alpha`, vortex-strength bounds, Fourier analyticity
//! width, weak-form residuals) used to monitor singularity formation.
//!
//! Modules:
//! - [`sheet`]: sheet representations, spectral derivatives, generators.
//! - [`arclength`]: arclength/vortex-density form and conversions.
//! - [`curve`]: open test curves (log spiral, segments).
//! - [`kernel`]: singular velocity sums, off-sheet field, Cauchy operator.
//! - [`line_sheet`]: whole-line sheets with flat tails and the two-point
//!   velocity-difference evaluator.
//! - [`treecode`]: Barnes-Hut style acceleration of the velocity sums.
//! - [`evolve`]: Runge-Kutta time integration with spectral filtering.
//! - [`oracles`]: closed-form singular solution and linearized dynamics.
//! - [`diagnostics`]: regularity functionals and hypothesis certification.
//! - [`io`]: snapshot CSV and trajectory directory persistence.

pub mod arclength;
pub mod curve;
pub mod diagnostics;
pub mod evolve;
pub mod io;
pub mod kernel;
pub mod line_sheet;
pub mod oracles;
pub mod sheet;
pub mod spectral;
pub mod treecode;

pub use num_complex::Complex64;

/// Shorthand complex constructor used throughout the crate.
#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
