//! Closed-form and semi-analytic reference solutions.
//!
//! The displaced-sheet profile
//! `S(α,t) = ε(1-i){(1 - e^{-t/2-iα})^{1+μ} - (1 - e^{-t/2+iα})^{1+μ}}`
//! solves the dynamics linearized about the flat sheet; it is analytic for
//! `t > 0` but its second α-derivative blows up at `α = 0` as `t → 0` for
//! `μ ∈ (0,1)`. Inverting time gives a profile that loses analyticity at
//! `t = 0` while the vortex strength stays bounded away from 0 and ∞.
//!
//! The linearized operator acts mode-wise: with `w = Σ ŵ_k e^{ikα}` the
//! conjugate perturbation velocity is `∂_t w̄ = (i/2) Σ |k| ŵ_k e^{ikα}`,
//! equivalently `d/dt ŵ_k = -(i/2)|k| conj(ŵ_{-k})`. Each `±k` pair carries
//! growth rates `±|k|/2`; the growing eigenvector is `ε(1-i) sin(kα)`.

use num_complex::Complex64;
use std::f64::consts::TAU;
use thiserror::Error;

use crate::c64;
use crate::sheet::{SheetError, SheetState};
use crate::spectral::Spectrum;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum TimeDirection {
    Forward,
    Inverted,
}

/// Parameters of the closed-form profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct COParams {
    pub epsilon: f64,
    pub mu: f64,
    pub direction: TimeDirection,
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("mu = {0} must lie in (0, 1)")]
    BadMu(f64),
    #[error("epsilon = {0} must be positive")]
    BadEpsilon(f64),
    #[error("t = {t} is outside the valid range for {direction:?} time (branch ambiguity)")]
    TimeOutOfRange { t: f64, direction: TimeDirection },
    #[error("epsilon too large: max |S_alpha| = {0:.3} >= 1, strength bounds undefined")]
    EpsilonTooLarge(f64),
    #[error(transparent)]
    Sheet(#[from] SheetError),
}

impl COParams {
    pub fn new(epsilon: f64, mu: f64, direction: TimeDirection) -> Result<COParams, OracleError> {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(OracleError::BadMu(mu));
        }
        if !(epsilon > 0.0) {
            return Err(OracleError::BadEpsilon(epsilon));
        }
        Ok(COParams {
            epsilon,
            mu,
            direction,
        })
    }

    fn forward_time(&self, t: f64) -> Result<f64, OracleError> {
        match self.direction {
            TimeDirection::Forward if t >= 0.0 => Ok(t),
            TimeDirection::Inverted if t <= 0.0 => Ok(-t),
            direction => Err(OracleError::TimeOutOfRange { t, direction }),
        }
    }
}

/// Principal branch of `w^(1+μ)`; valid here since
/// `Re(1 - e^{-t/2∓iα}) >= 1 - e^{-t/2} >= 0` for `t >= 0`.
fn pow_principal(w: Complex64, e: f64) -> Complex64 {
    if w.norm_sqr() == 0.0 {
        return c64(0.0, 0.0);
    }
    w.powf(e)
}

fn s_forward(epsilon: f64, mu: f64, alpha: f64, t: f64) -> Complex64 {
    let em = (-0.5 * t).exp();
    let w_minus = c64(1.0, 0.0) - em * c64(0.0, -alpha).exp();
    let w_plus = c64(1.0, 0.0) - em * c64(0.0, alpha).exp();
    epsilon * c64(1.0, -1.0) * (pow_principal(w_minus, 1.0 + mu) - pow_principal(w_plus, 1.0 + mu))
}

/// Evaluate the profile. Inverted direction maps `t <= 0` to the forward
/// profile by `t -> -t` and conjugation (conjugation plus time reversal
/// preserves the linearized dynamics).
pub fn co_solution(p: &COParams, alpha: f64, t: f64) -> Result<Complex64, OracleError> {
    let tf = p.forward_time(t)?;
    let s = s_forward(p.epsilon, p.mu, alpha, tf);
    Ok(match p.direction {
        TimeDirection::Forward => s,
        TimeDirection::Inverted => s.conj(),
    })
}

/// `∂_α S` in closed form.
pub fn co_alpha_derivative(p: &COParams, alpha: f64, t: f64) -> Result<Complex64, OracleError> {
    let tf = p.forward_time(t)?;
    let d = s_alpha_forward(p.epsilon, p.mu, alpha, tf);
    Ok(match p.direction {
        TimeDirection::Forward => d,
        TimeDirection::Inverted => d.conj(),
    })
}

fn s_alpha_forward(epsilon: f64, mu: f64, alpha: f64, t: f64) -> Complex64 {
    let em = (-0.5 * t).exp();
    let e_minus = em * c64(0.0, -alpha).exp();
    let e_plus = em * c64(0.0, alpha).exp();
    let w_minus = c64(1.0, 0.0) - e_minus;
    let w_plus = c64(1.0, 0.0) - e_plus;
    // d/dα (1 - e^{-t/2-iα})^{1+μ} = (1+μ) w_-^μ (+i e^{-t/2-iα})
    let i = c64(0.0, 1.0);
    epsilon
        * c64(1.0, -1.0)
        * (1.0 + mu)
        * (pow_principal(w_minus, mu) * i * e_minus + pow_principal(w_plus, mu) * i * e_plus)
}

/// `∂_t S` in closed form (forward direction; the inverted profile's time
/// derivative is `-conj(∂_t S(α, -t))`).
pub fn co_time_derivative(p: &COParams, alpha: f64, t: f64) -> Result<Complex64, OracleError> {
    let tf = p.forward_time(t)?;
    let em = (-0.5 * tf).exp();
    let e_minus = em * c64(0.0, -alpha).exp();
    let e_plus = em * c64(0.0, alpha).exp();
    let w_minus = c64(1.0, 0.0) - e_minus;
    let w_plus = c64(1.0, 0.0) - e_plus;
    // d/dt (1 - e^{-t/2∓iα})^{1+μ} = (1+μ) w^μ (e^{-t/2∓iα}/2)
    let d = p.epsilon
        * c64(1.0, -1.0)
        * (1.0 + p.mu)
        * 0.5
        * (pow_principal(w_minus, p.mu) * e_minus - pow_principal(w_plus, p.mu) * e_plus);
    Ok(match p.direction {
        TimeDirection::Forward => d,
        TimeDirection::Inverted => -d.conj(),
    })
}

/// Sampled sheet `z = α + S(α, t)` as a periodic-flat state.
pub fn co_profile_state(p: &COParams, n: usize, t: f64) -> Result<SheetState, OracleError> {
    let mut samples = Vec::with_capacity(n);
    for j in 0..n {
        let alpha = TAU * j as f64 / n as f64;
        samples.push(co_solution(p, alpha, t)?);
    }
    let mut state = SheetState::from_periodic_part(
        crate::sheet::Topology::PeriodicFlat,
        samples,
        t,
    )?;
    state.set_time(t);
    Ok(state)
}

/// Three-point second difference of the singular-time profile, centered at
/// `α = h` with spacing `h`: `D₂(h) = (S(2h) - 2 S(h) + S(0)) / h²`.
/// `|D₂(h)|` grows like `h^(μ-1)` as `h → 0`.
pub fn co_second_difference(p: &COParams, h: f64) -> Result<Complex64, OracleError> {
    let t0 = match p.direction {
        TimeDirection::Forward => 0.0,
        TimeDirection::Inverted => -0.0,
    };
    let s0 = co_solution(p, 0.0, t0)?;
    let s1 = co_solution(p, h, t0)?;
    let s2 = co_solution(p, 2.0 * h, t0)?;
    Ok((s2 - 2.0 * s1 + s0) / (h * h))
}

/// Log-log regression of `|D₂(h)|` over a geometric ladder of offsets;
/// the contract is a slope of `μ - 1`.
pub fn co_blowup_exponent(p: &COParams, h_min: f64, h_max: f64, count: usize) -> Result<f64, OracleError> {
    assert!(count >= 2 && h_min > 0.0 && h_max > h_min);
    let mut xs = Vec::with_capacity(count);
    let mut ys = Vec::with_capacity(count);
    let ratio = (h_max / h_min).powf(1.0 / (count - 1) as f64);
    let mut h = h_min;
    for _ in 0..count {
        let d2 = co_second_difference(p, h)?;
        xs.push(h.ln());
        ys.push(d2.norm().ln());
        h *= ratio;
    }
    Ok(linear_slope(&xs, &ys))
}

fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Mode-wise linearized conjugate velocity: samples in, samples of
/// `∂_t w̄` out. Cross-validated against the full nonlinear evaluation at
/// small amplitude before use as an oracle (see the module tests).
pub fn linearized_velocity(w: &[Complex64]) -> Vec<Complex64> {
    let sp = Spectrum::from_samples(w);
    let n = sp.n();
    let mut coeffs = Vec::with_capacity(n);
    for (idx, &c) in sp.coeffs().iter().enumerate() {
        let k = sp.wavenumber(idx).unsigned_abs() as f64;
        coeffs.push(c * c64(0.0, 0.5 * k));
    }
    Spectrum::from_coeffs(coeffs).to_samples()
}

/// Grid min/max of the vortex strength `1/|1 + S_α|` of the profile sheet.
pub fn co_strength_bounds(p: &COParams, t: f64, n: usize) -> Result<(f64, f64), OracleError> {
    let mut min = f64::INFINITY;
    let mut max: f64 = 0.0;
    let mut max_salpha: f64 = 0.0;
    for j in 0..n {
        let alpha = TAU * j as f64 / n as f64;
        let sa = co_alpha_derivative(p, alpha, t)?;
        max_salpha = max_salpha.max(sa.norm());
        let strength = 1.0 / (c64(1.0, 0.0) + sa).norm();
        min = min.min(strength);
        max = max.max(strength);
    }
    if max_salpha >= 1.0 {
        return Err(OracleError::EpsilonTooLarge(max_salpha));
    }
    Ok((min, max))
}

/// The growing eigenvector of the `±k` mode pair at amplitude ε:
/// `z = α + ε(1-i) sin(kα)`, growth rate `|k|/2`.
pub fn kh_growing_mode(n: usize, k: i64, epsilon: f64) -> Result<SheetState, SheetError> {
    let half = epsilon * c64(1.0, -1.0) * c64(0.0, -0.5); // ε(1-i)/(2i)
    SheetState::flat_perturbed(n, &[(k, half), (-k, -half)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{velocity_periodic, KernelSpec};

    fn forward(eps: f64, mu: f64) -> COParams {
        COParams::new(eps, mu, TimeDirection::Forward).unwrap()
    }

    #[test]
    fn parameter_validation() {
        assert!(COParams::new(0.01, 0.0, TimeDirection::Forward).is_err());
        assert!(COParams::new(0.01, 1.0, TimeDirection::Forward).is_err());
        assert!(COParams::new(-0.01, 0.5, TimeDirection::Forward).is_err());
        let p = forward(0.01, 0.5);
        assert!(co_solution(&p, 1.0, -0.5).is_err()); // forward needs t >= 0
        let inv = COParams::new(0.01, 0.5, TimeDirection::Inverted).unwrap();
        assert!(co_solution(&inv, 1.0, 0.5).is_err()); // inverted needs t <= 0
    }

    #[test]
    fn vanishes_at_alpha_zero_and_large_time() {
        let p = forward(0.01, 0.5);
        for &t in &[0.0, 0.3, 2.0, 10.0] {
            assert_eq!(co_solution(&p, 0.0, t).unwrap(), c64(0.0, 0.0));
        }
        let far = co_solution(&p, 1.3, 60.0).unwrap();
        assert!(far.norm() < 1e-12);
    }

    #[test]
    fn dual_power_implementations_agree() {
        // library principal power against explicit polar evaluation
        let p = forward(0.01, 0.5);
        let alpha = std::f64::consts::FRAC_PI_2;
        let lib = co_solution(&p, alpha, 0.0).unwrap();
        let polar_pow = |w: Complex64, e: f64| -> Complex64 {
            let (r, th) = w.to_polar();
            Complex64::from_polar(r.powf(e), th * e)
        };
        let em = 1.0;
        let w_minus = c64(1.0, 0.0) - em * c64(0.0, -alpha).exp();
        let w_plus = c64(1.0, 0.0) - em * c64(0.0, alpha).exp();
        let manual =
            0.01 * c64(1.0, -1.0) * (polar_pow(w_minus, 1.5) - polar_pow(w_plus, 1.5));
        assert!((lib - manual).norm() < 1e-14);
    }

    #[test]
    fn reflection_and_conjugation_symmetries() {
        // derived identities: S(-α,t) = -S(α,t) and conj(S) = -i S
        let p = forward(0.02, 0.37);
        for &alpha in &[0.3, 1.1, 2.9] {
            for &t in &[0.0, 0.5, 2.0] {
                let s = co_solution(&p, alpha, t).unwrap();
                let s_neg = co_solution(&p, -alpha, t).unwrap();
                assert!((s_neg + s).norm() < 1e-14 * s.norm().max(1e-30));
                assert!((s.conj() - c64(0.0, -1.0) * s).norm() < 1e-13 * s.norm().max(1e-30));
            }
        }
    }

    #[test]
    fn alpha_derivative_matches_differences() {
        let p = forward(0.01, 0.5);
        let h = 1e-5;
        for &alpha in &[0.7, 2.0] {
            let fd = (co_solution(&p, alpha + h, 1.0).unwrap()
                - co_solution(&p, alpha - h, 1.0).unwrap())
                / (2.0 * h);
            let an = co_alpha_derivative(&p, alpha, 1.0).unwrap();
            assert!((fd - an).norm() < 1e-8);
        }
    }

    #[test]
    fn time_derivative_matches_differences() {
        let p = forward(0.01, 0.5);
        let h = 1e-6;
        for &t in &[0.5, 2.0] {
            let fd = (co_solution(&p, 1.2, t + h).unwrap() - co_solution(&p, 1.2, t - h).unwrap())
                / (2.0 * h);
            let an = co_time_derivative(&p, 1.2, t).unwrap();
            assert!((fd - an).norm() < 1e-8);
        }
    }

    #[test]
    fn blowup_exponent_tracks_mu() {
        for &mu in &[0.3, 0.5, 0.7] {
            let p = COParams::new(0.01, mu, TimeDirection::Inverted).unwrap();
            let slope = co_blowup_exponent(&p, 1e-6, 1e-2, 25).unwrap();
            assert!(
                (slope - (mu - 1.0)).abs() < 0.05,
                "mu={mu}: slope {slope:.4}"
            );
        }
    }

    #[test]
    fn first_derivative_stays_bounded() {
        let p = forward(0.01, 0.5);
        let mut h = 1e-2;
        let mut last = 0.0;
        while h > 1e-7 {
            let d1 = (co_solution(&p, 2.0 * h, 0.0).unwrap() - co_solution(&p, 0.0, 0.0).unwrap())
                / (2.0 * h);
            last = d1.norm();
            assert!(last < 1.0, "first difference grew to {last}");
            h *= 0.1;
        }
        assert!(last < 0.1);
    }

    #[test]
    fn mu_near_one_flattens_blowup() {
        let p = COParams::new(0.01, 0.95, TimeDirection::Inverted).unwrap();
        let slope = co_blowup_exponent(&p, 1e-6, 1e-2, 25).unwrap();
        assert!(slope.abs() < 0.1, "slope {slope:.4}");
    }

    #[test]
    fn linearized_velocity_is_linear_and_zero_on_zero() {
        let n = 64;
        let zero = vec![c64(0.0, 0.0); n];
        assert!(linearized_velocity(&zero).iter().all(|v| v.norm() == 0.0));
        let w1: Vec<Complex64> = (0..n)
            .map(|j| c64(0.0, TAU * j as f64 / n as f64).exp() * c64(0.3, 0.1))
            .collect();
        let w2: Vec<Complex64> = (0..n)
            .map(|j| c64(0.0, -2.0 * TAU * j as f64 / n as f64).exp() * c64(0.0, 0.2))
            .collect();
        let combo: Vec<Complex64> = w1
            .iter()
            .zip(&w2)
            .map(|(a, b)| 1.7 * a - c64(0.0, 0.4) * b)
            .collect();
        let lhs = linearized_velocity(&combo);
        let v1 = linearized_velocity(&w1);
        let v2 = linearized_velocity(&w2);
        for i in 0..n {
            let rhs = 1.7 * v1[i] - c64(0.0, 0.4) * v2[i];
            assert!((lhs[i] - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn linearized_validated_against_nonlinear_kernel() {
        // amplitude 1e-7: the nonlinear evaluation differs from ε·linearized
        // by O(ε²), i.e. a relative error of order ε
        let n = 128;
        let eps = 1e-7;
        let w: Vec<Complex64> = (0..n)
            .map(|j| {
                let a = TAU * j as f64 / n as f64;
                c64(0.0, a).exp() * c64(0.4, 0.0) + c64(0.0, -3.0 * a).exp() * c64(0.0, 0.2)
            })
            .collect();
        let modes: Vec<Complex64> = w.iter().map(|v| eps * v).collect();
        let state = SheetState::from_periodic_part(
            crate::sheet::Topology::PeriodicFlat,
            modes,
            0.0,
        )
        .unwrap();
        let nonlinear = velocity_periodic(&state, &KernelSpec::point_vortex()).unwrap();
        let linear = linearized_velocity(&w);
        let scale = linear.iter().map(|v| v.norm()).fold(0.0, f64::max) * eps;
        let mut max_err: f64 = 0.0;
        for i in 0..n {
            max_err = max_err.max((nonlinear[i] - eps * linear[i]).norm());
        }
        assert!(max_err / scale < 1e-4, "relative error {:.3e}", max_err / scale);
    }

    #[test]
    fn quadratic_convergence_of_linearization_error() {
        let n = 64;
        let w: Vec<Complex64> = (0..n)
            .map(|j| c64(0.0, TAU * j as f64 / n as f64).exp())
            .collect();
        let linear = linearized_velocity(&w);
        let err_at = |eps: f64| -> f64 {
            let samples: Vec<Complex64> = w.iter().map(|v| eps * v).collect();
            let state = SheetState::from_periodic_part(
                crate::sheet::Topology::PeriodicFlat,
                samples,
                0.0,
            )
            .unwrap();
            let v = velocity_periodic(&state, &KernelSpec::point_vortex()).unwrap();
            v.iter()
                .zip(&linear)
                .map(|(a, b)| (a - eps * b).norm())
                .fold(0.0, f64::max)
        };
        let e1 = err_at(1e-3);
        let e2 = err_at(5e-4);
        let ratio = e1 / e2;
        assert!((3.0..5.0).contains(&ratio), "O(ε²) ratio {ratio}");
    }

    #[test]
    fn profile_solves_linearized_equation() {
        let p = forward(0.01, 0.5);
        let n = 512;
        for &t in &[0.1, 1.0, 3.0] {
            let state = co_profile_state(&p, n, t).unwrap();
            let lin = linearized_velocity(state.periodic_part());
            let mut max_err: f64 = 0.0;
            let mut max_val: f64 = 0.0;
            for (j, v) in lin.iter().enumerate() {
                let alpha = TAU * j as f64 / n as f64;
                let ds_dt = co_time_derivative(&p, alpha, t).unwrap();
                max_err = max_err.max((v.conj() - ds_dt).norm());
                max_val = max_val.max(ds_dt.norm());
            }
            assert!(
                max_err / max_val < 1e-6,
                "t={t}: relative residual {:.3e}",
                max_err / max_val
            );
        }
    }

    #[test]
    fn strength_bounds_flatten_as_epsilon_vanishes() {
        for &t in &[0.0, 1.0, 5.0] {
            let p = forward(1e-9, 0.5);
            let (lo, hi) = co_strength_bounds(&p, t, 512).unwrap();
            assert!((lo - 1.0).abs() < 1e-6 && (hi - 1.0).abs() < 1e-6);
        }
        let p = forward(0.01, 0.5);
        for &t in &[0.0, 0.5, 2.0, 5.0] {
            let (lo, hi) = co_strength_bounds(&p, t, 4096).unwrap();
            assert!(lo > 0.9 && hi < 1.1, "t={t}: ({lo}, {hi})");
        }
        // bounds continuous as t -> 0
        let (l0, h0) = co_strength_bounds(&p, 0.0, 4096).unwrap();
        let (l1, h1) = co_strength_bounds(&p, 1e-6, 4096).unwrap();
        assert!((l0 - l1).abs() < 1e-4 && (h0 - h1).abs() < 1e-4);
    }

    #[test]
    fn epsilon_too_large_rejected() {
        let p = forward(0.9, 0.5);
        assert!(matches!(
            co_strength_bounds(&p, 0.0, 512),
            Err(OracleError::EpsilonTooLarge(_))
        ));
    }

    #[test]
    fn growing_mode_is_eigenvector() {
        // d/dt ŵ_k = (|k|/2) ŵ_k for the seeded pair
        let n = 64;
        let state = kh_growing_mode(n, 2, 1e-6).unwrap();
        let lin = linearized_velocity(state.periodic_part());
        // conj to get ∂_t w, then compare with state scaled by rate 1
        let dw: Vec<Complex64> = lin.iter().map(|v| v.conj()).collect();
        for (a, b) in dw.iter().zip(state.periodic_part()) {
            assert!((a - b).norm() < 1e-12 * 1e-6 + 1e-18, "{a} vs {b}");
        }
    }
}
