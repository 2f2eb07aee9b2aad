//! Spin-orbit stroboscopic maps.
//!
//! A triaxial satellite on a fixed Keplerian orbit, spin axis normal to the
//! orbit plane: ẋ = y, ẏ = −ε (a/r)³ sin(2x − 2f) plus, in the dissipative
//! case, a tidal friction term. Integrating with the modified Euler scheme at
//! step h = 2π/n and sampling once per orbital period gives a discrete map of
//! the cylinder with constant Jacobian determinant, i.e. a conformally
//! symplectic map whose factor is the accumulated per-step contraction.

use super::{CylinderState, Mat2, ModelError};
use std::f64::consts::TAU;
use std::sync::Arc;

/// Orbital radius and true anomaly at one instant (semimajor axis a = 1,
/// mean motion 1, so time equals mean anomaly).
#[derive(Debug, Clone, Copy)]
pub struct KeplerPoint {
    pub r: f64,
    pub f: f64,
}

/// Solve Kepler's equation E − e sin E = t (mod 2π) by Newton iteration and
/// return (r, f) = (1 − e cos E, true anomaly).
pub fn kepler_state(e: f64, t: f64) -> KeplerPoint {
    assert!((0.0..1.0).contains(&e), "eccentricity must be in [0, 1)");
    let m = t.rem_euclid(TAU);
    let mut big_e = if e < 0.8 { m } else { std::f64::consts::PI };
    for _ in 0..60 {
        let g = big_e - e * big_e.sin() - m;
        if g.abs() < 1e-13 {
            break;
        }
        big_e -= g / (1.0 - e * big_e.cos());
    }
    let r = 1.0 - e * big_e.cos();
    let f = 2.0 * f64::atan2(
        (1.0 + e).sqrt() * (big_e / 2.0).sin(),
        (1.0 - e).sqrt() * (big_e / 2.0).cos(),
    );
    KeplerPoint { r, f }
}

/// Orbit averages of a⁶/r⁶ and a⁶ḟ/r⁶ over one period:
/// L̄(e) = (1−e²)^{−9/2} (1 + 3e² + 3e⁴/8),
/// N̄(e) = (1−e²)^{−6} (1 + 15e²/2 + 45e⁴/8 + 5e⁶/16).
pub fn averaged_torque_coefficients(e: f64) -> (f64, f64) {
    let e2 = e * e;
    let one = 1.0 - e2;
    let lbar = one.powf(-4.5) * (1.0 + 3.0 * e2 + 0.375 * e2 * e2);
    let nbar = one.powi(-6)
        * (1.0 + 7.5 * e2 + 5.625 * e2 * e2 + 0.3125 * e2 * e2 * e2);
    (lbar, nbar)
}

/// Dissipative constant from physical inputs:
/// K_d = 3n (k₂/(ξQ)) (R_e/a)³ (M/m).
pub fn kd_from_physical(
    mean_motion: f64,
    love_number: f64,
    structure_xi: f64,
    quality_factor: f64,
    radius_over_a: f64,
    mass_ratio: f64,
) -> f64 {
    3.0 * mean_motion * love_number / (structure_xi * quality_factor)
        * radius_over_a.powi(3)
        * mass_ratio
}

#[derive(Debug, Clone)]
pub struct SpinOrbitParams {
    /// Orbital eccentricity in [0, 0.5].
    pub eccentricity: f64,
    /// Equatorial flattening ε = (3/2)(I₂−I₁)/I₃.
    pub epsilon: f64,
    /// Dissipative constant; 0 selects the conservative scheme.
    pub k_d: f64,
    /// Drift μ; defaults to N̄(e)/L̄(e) when `None`. It is the unknown the
    /// invariance solver adjusts.
    pub mu_override: Option<f64>,
    /// Number of Euler sub-steps per period, h = 2π/n (must divide the period).
    pub n_substeps: usize,
    /// Averaged tidal torque −λ(ẋ − μ) versus time-dependent −K_d(L(e,t)ẋ − N(e,t)).
    pub averaged: bool,
}

impl SpinOrbitParams {
    /// Moon-like preset: e = 0.0549, ε = 1e−4, K_d = 1e−8, 2⁹ sub-steps.
    pub fn moon_like() -> Self {
        Self {
            eccentricity: 0.0549,
            epsilon: 1e-4,
            k_d: 1e-8,
            mu_override: None,
            n_substeps: 512,
            averaged: true,
        }
    }

    pub fn conservative(eccentricity: f64, epsilon: f64, n_substeps: usize) -> Self {
        Self { eccentricity, epsilon, k_d: 0.0, mu_override: None, n_substeps, averaged: true }
    }

    /// λ = K_d L̄(e).
    pub fn lambda_diss(&self) -> f64 {
        self.k_d * averaged_torque_coefficients(self.eccentricity).0
    }
}

/// Per-sub-step precomputed orbit data.
#[derive(Debug)]
struct Schedule {
    /// (a/r)³ at each t_j.
    amp: Vec<f64>,
    /// true anomaly f(t_j)
    anomaly: Vec<f64>,
    /// a⁶/r⁶ at t_j (time-dependent torque only)
    l_t: Vec<f64>,
    /// a⁶ ḟ / r⁶ at t_j
    n_t: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SpinOrbitMap {
    params: SpinOrbitParams,
    schedule: Arc<Schedule>,
    mu: f64,
    h: f64,
    conformal: f64,
}

impl SpinOrbitMap {
    pub fn new(params: SpinOrbitParams) -> Result<Self, ModelError> {
        if params.n_substeps == 0 {
            return Err(ModelError::InvalidParameter("n_substeps must be positive".into()));
        }
        if !(0.0..=0.5).contains(&params.eccentricity) {
            return Err(ModelError::InvalidParameter(format!(
                "eccentricity {} outside [0, 0.5]",
                params.eccentricity
            )));
        }
        let h = TAU / params.n_substeps as f64;
        let e = params.eccentricity;
        let sqrt_om = (1.0 - e * e).sqrt();
        let mut amp = Vec::with_capacity(params.n_substeps);
        let mut anomaly = Vec::with_capacity(params.n_substeps);
        let mut l_t = Vec::with_capacity(params.n_substeps);
        let mut n_t = Vec::with_capacity(params.n_substeps);
        for j in 0..params.n_substeps {
            let kp = kepler_state(e, j as f64 * h);
            amp.push(kp.r.powi(-3));
            anomaly.push(kp.f);
            l_t.push(kp.r.powi(-6));
            // ḟ = √(1−e²)/r²
            n_t.push(sqrt_om * kp.r.powi(-8));
        }
        let (lbar, nbar) = averaged_torque_coefficients(e);
        let mu = params.mu_override.unwrap_or(if params.k_d == 0.0 { 0.0 } else { nbar / lbar });
        let conformal = if params.k_d == 0.0 {
            1.0
        } else if params.averaged {
            let lam = params.k_d * lbar;
            if lam * h >= 1.0 {
                return Err(ModelError::StepTooLarge(lam * h));
            }
            (1.0 - lam * h).powi(params.n_substeps as i32)
        } else {
            let mut prod = 1.0;
            for &l in &l_t {
                let c = 1.0 - params.k_d * l * h;
                if c <= 0.0 {
                    return Err(ModelError::StepTooLarge(params.k_d * l * h));
                }
                prod *= c;
            }
            prod
        };
        Ok(Self {
            params,
            schedule: Arc::new(Schedule { amp, anomaly, l_t, n_t }),
            mu,
            h,
            conformal,
        })
    }

    pub fn params(&self) -> &SpinOrbitParams {
        &self.params
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        let mut m = self.clone();
        m.mu = mu;
        m.params.mu_override = Some(mu);
        m
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        let mut m = self.clone();
        m.params.epsilon = epsilon;
        m
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Computed product (1 − λh)^{2π/h}: the factor is reported, not assumed.
    pub fn conformal_factor(&self) -> f64 {
        self.conformal
    }

    /// One step contraction factor and drift source term at sub-step j.
    fn step_coeffs(&self, j: usize) -> (f64, f64) {
        if self.params.k_d == 0.0 {
            (1.0, 0.0)
        } else if self.params.averaged {
            let lam = self.params.lambda_diss();
            (1.0 - lam * self.h, lam * self.mu * self.h)
        } else {
            (
                1.0 - self.params.k_d * self.schedule.l_t[j] * self.h,
                self.params.k_d * self.schedule.n_t[j] * self.h,
            )
        }
    }

    /// One full period of modified Euler sub-steps on lifts.
    pub fn apply(&self, s: CylinderState) -> CylinderState {
        let (mut y, mut x) = (s.y, s.x);
        let eps = self.params.epsilon;
        for j in 0..self.params.n_substeps {
            let (c, src) = self.step_coeffs(j);
            let torque = eps
                * self.schedule.amp[j]
                * (2.0 * x - 2.0 * self.schedule.anomaly[j]).sin();
            y = c * y + src - torque * self.h;
            x += y * self.h;
        }
        CylinderState::new(y, x)
    }

    /// Chain-rule Jacobian over all sub-steps.
    pub fn jacobian(&self, s: CylinderState) -> Mat2 {
        let (mut y, mut x) = (s.y, s.x);
        let eps = self.params.epsilon;
        let mut m: Mat2 = [[1.0, 0.0], [0.0, 1.0]];
        for j in 0..self.params.n_substeps {
            let (c, src) = self.step_coeffs(j);
            let phase = 2.0 * x - 2.0 * self.schedule.anomaly[j];
            let torque = eps * self.schedule.amp[j] * phase.sin();
            let slope = -2.0 * eps * self.schedule.amp[j] * phase.cos() * self.h;
            let step: Mat2 = [[c, slope], [c * self.h, 1.0 + slope * self.h]];
            m = super::mat2_mul(&step, &m);
            y = c * y + src - torque * self.h;
            x += y * self.h;
        }
        m
    }

    /// ∂(y′, x′)/∂μ accumulated through the sub-steps (averaged scheme only:
    /// the time-dependent torque has no drift parameter).
    pub fn drift_derivative(&self, s: CylinderState) -> Result<[f64; 2], ModelError> {
        if self.params.k_d == 0.0 || !self.params.averaged {
            return Err(ModelError::NoDriftParameter);
        }
        let lam = self.params.lambda_diss();
        let (mut y, mut x) = (s.y, s.x);
        let eps = self.params.epsilon;
        let mut d = [0.0_f64, 0.0];
        for j in 0..self.params.n_substeps {
            let (c, src) = self.step_coeffs(j);
            let phase = 2.0 * x - 2.0 * self.schedule.anomaly[j];
            let slope = -2.0 * eps * self.schedule.amp[j] * phase.cos() * self.h;
            let dy = c * d[0] + slope * d[1] + lam * self.h;
            let dx = d[1] + dy * self.h;
            d = [dy, dx];
            y = c * y + src - eps * self.schedule.amp[j] * phase.sin() * self.h;
            x += y * self.h;
        }
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{det2, MapModel};

    #[test]
    fn kepler_circular_orbit() {
        for &t in &[0.0, 0.7, 2.0, 5.5] {
            let kp = kepler_state(0.0, t);
            assert!((kp.r - 1.0).abs() < 1e-14);
            let want = t.rem_euclid(TAU);
            let got = kp.f.rem_euclid(TAU);
            assert!((got - want).abs() < 1e-12, "f {got} vs mean anomaly {want}");
        }
    }

    #[test]
    fn kepler_periapsis() {
        let kp = kepler_state(0.2, 0.0);
        assert!((kp.r - 0.8).abs() < 1e-14);
        assert!(kp.f.abs() < 1e-14);
    }

    #[test]
    fn kepler_against_bisection_oracle() {
        // independent root solve of E − e sin E = t by bisection
        let (e, t) = (0.2, 1.0);
        let (mut lo, mut hi) = (0.0_f64, TAU);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if mid - e * mid.sin() - t < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let big_e = 0.5 * (lo + hi);
        assert!((big_e - 1.18532).abs() < 1e-4, "bisection root {big_e}");
        let kp = kepler_state(e, t);
        assert!((kp.r - (1.0 - e * big_e.cos())).abs() < 1e-12);
        let f_oracle = 2.0 * f64::atan2(
            (1.2_f64).sqrt() * (big_e / 2.0).sin(),
            (0.8_f64).sqrt() * (big_e / 2.0).cos(),
        );
        assert!((kp.f - f_oracle).abs() < 1e-10);
    }

    #[test]
    fn torque_coefficients_at_zero() {
        let (l, n) = averaged_torque_coefficients(0.0);
        assert_eq!(l, 1.0);
        assert_eq!(n, 1.0);
    }

    #[test]
    fn torque_coefficients_against_quadrature() {
        // orbit averages of a⁶/r⁶ and a⁶ḟ/r⁶ over one period, trapezoid rule
        let e = 0.1;
        let n = 20_000;
        let sqrt_om = (1.0 - e * e_f64(e)).sqrt();
        let mut l_acc = 0.0;
        let mut n_acc = 0.0;
        for j in 0..n {
            let t = TAU * j as f64 / n as f64;
            let kp = kepler_state(e, t);
            l_acc += kp.r.powi(-6);
            n_acc += sqrt_om * kp.r.powi(-8);
        }
        let (lbar, nbar) = averaged_torque_coefficients(e);
        assert!((l_acc / n as f64 - lbar).abs() < 1e-6, "L̄ quadrature");
        assert!((n_acc / n as f64 - nbar).abs() < 1e-6, "N̄ quadrature");
    }

    fn e_f64(e: f64) -> f64 {
        e
    }

    #[test]
    fn drift_ratio_monotone_in_eccentricity() {
        let ratio = |e: f64| {
            let (l, n) = averaged_torque_coefficients(e);
            n / l
        };
        assert!(ratio(0.2) > ratio(0.1));
        assert!(ratio(0.1) > 1.0);
    }

    #[test]
    fn integrable_when_unperturbed() {
        let m = SpinOrbitMap::new(SpinOrbitParams::conservative(0.0549, 0.0, 256)).unwrap();
        let s = m.apply(CylinderState::new(0.37, 1.0));
        assert!((s.y - 0.37).abs() < 1e-14);
        assert!((s.x - (1.0 + TAU * 0.37)).abs() < 1e-12);
    }

    #[test]
    fn dissipative_contraction_matches_closed_form() {
        let params = SpinOrbitParams {
            eccentricity: 0.1,
            epsilon: 0.0,
            k_d: 1e-3,
            mu_override: Some(0.8),
            n_substeps: 128,
            averaged: true,
        };
        let lam = params.lambda_diss();
        let m = SpinOrbitMap::new(params).unwrap();
        let factor = (1.0 - lam * m.h()).powi(128);
        assert!((m.conformal_factor() - factor).abs() < 1e-15);
        // affine recursion: y' − μ = Λ (y − μ)
        let s0 = CylinderState::new(2.0, 0.3);
        let s1 = m.apply(s0);
        assert!(
            ((s1.y - 0.8) - factor * (s0.y - 0.8)).abs() < 1e-12,
            "per-period contraction toward the drift-determined action"
        );
    }

    #[test]
    fn conservative_determinant_accumulates_to_one() {
        let m = SpinOrbitMap::new(SpinOrbitParams::conservative(0.0549, 1e-4, 512)).unwrap();
        let j = m.jacobian(CylinderState::new(1.02, 0.7));
        assert!((det2(&j) - 1.0).abs() < 1e-10, "det {}", det2(&j));
    }

    #[test]
    fn step_too_large_rejected() {
        let params = SpinOrbitParams {
            eccentricity: 0.1,
            epsilon: 0.0,
            k_d: 200.0,
            mu_override: None,
            n_substeps: 4,
            averaged: true,
        };
        assert!(matches!(SpinOrbitMap::new(params), Err(ModelError::StepTooLarge(_))));
    }

    #[test]
    fn dissipative_constant_from_physical_inputs() {
        // K_d = 3n k₂/(ξQ) (R_e/a)³ (M/m), a pure product of named inputs
        let kd = kd_from_physical(1.0, 0.02, 0.4, 100.0, 4.5e-3, 81.3);
        let direct = 3.0 * 1.0 * 0.02 / (0.4 * 100.0) * 4.5e-3_f64.powi(3) * 81.3;
        assert_eq!(kd, direct);
        assert!(kd > 0.0 && kd < 1e-4);
    }

    #[test]
    fn model_wrapper_roundtrip() {
        let m = MapModel::SpinOrbit(SpinOrbitMap::new(SpinOrbitParams::moon_like()).unwrap());
        let (lbar, nbar) = averaged_torque_coefficients(0.0549);
        assert!((m.mu() - nbar / lbar).abs() < 1e-15);
        let shifted = m.with_mu(1.5);
        assert!((shifted.mu() - 1.5).abs() < 1e-15);
        assert!(m.conformal_factor() < 1.0);
        assert!(m.conformal_factor() > 1.0 - 1e-6);
    }
}
