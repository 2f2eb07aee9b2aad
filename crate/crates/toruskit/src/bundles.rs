//! Invariant-bundle analysis of converged attractors.
//!
//! For |λ| < 1 the attractor is a normally hyperbolic invariant circle whose
//! tangent bundle is span(DK) and whose stable bundle can be written
//! E^s(θ) = DK(θ)B(θ) + J⁻¹DK(θ)N(θ), where B solves
//! B(θ) − λB(θ+ω) = −S(θ). The pair [DK | E^s] reduces the linearized map
//! to diag(1, λ): the Lyapunov multipliers are pinned at {1, λ}, so the only
//! way hyperbolicity can degrade is the angle α(θ) between the bundles
//! collapsing — the quantity tracked here toward breakdown.

use crate::fourier::PeriodicGridFunction;
use crate::models::CylinderState;
use crate::newton::{assemble_frame, NewtonFrame, SolveError, TorusEmbedding};
use num_complex::Complex64;
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("conservative map (λ = 1) has no stable bundle")]
    ConservativeCase,
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug)]
pub struct BundleData {
    /// coordinate of the stable direction over the frame: E^s = DK·B + J⁻¹DK·N
    pub b: PeriodicGridFunction,
    /// angle from the closed formula α = arctan(1/(B·DK^TDK))
    pub alpha: PeriodicGridFunction,
    /// angle recomputed from inner products of the two directions
    pub alpha_direct: PeriodicGridFunction,
    pub min_angle: f64,
    pub argmin_theta: f64,
    /// sup‖Df∘K·[DK|E^s] − [DK|E^s]∘T_ω·diag(1, λ)‖
    pub reducibility_residual: f64,
    pub es_y: PeriodicGridFunction,
    pub es_x: PeriodicGridFunction,
}

/// Solve B(θ) − λB(θ+ω) = −S(θ) mode by mode: B̂_k = −Ŝ_k/(1 − λe^{ikω}).
fn solve_bundle_equation(
    s: &PeriodicGridFunction,
    omega: f64,
    lambda: f64,
) -> PeriodicGridFunction {
    let n = s.n_modes();
    let coeffs: Vec<Complex64> = s
        .coeffs()
        .iter()
        .enumerate()
        .map(|(j, c)| {
            if j == n / 2 {
                Complex64::new(0.0, 0.0)
            } else {
                let k = if j <= n / 2 { j as i64 } else { j as i64 - n as i64 };
                let div = Complex64::new(1.0, 0.0)
                    - lambda * Complex64::from_polar(1.0, k as f64 * omega);
                -c / div
            }
        })
        .collect();
    PeriodicGridFunction::from_coeffs(coeffs).expect("size preserved")
}

/// Compute the stable bundle of a converged torus and verify the
/// reducibility identity it implies.
pub fn stable_bundle(
    torus: &TorusEmbedding,
    frame: &NewtonFrame,
) -> Result<BundleData, BundleError> {
    let lambda = torus.lambda();
    if torus.model().is_conservative() {
        return Err(BundleError::ConservativeCase);
    }
    let n = torus.n_modes();
    let w = torus.omega().omega();
    let b = solve_bundle_equation(&frame.s, w, lambda);

    let es_y = frame.dky.mul(&b).sub(&frame.dkx.mul(&frame.n_field));
    let es_x = frame.dkx.mul(&b).add(&frame.dky.mul(&frame.n_field));

    // α from the closed formula and from plain geometry; they must agree
    let normsq = frame.n_field.map(|v| 1.0 / v);
    let alpha = b.mul(&normsq).map(|v| (1.0 / v).atan());
    let mut direct = Vec::with_capacity(n);
    for j in 0..n {
        let dk = [frame.dky.samples()[j], frame.dkx.samples()[j]];
        let es = [es_y.samples()[j], es_x.samples()[j]];
        let dk_norm = (dk[0] * dk[0] + dk[1] * dk[1]).sqrt();
        let par = (es[0] * dk[0] + es[1] * dk[1]) / dk_norm;
        let perp = [es[0] - par * dk[0] / dk_norm, es[1] - par * dk[1] / dk_norm];
        let perp_norm = (perp[0] * perp[0] + perp[1] * perp[1]).sqrt();
        direct.push(f64::atan2(perp_norm, par.abs()));
    }
    let alpha_direct = PeriodicGridFunction::from_samples(direct).expect("size");

    // reducibility of the assembled pair against diag(1, λ)
    let b_sh = b.shift(w);
    let es_y_sh = frame.dky_sh.mul(&b_sh).sub(&frame.dkx_sh.mul(&frame.n_sh));
    let es_x_sh = frame.dkx_sh.mul(&b_sh).add(&frame.dky_sh.mul(&frame.n_sh));
    let model = torus.model();
    let ky_s = torus.ky.samples();
    let kx_s = torus.kx_periodic.samples();
    let mut residual = 0.0_f64;
    for j in 0..n {
        let theta = TAU * j as f64 / n as f64;
        let df = model.jacobian(CylinderState::new(ky_s[j], theta + kx_s[j]));
        let dk = [frame.dky.samples()[j], frame.dkx.samples()[j]];
        let es = [es_y.samples()[j], es_x.samples()[j]];
        let col1 = [
            df[0][0] * dk[0] + df[0][1] * dk[1] - frame.dky_sh.samples()[j],
            df[1][0] * dk[0] + df[1][1] * dk[1] - frame.dkx_sh.samples()[j],
        ];
        let col2 = [
            df[0][0] * es[0] + df[0][1] * es[1] - lambda * es_y_sh.samples()[j],
            df[1][0] * es[0] + df[1][1] * es[1] - lambda * es_x_sh.samples()[j],
        ];
        for v in col1.iter().chain(col2.iter()) {
            residual = residual.max(v.abs());
        }
    }

    let (min_angle, argmin_theta) = refined_minimum(&alpha);
    Ok(BundleData {
        b,
        alpha,
        alpha_direct,
        min_angle,
        argmin_theta,
        reducibility_residual: residual,
        es_y,
        es_x,
    })
}

/// Grid argmin plus parabolic interpolation through the three neighboring
/// nodes; the collapse is localized and the refinement resolves it below
/// grid resolution.
pub fn refined_minimum(alpha: &PeriodicGridFunction) -> (f64, f64) {
    let n = alpha.n_modes();
    let s = alpha.samples();
    let mut j_min = 0;
    for j in 1..n {
        if s[j] < s[j_min] {
            j_min = j;
        }
    }
    let h = TAU / n as f64;
    let t0 = h * j_min as f64;
    let (ym, y0, yp) = (s[(j_min + n - 1) % n], s[j_min], s[(j_min + 1) % n]);
    let denom = ym - 2.0 * y0 + yp;
    if denom.abs() < 1e-300 {
        return (y0, t0);
    }
    let delta = 0.5 * (ym - yp) / denom;
    let t_star = t0 + delta.clamp(-0.5, 0.5) * h;
    let refined = alpha.eval(t_star);
    if refined < y0 {
        (refined, t_star.rem_euclid(TAU))
    } else {
        (y0, t0)
    }
}

/// Lyapunov multipliers by QR accumulation of Df along the orbit
/// θ ↦ θ + ω on the torus — independent of the bundle construction.
///
/// A burn-in lets the QR frame align with the invariant splitting, and the
/// per-step log-stretches (quasi-periodic functions of θ once aligned) are
/// averaged with smooth bump weights, which converges far faster than the
/// plain Birkhoff mean.
pub fn lyapunov_multipliers(torus: &TorusEmbedding, n_iter: usize) -> (f64, f64) {
    let model = torus.model();
    let w = torus.omega().omega();
    let burn_in = (n_iter / 10).min(1000);
    let kept = n_iter.max(burn_in + 1) - burn_in;
    let mut q = [[1.0_f64, 0.0], [0.0, 1.0]];
    let mut log1 = 0.0_f64;
    let mut log2 = 0.0_f64;
    let mut weight_sum = 0.0_f64;
    let mut theta = 0.0_f64;
    for j in 0..burn_in + kept {
        let z = torus.eval(theta);
        let a = model.jacobian(z);
        let b = crate::models::mat2_mul(&a, &q);
        // Givens QR of the 2×2 product
        let r11 = (b[0][0] * b[0][0] + b[1][0] * b[1][0]).sqrt();
        let q1 = [b[0][0] / r11, b[1][0] / r11];
        let r12 = q1[0] * b[0][1] + q1[1] * b[1][1];
        let c2 = [b[0][1] - r12 * q1[0], b[1][1] - r12 * q1[1]];
        let r22 = (c2[0] * c2[0] + c2[1] * c2[1]).sqrt();
        if j >= burn_in {
            let t = (j - burn_in) as f64 / kept as f64;
            let weight = if t > 0.0 && t < 1.0 {
                (-1.0 / (t * (1.0 - t))).exp()
            } else {
                0.0
            };
            log1 += weight * r11.ln();
            log2 += weight * r22.ln();
            weight_sum += weight;
        }
        q = [[q1[0], c2[0] / r22], [q1[1], c2[1] / r22]];
        theta = (theta + w).rem_euclid(TAU);
    }
    let m1 = (log1 / weight_sum).exp();
    let m2 = (log2 / weight_sum).exp();
    if m1 >= m2 {
        (m1, m2)
    } else {
        (m2, m1)
    }
}

/// Convenience: frame assembly plus bundle analysis in one call.
pub fn analyze(torus: &TorusEmbedding) -> Result<BundleData, BundleError> {
    let frame = assemble_frame(torus)?;
    stable_bundle(torus, &frame)
}
