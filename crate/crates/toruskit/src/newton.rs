//! Quasi-Newton solver for the invariance equation f_μ∘K(θ) = K(θ+ω).
//!
//! One step: evaluate the error E = f_μ∘K − K∘T_ω, build the adapted frame
//! M = [DK | J⁻¹DK·N] with N = (DK^T DK)⁻¹, which conjugates the linearized
//! map to the upper-triangular cocycle [[1, S], [0, λ]] up to O(‖E‖); in
//! frame coordinates the correction (W, σ) splits into two scalar
//! cohomological equations
//!
//!   W₁(θ) − W₁(θ+ω) = −Ẽ₁ − S·W₂ − Ã₁σ        (small divisors)
//!   λW₂(θ) − W₂(θ+ω) = −Ẽ₂ − Ã₂σ              (contraction, |λ| ≠ 1)
//!
//! with Ẽ = (M∘T_ω)⁻¹E and Ã = (M∘T_ω)⁻¹ D_μf∘K, closed by a 2×2 averaged
//! system for (⟨W₂⟩, σ) whose determinant is the non-degeneracy condition.
//! The update K ← K + MW, μ ← μ + σ is quadratically convergent; the free
//! phase of the torus is pinned each step by rotating mean(kx_periodic) to
//! zero, which is the translation gauge of local uniqueness.
//!
//! The conservative case (λ = 1) drops σ, turns the W₂ equation into a
//! second small-divisor solve with its (quadratically small) average
//! projected out and logged, and fixes ⟨W₂⟩ from the solvability of the W₁
//! equation: ⟨W₂⟩ = −(⟨S·B⁰⟩ + ⟨Ẽ₁⟩)/⟨S⟩.

use crate::fourier::{
    solve_contraction, solve_small_divisor, DiophantineFrequency, FourierError,
    PeriodicGridFunction,
};
use crate::models::{CylinderState, MapModel, ModelError};
use num_complex::Complex64;
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("cold start requested at ε = {eps} beyond the threshold {threshold}")]
    ColdStartBeyondThreshold { eps: f64, threshold: f64 },
    #[error("angle error jumps by ≈2π between adjacent nodes: lost torus or too few modes")]
    LiftDiscontinuity,
    #[error("embedding degenerates: min |DK|² = {min_normsq:.3e}")]
    DegenerateEmbedding { min_normsq: f64 },
    #[error("non-degeneracy determinant {det:.3e} below threshold {threshold:.1e}")]
    NondegeneracyFailure { det: f64, threshold: f64 },
    #[error("cohomological solve produced non-finite coefficients (hostile small divisors)")]
    SmallDivisorOverflow,
    #[error(transparent)]
    Fourier(#[from] FourierError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The pair (K, μ): periodic corrections to the unperturbed circle plus the
/// drift, tagged with the rotation and the generating model.
#[derive(Debug, Clone)]
pub struct TorusEmbedding {
    model: MapModel,
    omega: DiophantineFrequency,
    mu: f64,
    /// action component K_y(θ)
    pub ky: PeriodicGridFunction,
    /// periodic part of the angle component: K_x(θ) = θ + kx_periodic(θ)
    pub kx_periodic: PeriodicGridFunction,
}

impl TorusEmbedding {
    /// The exactly invariant circle of the ε = 0 family.
    pub fn unperturbed(
        model: &MapModel,
        omega: &DiophantineFrequency,
        n_modes: usize,
    ) -> Result<Self, SolveError> {
        let w = omega.omega();
        let mu = model.unperturbed_mu(w);
        let action = model.unperturbed_action(w);
        Ok(Self {
            model: model.with_mu(mu),
            omega: omega.clone(),
            mu,
            ky: PeriodicGridFunction::constant(n_modes, action)?,
            kx_periodic: PeriodicGridFunction::zero(n_modes)?,
        })
    }

    pub fn from_parts(
        model: MapModel,
        omega: DiophantineFrequency,
        mu: f64,
        ky: PeriodicGridFunction,
        kx_periodic: PeriodicGridFunction,
    ) -> Self {
        Self { model: model.with_mu(mu), omega, mu, ky, kx_periodic }
    }

    /// Model with the torus' drift substituted.
    pub fn model(&self) -> &MapModel {
        &self.model
    }

    pub fn omega(&self) -> &DiophantineFrequency {
        &self.omega
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn epsilon(&self) -> f64 {
        self.model.epsilon()
    }

    pub fn lambda(&self) -> f64 {
        self.model.conformal_factor()
    }

    pub fn n_modes(&self) -> usize {
        self.ky.n_modes()
    }

    pub fn with_updated(
        &self,
        ky: PeriodicGridFunction,
        kx_periodic: PeriodicGridFunction,
        mu: f64,
    ) -> Self {
        Self {
            model: self.model.with_mu(mu),
            omega: self.omega.clone(),
            mu,
            ky,
            kx_periodic,
        }
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        self.with_updated(self.ky.clone(), self.kx_periodic.clone(), mu)
    }

    pub fn resample(&self, n: usize) -> Result<Self, FourierError> {
        Ok(Self {
            model: self.model.clone(),
            omega: self.omega.clone(),
            mu: self.mu,
            ky: self.ky.resample(n)?,
            kx_periodic: self.kx_periodic.resample(n)?,
        })
    }

    /// K(θ) by direct series evaluation.
    pub fn eval(&self, theta: f64) -> CylinderState {
        CylinderState::new(self.ky.eval(theta), theta + self.kx_periodic.eval(theta))
    }

    /// √(‖ky‖²_{H^m} + ‖kx_periodic‖²_{H^m}) for each requested index.
    pub fn sobolev_norms(&self, ms: &[f64]) -> Vec<f64> {
        ms.iter()
            .map(|&m| {
                let a = self.ky.sobolev_norm(m);
                let b = self.kx_periodic.sobolev_norm(m);
                (a * a + b * b).sqrt()
            })
            .collect()
    }

    /// Larger of the two relative spectral tail masses.
    pub fn tail_mass(&self, fraction: f64) -> f64 {
        self.ky.tail_mass(fraction).max(self.kx_periodic.tail_mass(fraction))
    }

    /// Spike-robust witness of unresolved structure: the larger of the two
    /// components' median top-octave coefficient magnitudes.
    pub fn resolution_defect(&self, fraction: f64) -> f64 {
        self.ky
            .median_tail_coefficient(fraction)
            .max(self.kx_periodic.median_tail_coefficient(fraction))
    }

    /// min_θ ‖DK(θ)‖ on the grid (immersion witness).
    pub fn min_dk_norm(&self) -> f64 {
        let dky = self.ky.derivative();
        let dkx = self.kx_periodic.derivative().add_scalar(1.0);
        dky.samples()
            .iter()
            .zip(dkx.samples())
            .map(|(&a, &b)| (a * a + b * b).sqrt())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Invariance error E(θ) = f_μ∘K(θ) − K(θ+ω) on the grid, angle part on lifts.
pub fn invariance_error(
    torus: &TorusEmbedding,
) -> Result<(PeriodicGridFunction, PeriodicGridFunction, f64), SolveError> {
    let n = torus.n_modes();
    let w = torus.omega.omega();
    let ky_s = torus.ky.samples();
    let kx_s = torus.kx_periodic.samples();
    let ky_sh = torus.ky.shift(w);
    let kx_sh = torus.kx_periodic.shift(w);
    let model = torus.model();
    let mut ey = Vec::with_capacity(n);
    let mut ex = Vec::with_capacity(n);
    for j in 0..n {
        let theta = TAU * j as f64 / n as f64;
        let z = model.apply(CylinderState::new(ky_s[j], theta + kx_s[j]));
        ey.push(z.y - ky_sh.samples()[j]);
        ex.push(z.x - (theta + w + kx_sh.samples()[j]));
    }
    for j in 0..n {
        let gap = (ex[(j + 1) % n] - ex[j]).abs();
        if gap > std::f64::consts::PI {
            return Err(SolveError::LiftDiscontinuity);
        }
    }
    let sup = ey
        .iter()
        .chain(ex.iter())
        .fold(0.0_f64, |m, &v| m.max(v.abs()));
    Ok((
        PeriodicGridFunction::from_samples(ey)?,
        PeriodicGridFunction::from_samples(ex)?,
        sup,
    ))
}

/// The frame quantities of one linearization, with everything shifted by ω
/// derived from exactly shifted embeddings (never by transforming
/// non-band-limited products).
#[derive(Debug)]
pub struct NewtonFrame {
    pub dky: PeriodicGridFunction,
    pub dkx: PeriodicGridFunction,
    /// N = (DK^T DK)⁻¹ (scalar field for one angle)
    pub n_field: PeriodicGridFunction,
    pub dky_sh: PeriodicGridFunction,
    pub dkx_sh: PeriodicGridFunction,
    pub n_sh: PeriodicGridFunction,
    /// torsion S(θ)
    pub s: PeriodicGridFunction,
    /// Ã = (M∘T_ω)⁻¹ D_μf∘K, absent for conservative families
    pub a_tilde: Option<(PeriodicGridFunction, PeriodicGridFunction)>,
    /// sup |DK^T J⁻¹ DK| — identically zero for one angle; asserted, not assumed
    pub gamma_sup: f64,
    /// sup‖Df∘K·M − M∘T_ω·[[1,S],[0,λ]]‖, O(‖E‖)
    pub reducibility_defect: f64,
}

const IMMERSION_THRESHOLD: f64 = 1e-8;

pub fn assemble_frame(torus: &TorusEmbedding) -> Result<NewtonFrame, SolveError> {
    let n = torus.n_modes();
    let w = torus.omega.omega();
    let lambda = torus.lambda();
    let model = torus.model();

    let dky = torus.ky.derivative();
    let dkx = torus.kx_periodic.derivative().add_scalar(1.0);
    let normsq = dky.mul(&dky).add(&dkx.mul(&dkx));
    let min_normsq = normsq.samples().iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if min_normsq < IMMERSION_THRESHOLD {
        return Err(SolveError::DegenerateEmbedding { min_normsq });
    }
    let n_field = normsq.map(|v| 1.0 / v);

    let ky_sh = torus.ky.shift(w);
    let kx_sh = torus.kx_periodic.shift(w);
    let dky_sh = ky_sh.derivative();
    let dkx_sh = kx_sh.derivative().add_scalar(1.0);
    let n_sh = dky_sh
        .mul(&dky_sh)
        .add(&dkx_sh.mul(&dkx_sh))
        .map(|v| 1.0 / v);

    // γ = DK^T J⁻¹ DK = −dky·dkx + dkx·dky: zero by antisymmetry; assert it.
    let gamma_sup = dky
        .samples()
        .iter()
        .zip(dkx.samples())
        .map(|(&a, &b)| (-a * b + b * a).abs())
        .fold(0.0_f64, f64::max);
    debug_assert!(gamma_sup < 1e-12);

    let ky_s = torus.ky.samples();
    let kx_s = torus.kx_periodic.samples();
    let mut s_vals = Vec::with_capacity(n);
    let mut a1_vals = Vec::with_capacity(n);
    let mut a2_vals = Vec::with_capacity(n);
    let mut defect = 0.0_f64;
    let conservative = model.is_conservative();
    for j in 0..n {
        let theta = TAU * j as f64 / n as f64;
        let state = CylinderState::new(ky_s[j], theta + kx_s[j]);
        let df = model.jacobian(state);
        let (p1, p2) = (dky.samples()[j] * n_field.samples()[j], dkx.samples()[j] * n_field.samples()[j]);
        let (p1s, p2s) = (
            dky_sh.samples()[j] * n_sh.samples()[j],
            dkx_sh.samples()[j] * n_sh.samples()[j],
        );
        // J⁻¹P = (−p2, p1); S = P(θ+ω)^T Df J⁻¹ P (the γ term vanishes)
        let u = [-p2, p1];
        let dfu = [df[0][0] * u[0] + df[0][1] * u[1], df[1][0] * u[0] + df[1][1] * u[1]];
        s_vals.push(p1s * dfu[0] + p2s * dfu[1]);

        if !conservative {
            let dmu = model.drift_derivative(state)?;
            a1_vals.push(p1s * dmu[0] + p2s * dmu[1]);
            a2_vals.push(-dkx_sh.samples()[j] * dmu[0] + dky_sh.samples()[j] * dmu[1]);
        }

        // reducibility: col 1 Df·DK − DK(θ+ω), col 2 Df·V − (DK(θ+ω)S + V(θ+ω)λ)
        let v = [-dkx.samples()[j] * n_field.samples()[j], dky.samples()[j] * n_field.samples()[j]];
        let dfdk = [
            df[0][0] * dky.samples()[j] + df[0][1] * dkx.samples()[j],
            df[1][0] * dky.samples()[j] + df[1][1] * dkx.samples()[j],
        ];
        let dfv = [df[0][0] * v[0] + df[0][1] * v[1], df[1][0] * v[0] + df[1][1] * v[1]];
        let vs = [
            -dkx_sh.samples()[j] * n_sh.samples()[j],
            dky_sh.samples()[j] * n_sh.samples()[j],
        ];
        let s_here = s_vals[j];
        defect = defect
            .max((dfdk[0] - dky_sh.samples()[j]).abs())
            .max((dfdk[1] - dkx_sh.samples()[j]).abs())
            .max((dfv[0] - (dky_sh.samples()[j] * s_here + vs[0] * lambda)).abs())
            .max((dfv[1] - (dkx_sh.samples()[j] * s_here + vs[1] * lambda)).abs());
    }

    let a_tilde = if conservative {
        None
    } else {
        Some((
            PeriodicGridFunction::from_samples(a1_vals)?,
            PeriodicGridFunction::from_samples(a2_vals)?,
        ))
    };
    Ok(NewtonFrame {
        dky,
        dkx,
        n_field,
        dky_sh,
        dkx_sh,
        n_sh,
        s: PeriodicGridFunction::from_samples(s_vals)?,
        a_tilde,
        gamma_sup,
        reducibility_defect: defect,
    })
}

/// Zero the k = 0 bin exactly, returning the removed mean.
fn project_mean(f: &PeriodicGridFunction) -> (f64, PeriodicGridFunction) {
    let mut c = f.coeffs().to_vec();
    let mean = c[0].re;
    c[0] = Complex64::new(0.0, 0.0);
    (mean, PeriodicGridFunction::from_coeffs(c).expect("size preserved"))
}

#[derive(Debug)]
pub struct NewtonStep {
    pub torus: TorusEmbedding,
    pub sigma: f64,
    /// determinant of the averaged 2×2 system (⟨S⟩ itself when conservative)
    pub nondegeneracy_det: f64,
    /// average projected off the W₂ data in conservative mode — quadratically
    /// small for exactly symplectic maps, logged for audit
    pub projected_average: f64,
    pub correction_sup: f64,
}

pub fn newton_step(
    torus: &TorusEmbedding,
    frame: &NewtonFrame,
    e_y: &PeriodicGridFunction,
    e_x: &PeriodicGridFunction,
    nondegeneracy_tol: f64,
) -> Result<NewtonStep, SolveError> {
    let w = torus.omega.omega();
    let lambda = torus.lambda();

    // frame coordinates of the error: Ẽ = (M∘T_ω)⁻¹ E, det M = 1
    let e1 = frame
        .dky_sh
        .mul(&frame.n_sh)
        .mul(e_y)
        .add(&frame.dkx_sh.mul(&frame.n_sh).mul(e_x));
    let e2 = frame.dkx_sh.scale(-1.0).mul(e_y).add(&frame.dky_sh.mul(e_x));

    let s_mean = frame.s.mean();
    let (w2, sigma, nd_det, projected);
    if let Some((a1, a2)) = &frame.a_tilde {
        // dissipative path: B⁰ from −(Ẽ₂)⁰, B̃⁰ from −(Ã₂)⁰, then the
        // averaged 2×2 system for (⟨W₂⟩, σ)
        let (_, e2_zero) = project_mean(&e2.scale(-1.0));
        let b0 = solve_contraction(&e2_zero, w, lambda)?;
        let (_, a2_zero) = project_mean(&a2.scale(-1.0));
        let b0t = solve_contraction(&a2_zero, w, lambda)?;
        let matrix = [
            [s_mean, frame.s.mul(&b0t).mean() + a1.mean()],
            [lambda - 1.0, a2.mean()],
        ];
        let det = crate::models::det2(&matrix);
        if det.abs() < nondegeneracy_tol {
            return Err(SolveError::NondegeneracyFailure { det, threshold: nondegeneracy_tol });
        }
        let rhs = [-frame.s.mul(&b0).mean() - e1.mean(), -e2.mean()];
        let sol = crate::models::solve2(&matrix, &rhs)
            .ok_or(SolveError::NondegeneracyFailure { det, threshold: nondegeneracy_tol })?;
        w2 = b0.add(&b0t.scale(sol[1])).add_scalar(sol[0]);
        sigma = sol[1];
        nd_det = det;
        projected = 0.0;
    } else {
        // conservative path: σ = 0; the W₂ equation is a small-divisor solve
        // with its average projected out, ⟨W₂⟩ from W₁ solvability
        if s_mean.abs() < nondegeneracy_tol {
            return Err(SolveError::NondegeneracyFailure {
                det: s_mean,
                threshold: nondegeneracy_tol,
            });
        }
        let (mean2, q2) = project_mean(&e2.scale(-1.0));
        let b0 = solve_small_divisor(&q2, w)?;
        let w2_mean = -(frame.s.mul(&b0).mean() + e1.mean()) / s_mean;
        w2 = b0.add_scalar(w2_mean);
        sigma = 0.0;
        nd_det = s_mean;
        projected = mean2;
    }

    // W₁ − W₁∘T_ω = −Ẽ₁ − S·W₂ − Ã₁σ; the averaged system zeroed the mean
    let mut q1 = e1.scale(-1.0).sub(&frame.s.mul(&w2));
    if let Some((a1, _)) = &frame.a_tilde {
        q1 = q1.sub(&a1.scale(sigma));
    }
    let (_, q1) = project_mean(&q1);
    let w1 = solve_small_divisor(&q1, w)?;
    if !w1.sup_norm().is_finite() || !w2.sup_norm().is_finite() {
        return Err(SolveError::SmallDivisorOverflow);
    }

    // ΔK = M·W
    let dky_corr = frame.dky.mul(&w1).sub(&frame.dkx.mul(&frame.n_field).mul(&w2));
    let dkx_corr = frame.dkx.mul(&w1).add(&frame.dky.mul(&frame.n_field).mul(&w2));
    let correction_sup = dky_corr.sup_norm().max(dkx_corr.sup_norm());

    let ky_upd = torus.ky.add(&dky_corr);
    let kx_upd = torus.kx_periodic.add(&dkx_corr);
    // translation gauge: rotate so that mean(kx_periodic) = 0
    let psi = -kx_upd.mean();
    let ky_new = ky_upd.shift(psi);
    let kx_new = kx_upd.shift(psi).add_scalar(psi);

    Ok(NewtonStep {
        torus: torus.with_updated(ky_new, kx_new, torus.mu + sigma),
        sigma,
        nondegeneracy_det: nd_det,
        projected_average: projected,
        correction_sup,
    })
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub error_sup: f64,
    pub error_sobolev_m: f64,
    pub nondegeneracy_det: f64,
    pub sigma: f64,
    pub tail_mass: f64,
    pub n_modes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FailureReason {
    MaxIterations,
    Stalled,
    Diverged,
    ResourceCap,
}

#[derive(Debug, Clone)]
pub struct NewtonReport {
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    pub final_error: f64,
    pub failure: Option<FailureReason>,
    pub mode_doublings: usize,
    /// largest conservative-mode average projected off the W₂ data
    pub max_projected_average: f64,
}

impl NewtonReport {
    /// Consecutive error pairs eligible for order fitting: both inside the
    /// window where the iteration is in its basin yet above the residual
    /// floor, so flooring cannot masquerade as slow convergence.
    fn order_pairs(&self) -> Vec<(f64, f64)> {
        let es: Vec<f64> = self.iterations.iter().map(|r| r.error_sup).collect();
        es.windows(2)
            .filter(|w| w[0] <= 1e-2 && w[1] >= 1e-12 && w[1] < w[0])
            .map(|w| (w[0].ln(), w[1].ln()))
            .collect()
    }

    /// Least-squares slope of log e_{i+1} against log e_i — the
    /// quadratic-convergence witness for this run (needs ≥ 2 pairs).
    pub fn fitted_order(&self) -> Option<f64> {
        regress_order(&self.order_pairs())
    }

    /// max e_{i+1}/e_i^{1.8} over the eligible pairs: finite and modest when
    /// the iteration contracts at order ≥ 1.8.
    pub fn quadratic_constant(&self) -> Option<f64> {
        self.order_pairs()
            .iter()
            .map(|&(a, b)| (b - 1.8 * a).exp())
            .fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |a| a.max(c))))
    }
}

/// Order regression pooled across several runs; the per-run reports often
/// contribute a single clean pair each.
pub fn pooled_order<'a>(reports: impl IntoIterator<Item = &'a NewtonReport>) -> Option<f64> {
    let mut pts = Vec::new();
    for r in reports {
        pts.extend(r.order_pairs());
    }
    regress_order(&pts)
}

fn regress_order(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// sup-norm tolerance on the invariance error
    pub tol: f64,
    pub max_iter: usize,
    pub n_modes_init: usize,
    /// relative spectral tail mass that triggers mode doubling
    pub tail_threshold: f64,
    pub mode_cap: usize,
    pub nondegeneracy_tol: f64,
    /// Sobolev index logged per iteration
    pub m_sobolev: f64,
    /// cold starts seed from ε = 0 and are only accepted below this ε
    pub cold_eps_threshold: f64,
    pub tail_fraction: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iter: 30,
            n_modes_init: 128,
            tail_threshold: 1e-9,
            mode_cap: 1 << 14,
            nondegeneracy_tol: 1e-8,
            m_sobolev: 2.0,
            cold_eps_threshold: 0.1,
            tail_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Seed {
    Cold,
    Warm(TorusEmbedding),
}

#[derive(Debug)]
pub struct Solved {
    pub torus: TorusEmbedding,
    pub report: NewtonReport,
}

/// Run the Newton iteration to convergence (sup error below `cfg.tol` and
/// spectral tail below `cfg.tail_threshold`), doubling the mode count when
/// the tail fattens, up to `cfg.mode_cap`.
pub fn solve(
    model: &MapModel,
    omega: &DiophantineFrequency,
    cfg: &SolverConfig,
    seed: Seed,
) -> Result<Solved, SolveError> {
    let mut torus = match seed {
        Seed::Cold => {
            if model.epsilon() > cfg.cold_eps_threshold {
                return Err(SolveError::ColdStartBeyondThreshold {
                    eps: model.epsilon(),
                    threshold: cfg.cold_eps_threshold,
                });
            }
            TorusEmbedding::unperturbed(model, omega, cfg.n_modes_init)?
        }
        Seed::Warm(t) => {
            let keep = t.n_modes().max(cfg.n_modes_init);
            TorusEmbedding::from_parts(
                model.clone(),
                omega.clone(),
                t.mu(),
                t.ky.resample(keep)?,
                t.kx_periodic.resample(keep)?,
            )
        }
    };

    let mut report = NewtonReport {
        iterations: Vec::new(),
        converged: false,
        final_error: f64::INFINITY,
        failure: None,
        mode_doublings: 0,
        max_projected_average: 0.0,
    };
    let mut best = f64::INFINITY;
    let mut stall = 0usize;
    let mut rescued = false;
    let mut iter = 0usize;
    let mut grace = 0usize;

    loop {
        let (e_y, e_x, sup) = invariance_error(&torus)?;
        if !sup.is_finite() || sup > 1e6 {
            report.failure = Some(FailureReason::Diverged);
            report.final_error = sup;
            return Ok(Solved { torus, report });
        }
        // resolution gate: a grid convergence with a fat spectral tail is an
        // aliasing artifact, so the grid doubles until the top-octave modes
        // sit well under the tolerance. Doubling is reactive only — the
        // tail of an unconverged iterate carries transient junk the next
        // Newton step removes, so it never triggers refinement on its own.
        let tail = torus.tail_mass(cfg.tail_fraction);
        let defect = torus.resolution_defect(cfg.tail_fraction);
        let under_resolved = tail > cfg.tail_threshold || defect > 0.1 * cfg.tol;
        if sup < cfg.tol {
            if under_resolved {
                if torus.n_modes() * 2 <= cfg.mode_cap {
                    torus = torus.resample(torus.n_modes() * 2)?;
                    report.mode_doublings += 1;
                    best = f64::INFINITY;
                    stall = 0;
                    grace = 2;
                    continue;
                }
                report.failure = Some(FailureReason::ResourceCap);
                report.final_error = sup;
                return Ok(Solved { torus, report });
            }
            // trim over-refined grids back to the smallest resolving size so
            // warm-started follow-up solves keep their doubling headroom;
            // the trimmed torus must re-verify at the same error level
            let mut sup = sup;
            while torus.n_modes() > cfg.n_modes_init {
                let half = torus.resample(torus.n_modes() / 2)?;
                if half.resolution_defect(cfg.tail_fraction) > 0.05 * cfg.tol
                    || half.tail_mass(cfg.tail_fraction) > 0.1 * cfg.tail_threshold
                {
                    break;
                }
                let (_, _, sup_half) = invariance_error(&half)?;
                if sup_half > cfg.tol {
                    break;
                }
                torus = half;
                sup = sup_half;
            }
            report.converged = true;
            report.final_error = sup;
            report.iterations.push(IterationRecord {
                error_sup: sup,
                error_sobolev_m: error_hm(&e_y, &e_x, cfg.m_sobolev),
                nondegeneracy_det: report
                    .iterations
                    .last()
                    .map(|r| r.nondegeneracy_det)
                    .unwrap_or(f64::NAN),
                sigma: 0.0,
                tail_mass: tail,
                n_modes: torus.n_modes(),
            });
            return Ok(Solved { torus, report });
        }
        if iter >= cfg.max_iter {
            report.failure = Some(FailureReason::MaxIterations);
            report.final_error = sup;
            return Ok(Solved { torus, report });
        }

        // stall handling: no contraction for two steps means the error sits
        // on the truncation floor (refine as often as the tail demands) or
        // the iteration is genuinely struggling (one rescue, then report).
        // Fresh resamples get a short grace period before stalls count.
        if grace > 0 {
            grace -= 1;
        } else if sup > 0.7 * best {
            stall += 1;
        } else {
            stall = 0;
        }
        best = best.min(sup);
        if stall >= 2 {
            if (under_resolved || !rescued) && torus.n_modes() * 2 <= cfg.mode_cap {
                rescued = !under_resolved;
                torus = torus.resample(torus.n_modes() * 2)?;
                report.mode_doublings += 1;
                best = f64::INFINITY;
                stall = 0;
                grace = 2;
                continue;
            }
            report.failure = Some(FailureReason::Stalled);
            report.final_error = sup;
            return Ok(Solved { torus, report });
        }

        let frame = assemble_frame(&torus)?;
        let step = newton_step(&torus, &frame, &e_y, &e_x, cfg.nondegeneracy_tol)?;
        report.max_projected_average =
            report.max_projected_average.max(step.projected_average.abs());
        report.iterations.push(IterationRecord {
            error_sup: sup,
            error_sobolev_m: error_hm(&e_y, &e_x, cfg.m_sobolev),
            nondegeneracy_det: step.nondegeneracy_det,
            sigma: step.sigma,
            tail_mass: tail,
            n_modes: torus.n_modes(),
        });
        torus = step.torus;
        iter += 1;
    }
}

fn error_hm(e_y: &PeriodicGridFunction, e_x: &PeriodicGridFunction, m: f64) -> f64 {
    let a = e_y.sobolev_norm(m);
    let b = e_x.sobolev_norm(m);
    (a * a + b * b).sqrt()
}

/// Invariance residual evaluated on a `factor`× finer grid than the torus'
/// own — an independent check that convergence is not a grid artifact.
pub fn verify_residual(torus: &TorusEmbedding, factor: usize) -> Result<f64, SolveError> {
    let fine = torus.resample(torus.n_modes() * factor)?;
    let (_, _, sup) = invariance_error(&fine)?;
    Ok(sup)
}

#[derive(Debug, Clone)]
pub struct UniquenessReport {
    pub matched: bool,
    /// recovered torus translation with K_b(θ) ≈ K_a(θ+ψ)
    pub psi: f64,
    pub distance: f64,
    pub mu_gap: f64,
}

/// Distance between two tori modulo the translation gauge: minimizes
/// sup‖K_b(θ) − K_a(θ+ψ)‖ over ψ by coarse scan plus golden-section
/// refinement, and compares drifts.
pub fn uniqueness_check(
    a: &TorusEmbedding,
    b: &TorusEmbedding,
    tol: f64,
) -> UniquenessReport {
    let n = a.n_modes().max(b.n_modes());
    let a = a.resample(n).expect("power of two");
    let b = b.resample(n).expect("power of two");
    let dist = |psi: f64| -> f64 {
        let ky = b.ky.sub(&a.ky.shift(psi));
        let kx = b.kx_periodic.sub(&a.kx_periodic.shift(psi)).add_scalar(-psi);
        ky.sup_norm().max(kx.sup_norm())
    };
    let coarse = 256;
    let mut best_psi = 0.0;
    let mut best = f64::INFINITY;
    for j in 0..coarse {
        let psi = TAU * j as f64 / coarse as f64;
        let d = dist(psi);
        if d < best {
            best = d;
            best_psi = psi;
        }
    }
    let (mut lo, mut hi) = (best_psi - TAU / coarse as f64, best_psi + TAU / coarse as f64);
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (hi - phi * (hi - lo), lo + phi * (hi - lo));
    let (mut fc, mut fd) = (dist(c), dist(d));
    for _ in 0..80 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = dist(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = dist(d);
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let psi = 0.5 * (lo + hi);
    let distance = dist(psi);
    let mu_gap = (a.mu() - b.mu()).abs();
    UniquenessReport {
        matched: distance < tol && mu_gap < tol,
        psi: psi.rem_euclid(TAU),
        distance,
        mu_gap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Potential;

    fn golden() -> DiophantineFrequency {
        DiophantineFrequency::golden()
    }

    fn diss_sm(lambda: f64, eps: f64) -> MapModel {
        MapModel::dissipative_standard(lambda, 0.0, eps, Potential::SingleHarmonic)
    }

    /// Walk ε up in steps small enough for the first cold start.
    fn continue_to(model: &MapModel, omega: &DiophantineFrequency, eps: f64) -> TorusEmbedding {
        let cfg = SolverConfig::default();
        let steps = (eps / 0.08).ceil().max(1.0) as usize;
        let mut torus: Option<TorusEmbedding> = None;
        for i in 1..=steps {
            let e = eps * i as f64 / steps as f64;
            let m = model.with_epsilon(e);
            let seed = torus.take().map(Seed::Warm).unwrap_or(Seed::Cold);
            let solved = solve(&m, omega, &cfg, seed).unwrap();
            assert!(solved.report.converged, "ε={e}");
            torus = Some(solved.torus);
        }
        torus.unwrap()
    }

    #[test]
    fn unperturbed_torus_is_exact() {
        for &lambda in &[0.1, 0.3, 0.5, 0.7, 0.9] {
            let model = diss_sm(lambda, 0.0);
            let t = TorusEmbedding::unperturbed(&model, &golden(), 64).unwrap();
            let (_, _, sup) = invariance_error(&t).unwrap();
            assert!(sup <= 1e-14, "λ={lambda}: sup error {sup:.3e}");
            assert_eq!(t.mu(), (1.0 - lambda) * golden().omega());
        }
        let cons = MapModel::conservative_standard(0.0, Potential::SingleHarmonic);
        let t = TorusEmbedding::unperturbed(&cons, &golden(), 64).unwrap();
        let (_, _, sup) = invariance_error(&t).unwrap();
        assert!(sup <= 1e-14);
    }

    #[test]
    fn constant_error_when_mu_is_offset() {
        let model = diss_sm(0.9, 0.0);
        let t = TorusEmbedding::unperturbed(&model, &golden(), 64).unwrap();
        let off = t.with_mu(t.mu() + 1e-3);
        let (e_y, e_x, sup) = invariance_error(&off).unwrap();
        assert!((sup - 1e-3).abs() < 1e-12);
        for (&a, &b) in e_y.samples().iter().zip(e_x.samples()) {
            assert!((a - 1e-3).abs() < 1e-14);
            assert!((b - 1e-3).abs() < 1e-14);
        }
    }

    #[test]
    fn frame_closed_forms_at_unperturbed_dissipative() {
        let model = diss_sm(0.9, 0.0);
        let t = TorusEmbedding::unperturbed(&model, &golden(), 64).unwrap();
        let f = assemble_frame(&t).unwrap();
        for j in 0..64 {
            assert!((f.s.samples()[j] + 0.9).abs() < 1e-12, "S ≡ −λ");
            assert!((f.n_field.samples()[j] - 1.0).abs() < 1e-12, "N ≡ 1");
        }
        let (a1, a2) = f.a_tilde.as_ref().unwrap();
        for j in 0..64 {
            assert!((a1.samples()[j] - 1.0).abs() < 1e-12, "Ã₁ ≡ 1");
            assert!((a2.samples()[j] + 1.0).abs() < 1e-12, "Ã₂ ≡ −1");
        }
        assert!(f.gamma_sup < 1e-14);
        assert!(f.reducibility_defect < 1e-12);
    }

    #[test]
    fn frame_twist_at_unperturbed_conservative() {
        let model = MapModel::conservative_standard(0.0, Potential::SingleHarmonic);
        let t = TorusEmbedding::unperturbed(&model, &golden(), 64).unwrap();
        let f = assemble_frame(&t).unwrap();
        for j in 0..64 {
            assert!((f.s.samples()[j] + 1.0).abs() < 1e-12, "twist datum S ≡ −1");
        }
        assert!(f.reducibility_defect < 1e-12);
    }

    #[test]
    fn nondegeneracy_determinant_closed_form() {
        let model = diss_sm(0.9, 0.0);
        let t = TorusEmbedding::unperturbed(&model, &golden(), 64).unwrap();
        let frame = assemble_frame(&t).unwrap();
        let (e_y, e_x, _) = invariance_error(&t).unwrap();
        let step = newton_step(&t, &frame, &e_y, &e_x, 1e-8).unwrap();
        assert!(
            (step.nondegeneracy_det - 1.0).abs() < 1e-12,
            "det [[−0.9, 1], [−0.1, −1]] = 1, got {}",
            step.nondegeneracy_det
        );
    }

    #[test]
    fn zero_error_is_fixed_point() {
        let model = diss_sm(0.9, 0.0);
        let t = TorusEmbedding::unperturbed(&model, &golden(), 64).unwrap();
        let frame = assemble_frame(&t).unwrap();
        let (e_y, e_x, _) = invariance_error(&t).unwrap();
        let step = newton_step(&t, &frame, &e_y, &e_x, 1e-8).unwrap();
        assert!(step.sigma.abs() < 1e-14);
        assert!(step.correction_sup < 1e-13);
        assert!((step.torus.mu() - t.mu()).abs() < 1e-14);
    }

    #[test]
    fn single_step_recovers_drift_offset_exactly() {
        // affine map: the averaged system is exact, σ = −δμ in one step
        let model = diss_sm(0.9, 0.0);
        let t = TorusEmbedding::unperturbed(&model, &golden(), 64).unwrap();
        let off = t.with_mu(t.mu() + 1e-3);
        let frame = assemble_frame(&off).unwrap();
        let (e_y, e_x, _) = invariance_error(&off).unwrap();
        let step = newton_step(&off, &frame, &e_y, &e_x, 1e-8).unwrap();
        assert!((step.sigma + 1e-3).abs() < 1e-12, "σ = {}", step.sigma);
        let (_, _, sup) = invariance_error(&step.torus).unwrap();
        assert!(sup < 1e-13);
    }

    #[test]
    fn solve_at_zero_epsilon_verifies_without_stepping() {
        let model = diss_sm(0.9, 0.0);
        let solved = solve(&model, &golden(), &SolverConfig::default(), Seed::Cold).unwrap();
        assert!(solved.report.converged);
        assert_eq!(solved.report.iterations.len(), 1, "verification record only");
        assert!(solved.report.final_error <= 1e-14);
    }

    #[test]
    fn cold_start_guard() {
        let model = diss_sm(0.9, 0.5);
        assert!(matches!(
            solve(&model, &golden(), &SolverConfig::default(), Seed::Cold),
            Err(SolveError::ColdStartBeyondThreshold { .. })
        ));
    }

    #[test]
    fn converges_dissipative_and_checks_fine_grid() {
        let cfg = SolverConfig::default();
        let mut torus: Option<TorusEmbedding> = None;
        for &eps in &[0.05, 0.2, 0.35, 0.5] {
            let model = diss_sm(0.9, eps);
            let seed = torus.take().map(Seed::Warm).unwrap_or(Seed::Cold);
            let solved = solve(&model, &golden(), &cfg, seed).unwrap();
            assert!(solved.report.converged, "ε={eps}");
            torus = Some(solved.torus);
        }
        let t = torus.unwrap();
        let fine = verify_residual(&t, 4).unwrap();
        assert!(fine < 10.0 * cfg.tol, "fine-grid residual {fine:.3e}");
        assert!(t.min_dk_norm() > 0.1, "immersion");
    }

    #[test]
    fn converges_conservative_with_quadratic_order() {
        let cfg = SolverConfig::default();
        let mut torus: Option<TorusEmbedding> = None;
        for &eps in &[0.1, 0.3, 0.5] {
            let model = MapModel::conservative_standard(eps, Potential::SingleHarmonic);
            let seed = torus.take().map(Seed::Warm).unwrap_or(Seed::Cold);
            let solved = solve(&model, &golden(), &cfg, seed).unwrap();
            assert!(solved.report.converged, "ε={eps}");
            torus = Some(solved.torus);
        }
        let t = torus.unwrap();
        assert!(verify_residual(&t, 4).unwrap() < 1e-10);
        // conservative mode keeps μ = 0 and the projected Ẽ₂ average small
        assert!((t.mu() - 0.0).abs() < 1e-15);
    }

    #[test]
    fn drift_identity_across_lambda_grid() {
        let cfg = SolverConfig::default();
        let w = golden();
        for &lambda in &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9] {
            let model = diss_sm(lambda, 0.0);
            let t = TorusEmbedding::unperturbed(&model, &w, 64).unwrap();
            // start from a wrong drift and let the solver pull it back
            let seeded = t.with_mu(t.mu() + 1e-4);
            let solved = solve(&model, &w, &cfg, Seed::Warm(seeded)).unwrap();
            assert!(solved.report.converged);
            let exact = (1.0 - lambda) * w.omega();
            assert!(
                (solved.torus.mu() - exact).abs() < 1e-12,
                "λ={lambda}: μ = {} vs (1−λ)ω = {exact}",
                solved.torus.mu()
            );
        }
    }

    #[test]
    fn uniqueness_recovers_constructed_shift() {
        let model = diss_sm(0.9, 0.3);
        let a = continue_to(&model, &golden(), 0.3);
        let psi = 0.7;
        let b = TorusEmbedding::from_parts(
            a.model().clone(),
            a.omega().clone(),
            a.mu(),
            a.ky.shift(psi),
            a.kx_periodic.shift(psi).add_scalar(psi),
        );
        // b as constructed has nonzero mean(kx): still a valid embedding
        let report = uniqueness_check(&a, &b, 1e-8);
        assert!(report.matched, "distance {}", report.distance);
        assert!((report.psi - psi).abs() < 1e-10, "ψ = {}", report.psi);
    }

    #[test]
    fn gauge_invariance_of_the_solution() {
        let cfg = SolverConfig::default();
        let model = diss_sm(0.9, 0.3);
        let base = continue_to(&model, &golden(), 0.3);
        // pre-rotate the seed by an arbitrary phase; the gauge fixing must
        // land on the same torus and drift
        let psi = 1.234;
        let rotated = TorusEmbedding::from_parts(
            base.model().clone(),
            base.omega().clone(),
            base.mu() + 3e-5,
            base.ky.shift(psi),
            base.kx_periodic.shift(psi).add_scalar(psi),
        );
        let again = solve(&model, &golden(), &cfg, Seed::Warm(rotated)).unwrap();
        assert!(again.report.converged);
        let report = uniqueness_check(&base, &again.torus, 1e-9);
        assert!(report.matched, "distance {} μ gap {}", report.distance, report.mu_gap);
        assert!((again.torus.mu() - base.mu()).abs() < 1e-10);
    }

    #[test]
    fn two_seeds_same_torus() {
        let cfg = SolverConfig::default();
        let model = diss_sm(0.9, 0.08);
        let a = solve(&model, &golden(), &cfg, Seed::Cold).unwrap().torus;
        // second route: warm start from a deliberately rough seed
        let rough = TorusEmbedding::unperturbed(&model, &golden(), 128)
            .unwrap()
            .with_mu(model.unperturbed_mu(golden().omega()) * (1.0 + 1e-3));
        let b = solve(&model, &golden(), &cfg, Seed::Warm(rough)).unwrap().torus;
        let rep = uniqueness_check(&a, &b, 1e-9);
        assert!(rep.matched && rep.mu_gap < 1e-10, "μ gap {}", rep.mu_gap);
    }

    #[test]
    fn conservative_limit_of_dissipative_tori() {
        // as λ → 1 at fixed ε the attractor approaches the conservative torus
        // and μ → 0 like (1−λ)ω
        let cfg = SolverConfig::default();
        let w = golden();
        let eps = 0.05;
        let cons = solve(
            &MapModel::conservative_standard(eps, Potential::SingleHarmonic),
            &w,
            &cfg,
            Seed::Cold,
        )
        .unwrap()
        .torus;
        let mut prev_gap = f64::INFINITY;
        for &lambda in &[0.9, 0.99, 0.999] {
            let model = diss_sm(lambda, eps);
            let t = solve(&model, &w, &cfg, Seed::Cold).unwrap().torus;
            let gap = uniqueness_check(&cons, &t, f64::INFINITY).distance;
            assert!(
                gap < 10.0 * eps * (1.0 - lambda) + 1e-9,
                "λ={lambda}: distance {gap} not O(ε(1−λ))"
            );
            assert!(gap < prev_gap + 1e-12);
            prev_gap = gap;
            assert!((t.mu() - (1.0 - lambda) * w.omega()).abs() < 0.1 * (1.0 - lambda));
        }
    }

    #[test]
    fn lift_discontinuity_detected() {
        // near-Nyquist angle content of amplitude π makes the angle error
        // jump by ~2π between adjacent nodes: a lost torus, not data
        let model = diss_sm(0.9, 0.0);
        let t = TorusEmbedding::unperturbed(&model, &golden(), 64).unwrap();
        let n = t.n_modes();
        let wild = PeriodicGridFunction::from_fn(n, |th| {
            3.0 * ((n as f64 / 2.0 - 1.0) * th).cos()
        })
        .unwrap();
        let broken = TorusEmbedding::from_parts(
            t.model().clone(),
            t.omega().clone(),
            t.mu(),
            t.ky.clone(),
            wild,
        );
        assert!(matches!(invariance_error(&broken), Err(SolveError::LiftDiscontinuity)));
    }

    #[test]
    fn degenerate_embedding_detected() {
        // kx_periodic = −sin θ gives K_x'(0) = 0 with K_y' ≡ 0: not an immersion
        let model = diss_sm(0.9, 0.0);
        let t = TorusEmbedding::unperturbed(&model, &golden(), 64).unwrap();
        let n = t.n_modes();
        let fold = PeriodicGridFunction::from_fn(n, |th| -th.sin()).unwrap();
        let pinched = TorusEmbedding::from_parts(
            t.model().clone(),
            t.omega().clone(),
            t.mu(),
            t.ky.clone(),
            fold,
        );
        assert!(matches!(
            assemble_frame(&pinched),
            Err(SolveError::DegenerateEmbedding { .. })
        ));
    }

    #[test]
    fn nondegeneracy_threshold_enforced() {
        let model = diss_sm(0.9, 0.0);
        let t = TorusEmbedding::unperturbed(&model, &golden(), 64).unwrap();
        let frame = assemble_frame(&t).unwrap();
        let (e_y, e_x, _) = invariance_error(&t).unwrap();
        // determinant here is exactly 1; a threshold above that must refuse
        match newton_step(&t, &frame, &e_y, &e_x, 10.0) {
            Err(SolveError::NondegeneracyFailure { det, .. }) => {
                assert!((det - 1.0).abs() < 1e-12)
            }
            other => panic!("expected NondegeneracyFailure, got {other:?}"),
        }
    }

    #[test]
    fn tori_at_different_epsilon_do_not_match() {
        let a = continue_to(&diss_sm(0.9, 0.1), &golden(), 0.1);
        let b = continue_to(&diss_sm(0.9, 0.3), &golden(), 0.3);
        let rep = uniqueness_check(&a, &b, 1e-8);
        assert!(!rep.matched);
        assert!(rep.distance > 1e-2, "distance {} bounded below", rep.distance);
    }

    #[test]
    fn quadratic_convergence_witness() {
        let cfg = SolverConfig::default();
        let model = diss_sm(0.9, 0.4);
        let good = continue_to(&model, &golden(), 0.4);
        // re-enter the basin with a perturbation sized so the error walks
        // two clean quadratic steps before touching the residual floor
        let n = good.n_modes();
        let bump = PeriodicGridFunction::from_fn(n, |t| 2.5e-3 * t.cos()).unwrap();
        let bumped = TorusEmbedding::from_parts(
            good.model().clone(),
            good.omega().clone(),
            good.mu() + 5e-4,
            good.ky.add(&bump),
            good.kx_periodic.clone(),
        );
        let solved = solve(&model, &golden(), &cfg, Seed::Warm(bumped)).unwrap();
        assert!(solved.report.converged);
        let order = solved.report.fitted_order().expect("enough iterates");
        assert!(order >= 1.8, "fitted order {order}");
        let c = solved.report.quadratic_constant().expect("pairs available");
        assert!(c.is_finite() && c < 1e3, "e_{{n+1}} ≤ C e_n^1.8 with C = {c}");
    }
}
