//! Continuation of invariant tori in the perturbing parameter and breakdown
//! estimation from the blow-up of Sobolev norms.
//!
//! The continuation advances ε in adaptive steps (halve on failure, grow on
//! easy success), warm-starting each solve from the previous torus and
//! doubling the Fourier grid when the spectral tail fattens. A torus persists
//! exactly while high-order Sobolev norms of K stay bounded, and near the
//! breakdown they blow up like a power law ‖K‖_{H^m} ≈ A(ε_c − ε)^{−β}; the
//! estimator fits that law on the trailing window of the trace.

use crate::bundles;
use crate::fourier::DiophantineFrequency;
use crate::models::MapModel;
use crate::newton::{solve, Seed, SolveError, SolverConfig, TorusEmbedding};
use crate::par;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ContinuationError {
    #[error("need ≥ {need} converged records with sufficient norm growth, have {have}")]
    InsufficientData { need: usize, have: usize },
    #[error("Sobolev index {0} is not tracked by this trace")]
    UntrackedIndex(f64),
}

#[derive(Debug, Clone)]
pub struct ContinuationPolicy {
    pub step_init: f64,
    pub step_grow: f64,
    pub step_shrink: f64,
    pub step_floor: f64,
    pub step_cap: f64,
    /// tighter step cap applied once the torus needs `refine_threshold`
    /// modes — mode count is the wall-proximity sensor, and the trailing
    /// records must come dense enough for the blow-up fit
    pub step_cap_refined: f64,
    pub refine_threshold: usize,
    /// grow the step when a solve converges within this many iterations
    pub easy_iterations: usize,
    pub solver: SolverConfig,
    /// Sobolev indices recorded per accepted step
    pub m_set: Vec<f64>,
    /// compute the minimum bundle angle per record (dissipative families)
    pub track_bundles: bool,
}

impl Default for ContinuationPolicy {
    fn default() -> Self {
        Self {
            step_init: 0.02,
            step_grow: 1.3,
            step_shrink: 0.5,
            step_floor: 1e-6,
            step_cap: 0.05,
            step_cap_refined: 1e-3,
            refine_threshold: 4096,
            easy_iterations: 4,
            solver: SolverConfig::default(),
            m_set: vec![1.0, 2.0, 3.0],
            track_bundles: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContinuationRecord {
    pub epsilon: f64,
    pub mu: f64,
    pub n_modes: usize,
    pub sup_error: f64,
    /// ‖K‖_{H^m} for each m in the policy's m_set
    pub sobolev_norms: Vec<f64>,
    pub min_bundle_angle: Option<f64>,
    pub wall_time: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ContinuationTrace {
    pub m_set: Vec<f64>,
    pub records: Vec<ContinuationRecord>,
    pub last_converged_epsilon: f64,
    /// size of the last attempted step, used by the last-converged fallback
    pub last_step: f64,
    pub failure_reason: Option<String>,
}

impl ContinuationTrace {
    pub fn norms_for(&self, m: f64) -> Result<Vec<(f64, f64)>, ContinuationError> {
        let idx = self
            .m_set
            .iter()
            .position(|&v| (v - m).abs() < 1e-12)
            .ok_or(ContinuationError::UntrackedIndex(m))?;
        Ok(self
            .records
            .iter()
            .map(|r| (r.epsilon, r.sobolev_norms[idx]))
            .collect())
    }
}

/// A continuation line: owns the current torus and its trace; each accepted
/// step seeds the next, so steps within one line are strictly sequential.
#[derive(Debug)]
pub struct Continuation {
    model: MapModel,
    omega: DiophantineFrequency,
    policy: ContinuationPolicy,
    current: Option<TorusEmbedding>,
    trace: ContinuationTrace,
    step: f64,
    grow_cap: f64,
}

impl Continuation {
    pub fn new(model: MapModel, omega: DiophantineFrequency, policy: ContinuationPolicy) -> Self {
        let trace = ContinuationTrace { m_set: policy.m_set.clone(), ..Default::default() };
        let step = policy.step_init;
        let grow_cap = policy.step_cap;
        Self { model, omega, policy, current: None, trace, step, grow_cap }
    }

    /// Resume from a converged checkpoint torus.
    pub fn from_checkpoint(torus: TorusEmbedding, policy: ContinuationPolicy) -> Self {
        let mut c = Self::new(torus.model().clone(), torus.omega().clone(), policy);
        c.trace.last_converged_epsilon = torus.epsilon();
        c.current = Some(torus);
        c
    }

    pub fn trace(&self) -> &ContinuationTrace {
        &self.trace
    }

    pub fn current(&self) -> Option<&TorusEmbedding> {
        self.current.as_ref()
    }

    pub fn into_parts(self) -> (ContinuationTrace, Option<TorusEmbedding>) {
        (self.trace, self.current)
    }

    fn accept(&mut self, torus: &TorusEmbedding, sup_error: f64, started: Instant) {
        let min_bundle_angle = if self.policy.track_bundles && !torus.model().is_conservative() {
            bundles::analyze(torus).ok().map(|b| b.min_angle)
        } else {
            None
        };
        self.trace.records.push(ContinuationRecord {
            epsilon: torus.epsilon(),
            mu: torus.mu(),
            n_modes: torus.n_modes(),
            sup_error,
            sobolev_norms: torus.sobolev_norms(&self.policy.m_set),
            min_bundle_angle,
            wall_time: started.elapsed().as_secs_f64(),
        });
        self.trace.last_converged_epsilon = torus.epsilon();
    }

    /// Advance to `eps_end` (or until the step floor / mode cap is hit).
    /// A target at or below the current ε returns the trace unchanged.
    pub fn run(&mut self, eps_end: f64) -> Result<&ContinuationTrace, SolveError> {
        if eps_end <= self.trace.last_converged_epsilon && self.current.is_some() {
            return Ok(&self.trace);
        }
        if self.current.is_none() {
            let started = Instant::now();
            let base = self.model.with_epsilon(0.0);
            let solved = solve(&base, &self.omega, &self.policy.solver, Seed::Cold)?;
            debug_assert!(solved.report.converged);
            self.accept(&solved.torus, solved.report.final_error, started);
            self.current = Some(solved.torus);
        }

        // the step ladder and its growth latch persist across calls, so a
        // staged march (run to 0.5, then 0.9, then beyond) behaves exactly
        // like a single long run
        let mut last_failure = "step_floor";
        loop {
            let here = self.trace.last_converged_epsilon;
            if here >= eps_end {
                break;
            }
            if self.step < self.policy.step_floor {
                self.trace.failure_reason = Some(last_failure.into());
                break;
            }
            let near_wall = self
                .current
                .as_ref()
                .is_some_and(|t| t.n_modes() >= self.policy.refine_threshold);
            let step_here =
                if near_wall { self.step.min(self.policy.step_cap_refined) } else { self.step };
            let target = (here + step_here).min(eps_end);
            let started = Instant::now();
            let model = self.model.with_epsilon(target);
            let seed = Seed::Warm(self.current.clone().expect("seeded above"));
            match solve(&model, &self.omega, &self.policy.solver, seed) {
                Ok(solved) if solved.report.converged => {
                    self.trace.last_step = target - here;
                    self.accept(&solved.torus, solved.report.final_error, started);
                    self.current = Some(solved.torus);
                    if solved.report.iterations.len() <= self.policy.easy_iterations {
                        self.step = (self.step * self.policy.step_grow).min(self.grow_cap);
                    }
                }
                Ok(solved) => {
                    // a smaller step may still fit under the mode cap; the
                    // cap is reported once the floor confirms it binds
                    last_failure =
                        if solved.report.failure == Some(crate::newton::FailureReason::ResourceCap)
                        {
                            "resource_cap"
                        } else {
                            "step_floor"
                        };
                    self.step *= self.policy.step_shrink;
                    self.grow_cap = self.step;
                }
                Err(SolveError::NondegeneracyFailure { .. })
                | Err(SolveError::DegenerateEmbedding { .. })
                | Err(SolveError::LiftDiscontinuity)
                | Err(SolveError::SmallDivisorOverflow) => {
                    last_failure = "step_floor";
                    self.step *= self.policy.step_shrink;
                    self.grow_cap = self.step;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(&self.trace)
    }
}

/// One-call continuation from `eps_start` (0 means a cold start) to `eps_end`.
pub fn continue_torus(
    model: &MapModel,
    omega: &DiophantineFrequency,
    eps_start: f64,
    eps_end: f64,
    policy: &ContinuationPolicy,
) -> Result<(ContinuationTrace, Option<TorusEmbedding>), SolveError> {
    let mut c = Continuation::new(model.clone(), omega.clone(), policy.clone());
    if eps_start > 0.0 {
        c.run(eps_start)?;
    }
    c.run(eps_end)?;
    Ok(c.into_parts())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMethod {
    SobolevFit,
    LastConverged,
}

#[derive(Debug, Clone)]
pub struct BreakdownEstimate {
    pub epsilon_crit: f64,
    pub beta: f64,
    pub fit_window: (f64, f64),
    pub fit_residual: f64,
    pub method: EstimateMethod,
}

/// Fit ‖K‖_{H^m} ≈ A(ε_c − ε)^{−β} on the trailing records whose norm
/// exceeds three times its value at ε ≈ 0.5·ε_last; least squares on the
/// log-transformed data with a golden-section search over ε_c. Falls back to
/// last-converged-plus-step when the trace never entered the blow-up regime.
pub fn estimate_breakdown(
    trace: &ContinuationTrace,
    m: f64,
) -> Result<BreakdownEstimate, ContinuationError> {
    let pts = trace.norms_for(m)?;
    if pts.len() < 6 {
        return Err(ContinuationError::InsufficientData { need: 6, have: pts.len() });
    }
    let eps_last = pts.last().unwrap().0;
    let half = 0.5 * eps_last;
    let h_ref = pts
        .iter()
        .min_by(|a, b| (a.0 - half).abs().partial_cmp(&(b.0 - half).abs()).unwrap())
        .unwrap()
        .1;
    let window: Vec<(f64, f64)> = pts.iter().copied().filter(|&(_, h)| h >= 3.0 * h_ref).collect();
    if window.len() < 6 {
        return Ok(BreakdownEstimate {
            epsilon_crit: trace.last_converged_epsilon + trace.last_step.max(1e-6),
            beta: f64::NAN,
            fit_window: (window.first().map(|p| p.0).unwrap_or(eps_last), eps_last),
            fit_residual: f64::NAN,
            method: EstimateMethod::LastConverged,
        });
    }

    // inner linear least squares for (ln A, β) at fixed ε_c
    let residual_at = |eps_c: f64| -> (f64, f64) {
        let xs: Vec<f64> = window.iter().map(|&(e, _)| (eps_c - e).ln()).collect();
        let ys: Vec<f64> = window.iter().map(|&(_, h)| h.ln()).collect();
        let n = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = (sy - slope * sx) / n;
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let r = y - (intercept + slope * x);
                r * r
            })
            .sum();
        ((rss / n).sqrt(), -slope)
    };

    let (mut lo, mut hi) = (eps_last + 1e-9, eps_last + 0.2);
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (hi - phi * (hi - lo), lo + phi * (hi - lo));
    let (mut fc, mut fd) = (residual_at(c).0, residual_at(d).0);
    for _ in 0..200 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = residual_at(c).0;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = residual_at(d).0;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    let eps_c = 0.5 * (lo + hi);
    let (residual, beta) = residual_at(eps_c);
    Ok(BreakdownEstimate {
        epsilon_crit: eps_c,
        beta,
        fit_window: (window.first().unwrap().0, eps_last),
        fit_residual: residual,
        method: EstimateMethod::SobolevFit,
    })
}

#[derive(Debug, Clone)]
pub struct RegionScan {
    /// per-ray breakdown radius: (angle, radius)
    pub boundary: Vec<(f64, f64)>,
    /// row-major `resolution`×`resolution` existence matrix over the window
    pub exists: Vec<bool>,
    pub resolution: usize,
    /// (ε₁, ε₂) extent: cells cover [−extent, extent]² when `full_plane`,
    /// else [0, extent]²
    pub extent: f64,
    pub full_plane: bool,
    /// rays where a torus reappeared beyond the first breakdown radius
    /// (star-shape violations), as (angle, radius of the reappearance)
    pub violations: Vec<(f64, f64)>,
}

impl RegionScan {
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let lo = if self.full_plane { -self.extent } else { 0.0 };
        let span = if self.full_plane { 2.0 * self.extent } else { self.extent };
        (
            lo + span * (col as f64 + 0.5) / self.resolution as f64,
            lo + span * (row as f64 + 0.5) / self.resolution as f64,
        )
    }
}

/// Existence region of the dissipative standard map with the two-harmonic
/// potential ε₁ sin x + ε₂ sin 2x: continue along rays from the origin until
/// breakdown and mark cells below the breakdown radius. Rays are independent
/// work items and run on the worker pool.
pub fn existence_region_scan(
    lambda: f64,
    omega: &DiophantineFrequency,
    resolution: usize,
    extent: f64,
    full_plane: bool,
    n_rays: usize,
    policy: &ContinuationPolicy,
) -> RegionScan {
    assert!(resolution >= 32, "grid resolution must be at least 32");
    assert!(n_rays >= 2);
    let angles: Vec<f64> = if full_plane {
        (0..n_rays).map(|i| std::f64::consts::TAU * i as f64 / n_rays as f64).collect()
    } else {
        (0..n_rays)
            .map(|i| std::f64::consts::FRAC_PI_2 * i as f64 / (n_rays - 1) as f64)
            .collect()
    };
    let max_radius = extent * 2.0_f64.sqrt();
    let omega_c = omega.clone();
    let policy_c = policy.clone();
    let results: Vec<(f64, f64, Option<f64>)> = par::map_collect(angles, move |phi: f64| {
        let model = MapModel::dissipative_standard(
            lambda,
            0.0,
            0.0,
            crate::models::Potential::TwoHarmonic { eps1: phi.cos(), eps2: phi.sin() },
        );
        let mut line = Continuation::new(model.clone(), omega_c.clone(), policy_c.clone());
        let radius = match line.run(max_radius) {
            Ok(trace) => trace.last_converged_epsilon,
            Err(_) => 0.0,
        };
        // probe beyond the breakdown radius: a convergent torus out there is
        // a star-shape violation and gets reported instead of assumed away
        let mut violation = None;
        if radius > 0.0 && radius < max_radius {
            if let Some(last) = line.current() {
                for factor in [1.05, 1.15, 1.3] {
                    let probe_eps = radius * factor;
                    if probe_eps > max_radius {
                        break;
                    }
                    let m = model.with_epsilon(probe_eps);
                    if let Ok(s) = solve(&m, &omega_c, &policy_c.solver, Seed::Warm(last.clone()))
                    {
                        if s.report.converged {
                            violation = Some(probe_eps);
                            break;
                        }
                    }
                }
            }
        }
        (phi, radius, violation)
    });

    let boundary: Vec<(f64, f64)> = results.iter().map(|&(a, r, _)| (a, r)).collect();
    let violations: Vec<(f64, f64)> =
        results.iter().filter_map(|&(a, _, v)| v.map(|radius| (a, radius))).collect();

    let span = if full_plane { std::f64::consts::TAU } else { std::f64::consts::FRAC_PI_2 };
    let radius_at = |phi: f64| -> f64 {
        let phi = if full_plane { phi.rem_euclid(span) } else { phi.clamp(0.0, span) };
        let pos = phi / span * (n_rays as f64 - if full_plane { 0.0 } else { 1.0 });
        let i0 = (pos.floor() as usize).min(n_rays - 1);
        let i1 = if full_plane { (i0 + 1) % n_rays } else { (i0 + 1).min(n_rays - 1) };
        let t = pos - i0 as f64;
        boundary[i0].1 * (1.0 - t) + boundary[i1].1 * t
    };

    let mut scan = RegionScan {
        boundary: boundary.clone(),
        exists: vec![false; resolution * resolution],
        resolution,
        extent,
        full_plane,
        violations,
    };
    for row in 0..resolution {
        for col in 0..resolution {
            let (e1, e2) = scan.cell_center(row, col);
            let r = (e1 * e1 + e2 * e2).sqrt();
            if r <= radius_at(f64::atan2(e2, e1)) {
                scan.exists[row * resolution + col] = true;
            }
        }
    }
    scan
}
