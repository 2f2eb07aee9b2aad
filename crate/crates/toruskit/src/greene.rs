//! Periodic-orbit (Greene-style) breakdown diagnostics.
//!
//! The invariant circle of rotation ω is approximated by periodic orbits
//! whose rotation numbers p/q run through the continued-fraction convergents
//! of ω/2π. While the circle exists those orbits are (nearly) marginally
//! stable: in the conservative case their residues R = (2 − tr M)/4 tend to
//! zero along the convergents, and in the dissipative case the monodromy
//! eigenvalues of the tongue-center orbits tend to (1, λ^q). Breakdown is
//! flagged where those diagnostics stop shrinking and sustain growth, and
//! the threshold is bracketed by bisection in ε.
//!
//! Orbits are found by Newton on the full closure map f^q(z) − z − (0, 2πp)
//! on lifts: in the conservative case the unknowns are (y₀, x₀); in the
//! dissipative case periodic orbits fill a whole drift interval (an Arnold
//! tongue), so x₀ is swept and the unknowns are (y₀, μ).

use crate::fourier::DiophantineFrequency;
use crate::models::{det2, mat2_mul, solve2, CylinderState, MapModel, Mat2};
use crate::par;
use num_complex::Complex64;
use std::collections::HashMap;
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GreeneError {
    #[error("orbit Newton diverged for p/q = {p}/{q} at ε = {eps}")]
    NewtonDiverged { p: i64, q: u64, eps: f64 },
    #[error("closure Jacobian singular for p/q = {p}/{q} (tangency)")]
    SingularClosureJacobian { p: i64, q: u64 },
    #[error("tongue sweep for {p}/{q} converged at {got}/{want} sample points")]
    IncompleteTongue { p: i64, q: u64, got: usize, want: usize },
    #[error("stability diagnostics non-monotone in q at ε = {eps}; refine the grid")]
    UnresolvedCriterion { eps: f64 },
    #[error("no breakdown bracket inside the scanned ε grid")]
    NoBracket,
}

/// A continued-fraction convergent p/q of the rotation number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RationalApproximant {
    pub p: i64,
    pub q: u64,
}

impl RationalApproximant {
    /// rotation in radians per iterate
    pub fn value(&self) -> f64 {
        TAU * self.p as f64 / self.q as f64
    }
}

#[derive(Debug, Clone)]
pub struct ApproximantSequence {
    pub convergents: Vec<RationalApproximant>,
    /// the expansion terminated: ω/2π is (numerically) rational
    pub rational: bool,
}

/// Continued-fraction convergents of ω/2π with denominator ≥ 2. For the
/// golden mean these are ratios of consecutive Fibonacci numbers.
pub fn approximants(omega: &DiophantineFrequency, count: usize) -> ApproximantSequence {
    let rho = omega.rotation();
    let mut x = rho;
    let (mut h0, mut h1): (i64, i64) = (1, x.floor() as i64);
    let (mut k0, mut k1): (i64, i64) = (0, 1);
    x -= x.floor();
    let mut out = Vec::new();
    let mut rational = false;
    while out.len() < count {
        if x.abs() < 1e-12 {
            rational = true;
            break;
        }
        x = 1.0 / x;
        let a = x.floor();
        x -= a;
        let h2 = a as i64 * h1 + h0;
        let k2 = a as i64 * k1 + k0;
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        if k1 >= 2 {
            out.push(RationalApproximant { p: h1, q: k1 as u64 });
        }
        if k1 > 1_000_000_000 {
            break;
        }
    }
    ApproximantSequence { convergents: out, rational }
}

#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    pub p: i64,
    pub q: u64,
    /// the q states along the orbit, angles wrapped for reporting
    pub points: Vec<CylinderState>,
    /// drift at which the orbit closes (the family's μ in the conservative case)
    pub mu: f64,
    pub monodromy: Mat2,
    pub eigenvalues: [Complex64; 2],
    /// ln|det(monodromy)| accumulated step by step; equals q·ln λ up to
    /// roundoff for a conformally symplectic family
    pub log_det_abs: f64,
    /// (2 − tr M)/4 — the classical conservative stability indicator
    pub residue: f64,
    pub closure_defect: f64,
}

/// Monodromy, drift-derivative and log-determinant accumulation over q
/// iterates. The determinant of the accumulated 2×2 product cancels
/// catastrophically once λ^q drops below the roundoff of its O(1) entries,
/// so the determinant is carried as a running sum of per-step logs.
fn sweep_q(model: &MapModel, z0: CylinderState, q: u64) -> (CylinderState, Mat2, [f64; 2], f64) {
    let mut z = z0;
    let mut m: Mat2 = [[1.0, 0.0], [0.0, 1.0]];
    let mut d = [0.0_f64, 0.0];
    let mut log_det = 0.0_f64;
    let has_drift = !model.is_conservative();
    for _ in 0..q {
        let j = model.jacobian(z);
        if has_drift {
            let dmu = model.drift_derivative(z).expect("dissipative family");
            d = [
                j[0][0] * d[0] + j[0][1] * d[1] + dmu[0],
                j[1][0] * d[0] + j[1][1] * d[1] + dmu[1],
            ];
        }
        log_det += det2(&j).abs().ln();
        m = mat2_mul(&j, &m);
        z = model.apply(z);
    }
    (z, m, d, log_det)
}

fn eigenvalues_of(m: &Mat2, log_det: f64) -> [Complex64; 2] {
    let tr = m[0][0] + m[1][1];
    let det = log_det.exp();
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        // stable pairing: big root from the trace, small root through the
        // log determinant (the product form cannot cancel)
        let big = 0.5 * (tr + tr.signum() * disc.sqrt());
        if big == 0.0 {
            return [Complex64::new(0.0, 0.0); 2];
        }
        let small = big.signum() * (log_det - big.abs().ln()).exp();
        [Complex64::new(big, 0.0), Complex64::new(small, 0.0)]
    } else {
        let im = 0.5 * (-disc).sqrt();
        [Complex64::new(0.5 * tr, im), Complex64::new(0.5 * tr, -im)]
    }
}

fn build_orbit(
    model: &MapModel,
    z0: CylinderState,
    p: i64,
    q: u64,
    mu: f64,
) -> PeriodicOrbit {
    let mut points = Vec::with_capacity(q as usize);
    let mut z = z0;
    for _ in 0..q {
        points.push(CylinderState::new(z.y, z.x_wrapped()));
        z = model.apply(z);
    }
    let (zq, m, _, log_det) = sweep_q(model, z0, q);
    let closure = ((zq.y - z0.y).powi(2) + (zq.x - z0.x - TAU * p as f64).powi(2)).sqrt();
    let tr = m[0][0] + m[1][1];
    PeriodicOrbit {
        p,
        q,
        points,
        mu,
        monodromy: m,
        eigenvalues: eigenvalues_of(&m, log_det),
        log_det_abs: log_det,
        residue: (2.0 - tr) / 4.0,
        closure_defect: closure,
    }
}

const ORBIT_TOL: f64 = 1e-12;
const ORBIT_MAX_ITER: usize = 80;

/// Conservative orbit: Newton in the unknowns (y₀, x₀).
pub fn find_orbit_conservative(
    model: &MapModel,
    p: i64,
    q: u64,
    seed: CylinderState,
) -> Result<PeriodicOrbit, GreeneError> {
    let eps = model.epsilon();
    let mut z = seed;
    for _ in 0..ORBIT_MAX_ITER {
        let (zq, m, _, _) = sweep_q(model, z, q);
        let f = [zq.y - z.y, zq.x - z.x - TAU * p as f64];
        let norm = f[0].hypot(f[1]);
        if norm < ORBIT_TOL {
            return Ok(build_orbit(model, z, p, q, model.mu()));
        }
        if !norm.is_finite() || norm > 1e8 {
            return Err(GreeneError::NewtonDiverged { p, q, eps });
        }
        let jf: Mat2 = [[m[0][0] - 1.0, m[0][1]], [m[1][0], m[1][1] - 1.0]];
        let delta = solve2(&jf, &[-f[0], -f[1]])
            .ok_or(GreeneError::SingularClosureJacobian { p, q })?;
        if !delta[0].is_finite() || !delta[1].is_finite() {
            return Err(GreeneError::NewtonDiverged { p, q, eps });
        }
        z = CylinderState::new(z.y + delta[0], z.x + delta[1]);
    }
    Err(GreeneError::NewtonDiverged { p, q, eps })
}

/// Dissipative orbit at fixed x₀: Newton in the unknowns (y₀, μ).
pub fn find_orbit_dissipative(
    model: &MapModel,
    p: i64,
    q: u64,
    x0: f64,
    seed_y: f64,
    seed_mu: f64,
) -> Result<PeriodicOrbit, GreeneError> {
    let eps = model.epsilon();
    let mut y = seed_y;
    let mut mu = seed_mu;
    for _ in 0..ORBIT_MAX_ITER {
        let m = model.with_mu(mu);
        let z0 = CylinderState::new(y, x0);
        let (zq, mono, d, _) = sweep_q(&m, z0, q);
        let f = [zq.y - y, zq.x - x0 - TAU * p as f64];
        let norm = f[0].hypot(f[1]);
        if norm < ORBIT_TOL {
            return Ok(build_orbit(&m, z0, p, q, mu));
        }
        if !norm.is_finite() || norm > 1e8 {
            return Err(GreeneError::NewtonDiverged { p, q, eps });
        }
        let jf: Mat2 = [[mono[0][0] - 1.0, d[0]], [mono[1][0], d[1]]];
        let delta = solve2(&jf, &[-f[0], -f[1]])
            .ok_or(GreeneError::SingularClosureJacobian { p, q })?;
        if !delta[0].is_finite() || !delta[1].is_finite() {
            return Err(GreeneError::NewtonDiverged { p, q, eps });
        }
        y += delta[0];
        mu += delta[1];
    }
    Err(GreeneError::NewtonDiverged { p, q, eps })
}

/// The drift interval supporting a p/q orbit at fixed (ε, λ), sampled by
/// sweeping x₀ over the circle. Sample points are independent tasks.
#[derive(Debug, Clone)]
pub struct ArnoldTongue {
    pub p: i64,
    pub q: u64,
    pub epsilon: f64,
    pub lambda: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub orbits: Vec<PeriodicOrbit>,
}

impl ArnoldTongue {
    pub fn width(&self) -> f64 {
        self.mu_max - self.mu_min
    }

    /// orbit whose drift is closest to the tongue midpoint
    pub fn center_orbit(&self) -> &PeriodicOrbit {
        let mid = 0.5 * (self.mu_min + self.mu_max);
        self.orbits
            .iter()
            .min_by(|a, b| {
                (a.mu - mid).abs().partial_cmp(&(b.mu - mid).abs()).unwrap()
            })
            .expect("tongue has orbits")
    }
}

pub fn trace_tongue(
    model: &MapModel,
    p: i64,
    q: u64,
    n_samples: usize,
    seed: (f64, f64),
) -> Result<ArnoldTongue, GreeneError> {
    assert!(n_samples >= 2);
    let model_c = model.clone();
    let mut results: Vec<Option<PeriodicOrbit>> =
        par::map_collect((0..n_samples).collect(), move |i| {
            let x0 = TAU * i as f64 / n_samples as f64;
            find_orbit_dissipative(&model_c, p, q, x0, seed.0, seed.1).ok()
        });
    // second pass: retry failed sample points seeded from the nearest
    // converged neighbor (the flat seed can be far off around the circle)
    for offset in 1..n_samples {
        for i in 0..n_samples {
            if results[i].is_some() {
                continue;
            }
            let j = (i + n_samples - offset) % n_samples;
            let Some(neighbor) = results[j].as_ref() else { continue };
            let x0 = TAU * i as f64 / n_samples as f64;
            let seed_y = neighbor
                .points
                .iter()
                .min_by(|a, b| {
                    let da = (a.x - x0).rem_euclid(TAU).min((x0 - a.x).rem_euclid(TAU));
                    let db = (b.x - x0).rem_euclid(TAU).min((x0 - b.x).rem_euclid(TAU));
                    da.partial_cmp(&db).unwrap()
                })
                .map(|z| z.y)
                .unwrap_or(neighbor.points[0].y);
            results[i] = find_orbit_dissipative(model, p, q, x0, seed_y, neighbor.mu).ok();
        }
    }
    let orbits: Vec<PeriodicOrbit> = results.into_iter().flatten().collect();
    if orbits.len() * 2 < n_samples {
        return Err(GreeneError::IncompleteTongue { p, q, got: orbits.len(), want: n_samples });
    }
    let mu_min = orbits.iter().map(|o| o.mu).fold(f64::INFINITY, f64::min);
    let mu_max = orbits.iter().map(|o| o.mu).fold(f64::NEG_INFINITY, f64::max);
    Ok(ArnoldTongue {
        p,
        q,
        epsilon: model.epsilon(),
        lambda: model.conformal_factor(),
        mu_min,
        mu_max,
        orbits,
    })
}

#[derive(Debug, Clone)]
pub struct GreeneConfig {
    /// conservative: |R| level that counts as destabilized
    pub residue_threshold: f64,
    /// dissipative: relative eigenvalue defect that counts as destabilized
    pub defect_threshold: f64,
    /// classification treats diagnostics below this as converged-to-zero
    pub settle_level: f64,
    pub bisection_tol: f64,
    pub sweep_samples: usize,
    /// largest convergent denominator used
    pub q_max: u64,
    /// base ε increment of the orbit-continuation ladders
    pub ladder_step: f64,
    pub ladder_floor: f64,
}

impl Default for GreeneConfig {
    fn default() -> Self {
        Self {
            residue_threshold: 0.2,
            defect_threshold: 0.1,
            settle_level: 5e-4,
            bisection_tol: 1e-3,
            sweep_samples: 8,
            q_max: 233,
            ladder_step: 0.05,
            ladder_floor: 2e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Alive,
    Dead,
}

#[derive(Debug, Clone)]
pub struct GreeneDiagnostic {
    pub epsilon: f64,
    /// (q, |residue|) conservative or (q, eigenvalue defect) dissipative
    pub per_q: Vec<(u64, f64)>,
    pub destabilized: bool,
}

#[derive(Debug, Clone)]
pub struct GreeneEstimate {
    pub epsilon_crit: f64,
    /// last ε classified as existing and first classified as destabilized
    pub bracket: (f64, f64),
    pub diagnostics: Vec<GreeneDiagnostic>,
}

/// Orbit continuation ladders shared across the ε probes of one estimate.
struct ConservativeLadder {
    /// per (p, q): solutions at increasing ε
    cache: HashMap<(i64, u64), Vec<(f64, CylinderState)>>,
    cfg: GreeneConfig,
}

impl ConservativeLadder {
    fn new(cfg: GreeneConfig) -> Self {
        Self { cache: HashMap::new(), cfg }
    }

    fn orbit_at(
        &mut self,
        model: &MapModel,
        p: i64,
        q: u64,
        eps: f64,
    ) -> Result<PeriodicOrbit, GreeneError> {
        let entry = self.cache.entry((p, q)).or_default();
        // nearest cached ε below the target seeds the walk
        let (mut cur_eps, mut seed) = entry
            .iter()
            .rev()
            .find(|(e, _)| *e <= eps + 1e-12)
            .map(|&(e, z)| (e, z))
            .unwrap_or((0.0, CylinderState::new(TAU * p as f64 / q as f64, std::f64::consts::PI)));
        let mut step = self.cfg.ladder_step;
        let mut orbit = None;
        while cur_eps < eps - 1e-12 {
            let target = (cur_eps + step).min(eps);
            let m = model.with_epsilon(target);
            match find_orbit_conservative(&m, p, q, seed) {
                Ok(o) => {
                    seed = o.points[0];
                    cur_eps = target;
                    entry.push((cur_eps, seed));
                    step = (step * 1.5).min(self.cfg.ladder_step);
                    orbit = Some(o);
                }
                Err(e) => {
                    step *= 0.5;
                    if step < self.cfg.ladder_floor {
                        return Err(e);
                    }
                }
            }
        }
        match orbit {
            Some(o) if (cur_eps - eps).abs() < 1e-12 => Ok(o),
            _ => find_orbit_conservative(&model.with_epsilon(eps), p, q, seed),
        }
    }
}

struct DissipativeLadder {
    /// per (p, q): tongue-center seeds (y₀, μ) at increasing ε
    cache: HashMap<(i64, u64), Vec<(f64, (f64, f64))>>,
    cfg: GreeneConfig,
}

impl DissipativeLadder {
    fn new(cfg: GreeneConfig) -> Self {
        Self { cache: HashMap::new(), cfg }
    }

    fn tongue_at(
        &mut self,
        model: &MapModel,
        p: i64,
        q: u64,
        eps: f64,
    ) -> Result<ArnoldTongue, GreeneError> {
        let lambda = model.conformal_factor();
        let rot = TAU * p as f64 / q as f64;
        let entry = self.cache.entry((p, q)).or_default();
        let (mut cur_eps, mut seed) = entry
            .iter()
            .rev()
            .find(|(e, _)| *e <= eps + 1e-12)
            .map(|&(e, s)| (e, s))
            .unwrap_or((0.0, (rot, (1.0 - lambda) * rot)));
        let mut step = self.cfg.ladder_step;
        let mut tongue = None;
        while cur_eps < eps - 1e-12 {
            let target = (cur_eps + step).min(eps);
            let m = model.with_epsilon(target);
            match trace_tongue(&m, p, q, self.cfg.sweep_samples, seed) {
                Ok(t) => {
                    let c = t.center_orbit();
                    seed = (c.points[0].y, c.mu);
                    cur_eps = target;
                    entry.push((cur_eps, seed));
                    step = (step * 1.5).min(self.cfg.ladder_step);
                    tongue = Some(t);
                }
                Err(e) => {
                    step *= 0.5;
                    if step < self.cfg.ladder_floor {
                        return Err(e);
                    }
                }
            }
        }
        match tongue {
            Some(t) if (cur_eps - eps).abs() < 1e-12 => Ok(t),
            _ => trace_tongue(&model.with_epsilon(eps), p, q, self.cfg.sweep_samples, seed),
        }
    }
}

/// Relative defect of the monodromy eigenvalues against the prediction
/// (1, λ^q), the Λ₂ comparison done in log-magnitude space (via the
/// accumulated log determinant and the pairing Λ₁Λ₂ = det) so that λ^q far
/// below double precision still compares cleanly.
pub fn eigenvalue_defect(orbit: &PeriodicOrbit, lambda: f64) -> f64 {
    let l1 = orbit.eigenvalues[0];
    let d1 = (l1 - Complex64::new(1.0, 0.0)).norm();
    let log_l2 = if l1.im == 0.0 {
        orbit.log_det_abs - l1.norm().ln()
    } else {
        0.5 * orbit.log_det_abs
    };
    let d2 = (log_l2 - orbit.q as f64 * lambda.ln()).exp_m1().abs();
    d1.max(d2)
}

fn classify<F>(
    qs: &[RationalApproximant],
    settle: f64,
    threshold: f64,
    mut diag_at: F,
) -> (Verdict, Vec<(u64, f64)>)
where
    F: FnMut(RationalApproximant) -> Option<f64>,
{
    let mut per_q: Vec<(u64, f64)> = Vec::new();
    for &a in qs {
        let Some(d) = diag_at(a) else {
            // an orbit the ladder cannot reach while diagnostics were already
            // growing counts as destabilized; otherwise keep what we have
            let grown = per_q.len() >= 2
                && per_q[per_q.len() - 1].1 > per_q[per_q.len() - 2].1
                && per_q.last().unwrap().1 > threshold;
            return (if grown { Verdict::Dead } else { Verdict::Alive }, per_q);
        };
        per_q.push((a.q, d));
        let n = per_q.len();
        if n >= 2 && d < settle && d < per_q[n - 2].1 {
            // converging to zero: larger denominators only shrink further
            return (Verdict::Alive, per_q);
        }
    }
    // the verdict reads the largest denominators: destabilized when the
    // final three diagnostics grow through the threshold (small-q
    // convergents are noisy at strong dissipation and carry no verdict)
    let n = per_q.len();
    if n >= 3 {
        let tail = &per_q[n - 3..];
        if tail[0].1 < tail[1].1 && tail[1].1 < tail[2].1 && tail[2].1 > threshold {
            return (Verdict::Dead, per_q);
        }
    }
    let last = per_q.last().map(|&(_, d)| d).unwrap_or(0.0);
    if n >= 2 && last > threshold && last > per_q[n - 2].1 {
        (Verdict::Dead, per_q)
    } else {
        (Verdict::Alive, per_q)
    }
}

/// Bracket the breakdown on the ε grid by the stability of the approximating
/// periodic orbits, then bisect to `cfg.bisection_tol`.
pub fn greene_estimate(
    model: &MapModel,
    omega: &DiophantineFrequency,
    eps_grid: &[f64],
    cfg: &GreeneConfig,
) -> Result<GreeneEstimate, GreeneError> {
    assert!(eps_grid.len() >= 2, "need an ε grid to scan");
    let seq = approximants(omega, 24);
    let qs: Vec<RationalApproximant> =
        seq.convergents.into_iter().take_while(|a| a.q <= cfg.q_max).collect();
    assert!(!qs.is_empty(), "no usable approximants below q_max");

    let conservative = model.is_conservative();
    let mut cons_ladder = ConservativeLadder::new(cfg.clone());
    let mut diss_ladder = DissipativeLadder::new(cfg.clone());
    let lambda = model.conformal_factor();
    let threshold = if conservative { cfg.residue_threshold } else { cfg.defect_threshold };

    let mut diagnostics = Vec::new();
    let probe = |eps: f64,
                     cons_ladder: &mut ConservativeLadder,
                     diss_ladder: &mut DissipativeLadder,
                     diagnostics: &mut Vec<GreeneDiagnostic>|
     -> Verdict {
        let (verdict, per_q) = if conservative {
            classify(&qs, cfg.settle_level, threshold, |a| {
                cons_ladder.orbit_at(model, a.p, a.q, eps).ok().map(|o| o.residue.abs())
            })
        } else {
            classify(&qs, cfg.settle_level, threshold, |a| {
                diss_ladder
                    .tongue_at(model, a.p, a.q, eps)
                    .ok()
                    .map(|t| eigenvalue_defect(t.center_orbit(), lambda))
            })
        };
        diagnostics.push(GreeneDiagnostic {
            epsilon: eps,
            per_q,
            destabilized: verdict == Verdict::Dead,
        });
        verdict
    };

    let mut alive_eps = None;
    let mut dead_eps = None;
    for &eps in eps_grid {
        match probe(eps, &mut cons_ladder, &mut diss_ladder, &mut diagnostics) {
            Verdict::Alive => alive_eps = Some(eps),
            Verdict::Dead => {
                dead_eps = Some(eps);
                break;
            }
        }
    }
    let (mut lo, mut hi) = match (alive_eps, dead_eps) {
        (Some(a), Some(d)) if a < d => (a, d),
        _ => return Err(GreeneError::NoBracket),
    };
    while hi - lo > cfg.bisection_tol {
        let mid = 0.5 * (lo + hi);
        match probe(mid, &mut cons_ladder, &mut diss_ladder, &mut diagnostics) {
            Verdict::Alive => lo = mid,
            Verdict::Dead => hi = mid,
        }
    }
    Ok(GreeneEstimate { epsilon_crit: 0.5 * (lo + hi), bracket: (lo, hi), diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Potential;
    use crate::rng::SplitMix64;

    fn golden() -> DiophantineFrequency {
        DiophantineFrequency::golden()
    }

    #[test]
    fn golden_mean_gives_fibonacci_ratios() {
        let seq = approximants(&golden(), 6);
        assert!(!seq.rational);
        let want = [(1, 2), (2, 3), (3, 5), (5, 8), (8, 13), (13, 21)];
        let got: Vec<(i64, u64)> = seq.convergents.iter().map(|a| (a.p, a.q)).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn rational_rotation_terminates() {
        let third = DiophantineFrequency::from_rotation(1.0 / 3.0);
        let seq = approximants(&third, 6);
        assert!(seq.rational);
        assert_eq!(seq.convergents.len(), 1);
        assert_eq!((seq.convergents[0].p, seq.convergents[0].q), (1, 3));
    }

    #[test]
    fn convergents_satisfy_classical_bound() {
        let mut rng = SplitMix64::new(77);
        for _ in 0..10 {
            let rho = rng.next_range(0.05, 0.95);
            let omega = DiophantineFrequency::from_rotation(rho);
            let seq = approximants(&omega, 8);
            for a in &seq.convergents {
                let err = (rho - a.p as f64 / a.q as f64).abs();
                assert!(err < 1.0 / (a.q * a.q) as f64, "|ρ − p/q| < 1/q² fails for {}/{}", a.p, a.q);
            }
        }
    }

    #[test]
    fn fixed_point_residue_from_hand_jacobian() {
        let model = MapModel::conservative_standard(0.4, Potential::SingleHarmonic);
        let orbit = find_orbit_conservative(
            &model,
            0,
            1,
            CylinderState::new(0.05, std::f64::consts::PI - 0.2),
        )
        .unwrap();
        assert!(orbit.closure_defect < 1e-10);
        assert!((orbit.points[0].x - std::f64::consts::PI).abs() < 1e-10);
        assert!(orbit.points[0].y.abs() < 1e-12);
        // J = [[1, ε cos π], [1, 1 + ε cos π]] ⇒ tr = 2 − ε, R = ε/4
        assert!((orbit.residue - 0.1).abs() < 1e-12, "R = {}", orbit.residue);
    }

    #[test]
    fn integrable_orbits_are_parabolic() {
        // at ε = 0 every point with y = 2πp/q lies on a p/q orbit; the
        // monodromy of the shear has trace 2, residue 0
        let model = MapModel::conservative_standard(0.0, Potential::SingleHarmonic);
        let z0 = CylinderState::new(TAU * 3.0 / 5.0, 1.234);
        let (zq, m, _, _) = sweep_q(&model, z0, 5);
        assert!((zq.x - z0.x - TAU * 3.0).abs() < 1e-12);
        assert!((zq.y - z0.y).abs() < 1e-15);
        let residue = (2.0 - m[0][0] - m[1][1]) / 4.0;
        assert!(residue.abs() < 1e-15);
    }

    #[test]
    fn parabolic_closure_jacobian_is_rejected() {
        // at ε = 0 the orbits are parabolic and non-isolated: off the
        // resonant action the closure Jacobian of the shear is singular and
        // Newton must refuse rather than wander
        let model = MapModel::conservative_standard(0.0, Potential::SingleHarmonic);
        let seed = CylinderState::new(TAU * 3.0 / 5.0 + 0.01, 1.0);
        assert!(matches!(
            find_orbit_conservative(&model, 3, 5, seed),
            Err(GreeneError::SingularClosureJacobian { .. })
        ));
    }

    #[test]
    fn dissipative_drift_identity_at_zero_epsilon() {
        let model = MapModel::dissipative_standard(0.9, 0.0, 0.0, Potential::SingleHarmonic);
        let orbit =
            find_orbit_dissipative(&model, 1, 2, 0.0, std::f64::consts::PI, 0.3).unwrap();
        assert!((orbit.mu - 0.1 * std::f64::consts::PI).abs() < 1e-12, "μ = {}", orbit.mu);
        assert!((orbit.points[0].y - std::f64::consts::PI).abs() < 1e-12);
        // det(monodromy) = λ^q
        let det = det2(&orbit.monodromy);
        assert!((det - 0.81).abs() < 1e-12);
    }

    #[test]
    fn monodromy_determinant_matches_lambda_power() {
        let model = MapModel::dissipative_standard(0.9, 0.0, 0.3, Potential::SingleHarmonic);
        for &(p, q) in &[(1i64, 2u64), (2, 3), (3, 5), (5, 8)] {
            let rot = TAU * p as f64 / q as f64;
            let orbit =
                find_orbit_dissipative(&model, p, q, 0.0, rot, 0.1 * rot).unwrap();
            assert!(orbit.closure_defect < 1e-10);
            let expect = q as f64 * 0.9_f64.ln();
            assert!((orbit.log_det_abs - expect).abs() < 1e-8, "q={q}: log det gap");
            // the raw 2×2 determinant agrees at these moderate q as well
            assert!((det2(&orbit.monodromy) - 0.9_f64.powi(q as i32)).abs() < 1e-10);
        }
    }

    #[test]
    fn tongue_degenerates_at_zero_epsilon() {
        let model = MapModel::dissipative_standard(0.9, 0.0, 0.0, Potential::SingleHarmonic);
        let rot = TAU / 2.0;
        let tongue = trace_tongue(&model, 1, 2, 8, (rot, 0.1 * rot)).unwrap();
        assert!(tongue.width() < 1e-12, "zero-width tongue, got {}", tongue.width());
        assert!((tongue.mu_min - 0.1 * rot).abs() < 1e-12);
    }

    #[test]
    fn tongue_widths_grow_with_epsilon() {
        let base = MapModel::dissipative_standard(0.9, 0.0, 0.1, Potential::SingleHarmonic);
        for &(p, q) in &[(1i64, 3u64), (1, 2), (2, 3)] {
            let rot = TAU * p as f64 / q as f64;
            let seed = (rot, 0.1 * rot);
            let narrow = trace_tongue(&base, p, q, 8, seed).unwrap();
            let wide =
                trace_tongue(&base.with_epsilon(0.25), p, q, 8, seed).unwrap();
            assert!(narrow.width() > 0.0, "{p}/{q} width {}", narrow.width());
            assert!(
                wide.width() > narrow.width(),
                "{p}/{q}: width must grow with ε ({} vs {})",
                wide.width(),
                narrow.width()
            );
        }
    }

    #[test]
    fn golden_drift_outside_convergent_tongues() {
        use crate::newton::{solve, Seed, SolverConfig};
        let model = MapModel::dissipative_standard(0.9, 0.0, 0.0, Potential::SingleHarmonic);
        let cfg = SolverConfig::default();
        let mut torus = None;
        for &e in &[0.07, 0.14, 0.2] {
            let m = model.with_epsilon(e);
            let seed = torus.take().map(Seed::Warm).unwrap_or(Seed::Cold);
            torus = Some(solve(&m, &golden(), &cfg, seed).unwrap().torus);
        }
        let mu_kam = torus.unwrap().mu();
        let at_eps = model.with_epsilon(0.2);
        for &(p, q) in &[(1i64, 2u64), (2, 3), (3, 5)] {
            let rot = TAU * p as f64 / q as f64;
            let tongue = trace_tongue(&at_eps, p, q, 8, (rot, 0.1 * rot)).unwrap();
            assert!(
                mu_kam < tongue.mu_min || mu_kam > tongue.mu_max,
                "golden drift {mu_kam} inside the {p}/{q} tongue [{}, {}]",
                tongue.mu_min,
                tongue.mu_max
            );
        }
    }

    #[test]
    fn center_eigenvalues_approach_prediction_inside_existence() {
        let model = MapModel::dissipative_standard(0.9, 0.0, 0.1, Potential::SingleHarmonic);
        let mut ladder = DissipativeLadder::new(GreeneConfig::default());
        let mut defects = Vec::new();
        for &(p, q) in &[(1i64, 2u64), (2, 3), (3, 5), (5, 8), (8, 13)] {
            let tongue = ladder.tongue_at(&model, p, q, 0.1).unwrap();
            defects.push(eigenvalue_defect(tongue.center_orbit(), 0.9));
        }
        assert!(defects.last().unwrap() < &0.05, "defects {defects:?}");
        assert!(defects.last().unwrap() < &defects[0], "defects should shrink in q");
    }

    #[test]
    fn conservative_residues_decay_geometrically_inside_existence() {
        let model = MapModel::conservative_standard(0.8, Potential::SingleHarmonic);
        let mut ladder = ConservativeLadder::new(GreeneConfig::default());
        let mut residues = Vec::new();
        for &(p, q) in &[(1i64, 2u64), (2, 3), (3, 5), (5, 8), (8, 13), (13, 21)] {
            let orbit = ladder.orbit_at(&model, p, q, 0.8).unwrap();
            residues.push(orbit.residue.abs());
        }
        for w in residues.windows(2) {
            assert!(w[1] < w[0], "|R| must decay along convergents: {residues:?}");
        }
        assert!(residues.last().unwrap() < &0.05);
    }

    #[test]
    fn deep_inside_existence_nothing_is_flagged() {
        let model = MapModel::conservative_standard(0.0, Potential::SingleHarmonic);
        let cfg = GreeneConfig { q_max: 55, ..GreeneConfig::default() };
        let seq = approximants(&golden(), 10);
        let qs: Vec<RationalApproximant> =
            seq.convergents.into_iter().take_while(|a| a.q <= cfg.q_max).collect();
        let mut ladder = ConservativeLadder::new(cfg.clone());
        let (verdict, per_q) = classify(&qs, cfg.settle_level, cfg.residue_threshold, |a| {
            ladder.orbit_at(&model, a.p, a.q, 0.1).ok().map(|o| o.residue.abs())
        });
        assert_eq!(verdict, Verdict::Alive, "diagnostics {per_q:?}");
        for w in per_q.windows(2) {
            assert!(w[1].1 < w[0].1, "residues decreasing: {per_q:?}");
        }
    }
}
