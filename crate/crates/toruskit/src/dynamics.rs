//! Direct-iteration utilities: rotation numbers with weighted Birkhoff
//! averaging, attractor location and basin classification on grids of
//! initial conditions, and rotation-number-versus-parameter scans for the
//! non-twist family.

use crate::models::{CylinderState, MapModel, NonTwistMapParams, Potential};
use crate::par;
use crate::rng::SplitMix64;
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("orbit escaped: |y| exceeded {0}")]
    Unbounded(f64),
}

/// Default escape radius, far above every attractor scale of the built-ins.
pub const ESCAPE_RADIUS: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrbitClass {
    Periodic { p: i64, q: u64 },
    QuasiPeriodic,
    Unresolved,
}

#[derive(Debug, Clone)]
pub struct OrbitSample {
    pub initial: CylinderState,
    pub transient: usize,
    pub kept: usize,
    pub lift_displacement: f64,
    /// weighted-average rotation (radians per iterate)
    pub rotation_number: f64,
    /// plain average (x_N − x_0)/N, co-reported for fidelity
    pub rotation_plain: f64,
    pub classification: OrbitClass,
}

/// Rotation number of the forward orbit of `s0`, radians per iterate.
///
/// The plain average of lift increments converges like 1/N; the weighted
/// Birkhoff average with bump weights w(t) = exp(−1/(t(1−t))) converges
/// super-polynomially on quasi-periodic orbits and is the headline value.
pub fn rotation_number(
    model: &MapModel,
    s0: CylinderState,
    transient: usize,
    kept: usize,
) -> Result<OrbitSample, DynamicsError> {
    let mut z = s0;
    for _ in 0..transient {
        z = model.apply(z);
        if z.y.abs() > ESCAPE_RADIUS {
            return Err(DynamicsError::Unbounded(ESCAPE_RADIUS));
        }
    }
    let start = z;
    let mut weighted = 0.0;
    let mut weight_sum = 0.0;
    let mut states: Vec<CylinderState> = Vec::new();
    let keep_states = kept <= 4096;
    for j in 0..kept {
        if keep_states {
            states.push(z);
        }
        let next = model.apply(z);
        if next.y.abs() > ESCAPE_RADIUS {
            return Err(DynamicsError::Unbounded(ESCAPE_RADIUS));
        }
        let t = (j as f64 + 0.5) / kept as f64;
        let w = (-1.0 / (t * (1.0 - t))).exp();
        weighted += w * (next.x - z.x);
        weight_sum += w;
        z = next;
    }
    let lift_displacement = z.x - start.x;
    let rotation_number = weighted / weight_sum;
    let rotation_plain = lift_displacement / kept as f64;
    let classification = classify_orbit(&states, rotation_number);
    Ok(OrbitSample {
        initial: s0,
        transient,
        kept,
        lift_displacement,
        rotation_number,
        rotation_plain,
        classification,
    })
}

/// Periodicity detection on the recorded post-transient states: the orbit is
/// p/q-periodic when it returns within 1e−8 after q steps (mod 2π lifts).
fn classify_orbit(states: &[CylinderState], rotation: f64) -> OrbitClass {
    const CLOSE: f64 = 1e-8;
    if states.len() < 130 {
        return OrbitClass::Unresolved;
    }
    let z0 = states[0];
    for q in 1..=(states.len() - 1).min(64) {
        let zq = states[q];
        let turns = (zq.x - z0.x) / TAU;
        let p = turns.round();
        if (zq.y - z0.y).abs() < CLOSE && (zq.x - z0.x - TAU * p).abs() < CLOSE {
            // confirm it persists one more period
            if states.len() > 2 * q {
                let z2 = states[2 * q];
                if (z2.y - z0.y).abs() < 10.0 * CLOSE
                    && (z2.x - z0.x - 2.0 * TAU * p).abs() < 10.0 * CLOSE
                {
                    return OrbitClass::Periodic { p: p as i64, q: q as u64 };
                }
            } else {
                return OrbitClass::Periodic { p: p as i64, q: q as u64 };
            }
        }
    }
    if rotation.is_finite() {
        OrbitClass::QuasiPeriodic
    } else {
        OrbitClass::Unresolved
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BasinWindow {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

#[derive(Debug, Clone, Copy)]
pub enum SamplingMode {
    /// cell centers on a uniform grid (reproducible default)
    Deterministic,
    /// one random point per cell, mirroring random-initial-condition surveys
    Random { seed: u64 },
}

#[derive(Debug, Clone)]
pub struct BasinMap {
    pub nx: usize,
    pub ny: usize,
    pub window: BasinWindow,
    /// rotation number per cell, row-major from y_min upward; NaN = escaped
    pub rotation: Vec<f64>,
    /// attractor rotation values after clustering
    pub buckets: Vec<f64>,
    /// bucket index per cell, −1 for unresolved/escaped
    pub assignment: Vec<i32>,
}

/// Rotation number of every grid cell after a transient, cells bucketed by
/// nearest attractor rotation. Cells are independent tasks; the reduction
/// order is fixed by the grid, so the result is deterministic.
pub fn classify_basins(
    model: &MapModel,
    window: BasinWindow,
    nx: usize,
    ny: usize,
    transient: usize,
    kept: usize,
    mode: SamplingMode,
) -> BasinMap {
    let cells: Vec<(usize, usize)> =
        (0..ny).flat_map(|r| (0..nx).map(move |c| (r, c))).collect();
    let model_c = model.clone();
    let rotation: Vec<f64> = par::map_collect(cells, move |(row, col)| {
        let (fx, fy) = match mode {
            SamplingMode::Deterministic => ((col as f64 + 0.5), (row as f64 + 0.5)),
            SamplingMode::Random { seed } => {
                let mut rng = SplitMix64::new(
                    seed ^ (row as u64).wrapping_mul(0x9e3779b97f4a7c15) ^ col as u64,
                );
                (col as f64 + rng.next_f64(), row as f64 + rng.next_f64())
            }
        };
        let x = window.x_min + (window.x_max - window.x_min) * fx / nx as f64;
        let y = window.y_min + (window.y_max - window.y_min) * fy / ny as f64;
        match rotation_number(&model_c, CylinderState::new(y, x), transient, kept) {
            Ok(sample) => sample.rotation_number,
            Err(_) => f64::NAN,
        }
    });

    // cluster the finite rotation values into attractor buckets
    const GAP: f64 = 1e-3;
    let mut sorted: Vec<f64> = rotation.iter().copied().filter(|v| v.is_finite()).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut buckets: Vec<f64> = Vec::new();
    let mut cluster_start = 0;
    for i in 1..=sorted.len() {
        if i == sorted.len() || sorted[i] - sorted[i - 1] > GAP {
            if i > cluster_start {
                let slice = &sorted[cluster_start..i];
                buckets.push(slice.iter().sum::<f64>() / slice.len() as f64);
            }
            cluster_start = i;
        }
    }
    let assignment: Vec<i32> = rotation
        .iter()
        .map(|&v| {
            if !v.is_finite() {
                return -1;
            }
            let mut best = -1;
            let mut gap = f64::INFINITY;
            for (i, &b) in buckets.iter().enumerate() {
                let d = (v - b).abs();
                if d < gap {
                    gap = d;
                    best = i as i32;
                }
            }
            if gap <= 5.0 * GAP {
                best
            } else {
                -1
            }
        })
        .collect();
    BasinMap { nx, ny, window, rotation, buckets, assignment }
}

/// ρ(a) for the non-twist family with every parameter but `a` frozen,
/// plus the located monotonicity violations (the non-twist signature).
pub fn rotation_vs_parameter(
    lambda: f64,
    mu: f64,
    epsilon: f64,
    potential: Potential,
    a_values: &[f64],
    s0: CylinderState,
    transient: usize,
    kept: usize,
) -> Vec<(f64, f64)> {
    let a_vec: Vec<f64> = a_values.to_vec();
    par::map_collect(a_vec, move |a| {
        let model = MapModel::NonTwist(NonTwistMapParams {
            lambda,
            mu,
            epsilon,
            a,
            potential: potential.clone(),
        });
        let rho = rotation_number(&model, s0, transient, kept)
            .map(|s| s.rotation_number)
            .unwrap_or(f64::NAN);
        (a, rho)
    })
}

/// Indices i where ρ decreases from a_i to a_{i+1} beyond `tol` while a increases.
pub fn monotonicity_violations(curve: &[(f64, f64)], tol: f64) -> Vec<usize> {
    curve
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1].0 > w[0].0 && w[1].1 < w[0].1 - tol)
        .map(|(i, _)| i)
        .collect()
}
