//! Map families on the cylinder ℝ×𝕋: conservative and dissipative standard
//! maps, the dissipative non-twist variant, stroboscopic spin-orbit maps, and
//! a four-dimensional two-factor counterexample that is not conformally
//! symplectic for any scalar factor.
//!
//! Conventions fixed once here and inherited everywhere: state ordering is
//! (y, x), the symplectic structure matrix is J = [[0, 1], [−1, 0]] (block
//! form [[0, I], [−I, 0]] in higher dimension), angles live on [0, 2π) and
//! are iterated on lifts.

mod counterexample;
mod standard;
mod spinorbit;

pub use counterexample::TwoFactorMap4d;
pub use standard::{NonTwistMapParams, Potential, StandardMapParams};
pub use spinorbit::{
    averaged_torque_coefficients, kd_from_physical, kepler_state, KeplerPoint, SpinOrbitMap,
    SpinOrbitParams,
};

use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("family has no drift parameter")]
    NoDriftParameter,
    #[error("dissipation per Euler sub-step λh = {0} must stay below 1")]
    StepTooLarge(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Point on the cylinder; `x` is kept as a lift (not wrapped) so that
/// rotation numbers and orbit closures can be measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderState {
    pub y: f64,
    pub x: f64,
}

impl CylinderState {
    pub fn new(y: f64, x: f64) -> Self {
        Self { y, x }
    }

    /// Angle representative in [0, 2π).
    pub fn x_wrapped(&self) -> f64 {
        wrap_angle(self.x)
    }
}

pub fn wrap_angle(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    if w == TAU {
        0.0
    } else {
        w
    }
}

pub type Mat2 = [[f64; 2]; 2];

pub fn det2(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

pub fn mat2_vec(a: &Mat2, v: &[f64; 2]) -> [f64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

/// Solve a 2×2 linear system; `None` when the determinant is (near) zero.
pub fn solve2(a: &Mat2, rhs: &[f64; 2]) -> Option<[f64; 2]> {
    let d = det2(a);
    if d.abs() < f64::MIN_POSITIVE * 1e4 {
        return None;
    }
    Some([
        (rhs[0] * a[1][1] - rhs[1] * a[0][1]) / d,
        (rhs[1] * a[0][0] - rhs[0] * a[1][0]) / d,
    ])
}

/// One of the built-in two-dimensional families.
#[derive(Debug, Clone)]
pub enum MapModel {
    Standard(StandardMapParams),
    NonTwist(NonTwistMapParams),
    SpinOrbit(SpinOrbitMap),
}

impl MapModel {
    pub fn standard(params: StandardMapParams) -> Self {
        Self::Standard(params)
    }

    pub fn conservative_standard(epsilon: f64, potential: Potential) -> Self {
        Self::Standard(StandardMapParams::conservative(epsilon, potential))
    }

    pub fn dissipative_standard(lambda: f64, mu: f64, epsilon: f64, potential: Potential) -> Self {
        Self::Standard(StandardMapParams::dissipative(lambda, mu, epsilon, potential))
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Self::Standard(p) if p.is_conservative() => "conservative_standard",
            Self::Standard(_) => "dissipative_standard",
            Self::NonTwist(_) => "nontwist_standard",
            Self::SpinOrbit(m) if m.params().k_d == 0.0 => "spin_orbit_conservative",
            Self::SpinOrbit(_) => "spin_orbit_dissipative",
        }
    }

    pub fn apply(&self, s: CylinderState) -> CylinderState {
        match self {
            Self::Standard(p) => p.apply(s),
            Self::NonTwist(p) => p.apply(s),
            Self::SpinOrbit(m) => m.apply(s),
        }
    }

    /// Exact state Jacobian ∂(y′, x′)/∂(y, x).
    pub fn jacobian(&self, s: CylinderState) -> Mat2 {
        match self {
            Self::Standard(p) => p.jacobian(s),
            Self::NonTwist(p) => p.jacobian(s),
            Self::SpinOrbit(m) => m.jacobian(s),
        }
    }

    /// ∂(y′, x′)/∂μ for families with a drift parameter.
    pub fn drift_derivative(&self, s: CylinderState) -> Result<[f64; 2], ModelError> {
        match self {
            Self::Standard(p) => p.drift_derivative(),
            Self::NonTwist(p) => p.drift_derivative(),
            Self::SpinOrbit(m) => m.drift_derivative(s),
        }
    }

    /// The constant factor λ with Df^T J Df = λJ (for 2-D maps this equals
    /// det Df, which is state-independent for every built-in family).
    pub fn conformal_factor(&self) -> f64 {
        match self {
            Self::Standard(p) => p.lambda,
            Self::NonTwist(p) => p.lambda,
            Self::SpinOrbit(m) => m.conformal_factor(),
        }
    }

    pub fn is_conservative(&self) -> bool {
        match self {
            Self::Standard(p) => p.is_conservative(),
            Self::NonTwist(_) => false,
            Self::SpinOrbit(m) => m.params().k_d == 0.0,
        }
    }

    pub fn epsilon(&self) -> f64 {
        match self {
            Self::Standard(p) => p.epsilon,
            Self::NonTwist(p) => p.epsilon,
            Self::SpinOrbit(m) => m.params().epsilon,
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        match self {
            Self::Standard(p) => Self::Standard(StandardMapParams { epsilon, ..p.clone() }),
            Self::NonTwist(p) => Self::NonTwist(NonTwistMapParams { epsilon, ..p.clone() }),
            Self::SpinOrbit(m) => Self::SpinOrbit(m.with_epsilon(epsilon)),
        }
    }

    pub fn mu(&self) -> f64 {
        match self {
            Self::Standard(p) => p.mu,
            Self::NonTwist(p) => p.mu,
            Self::SpinOrbit(m) => m.mu(),
        }
    }

    /// Substitute the drift. Conservative families have none (λ = 1 forces
    /// μ = 0) and come back unchanged.
    pub fn with_mu(&self, mu: f64) -> Self {
        match self {
            Self::Standard(p) if p.is_conservative() => self.clone(),
            Self::Standard(p) => Self::Standard(StandardMapParams { mu, ..p.clone() }),
            Self::NonTwist(p) => Self::NonTwist(NonTwistMapParams { mu, ..p.clone() }),
            Self::SpinOrbit(m) if m.params().k_d == 0.0 => self.clone(),
            Self::SpinOrbit(m) => Self::SpinOrbit(m.with_mu(mu)),
        }
    }

    /// Action of the exactly invariant circle of the unperturbed (ε = 0)
    /// family at rotation ω radians per iterate.
    pub fn unperturbed_action(&self, omega: f64) -> f64 {
        match self {
            Self::Standard(_) => omega,
            Self::NonTwist(_) => 0.0,
            Self::SpinOrbit(_) => omega / TAU,
        }
    }

    /// Drift value making the unperturbed circle at rotation ω invariant.
    pub fn unperturbed_mu(&self, omega: f64) -> f64 {
        match self {
            Self::Standard(p) => (1.0 - p.lambda) * omega,
            Self::NonTwist(p) => omega - p.a * p.a,
            Self::SpinOrbit(m) => {
                if m.params().k_d == 0.0 {
                    0.0
                } else {
                    omega / TAU
                }
            }
        }
    }

    /// Iterate on lifts.
    pub fn iterate(&self, mut s: CylinderState, n: usize) -> CylinderState {
        for _ in 0..n {
            s = self.apply(s);
        }
        s
    }
}

/// Anything whose Jacobian can be tested against Df^T J Df = λJ.
pub trait ConformalMap {
    /// Phase-space dimension (2 or 4 here).
    fn dim(&self) -> usize;
    /// Row-major dim×dim Jacobian at `z`, ordering (y_1…y_n, x_1…x_n).
    fn jacobian_at(&self, z: &[f64]) -> Vec<f64>;
    /// The declared conformal factor, if the family has one.
    fn declared_factor(&self) -> Option<f64>;
}

impl ConformalMap for MapModel {
    fn dim(&self) -> usize {
        2
    }

    fn jacobian_at(&self, z: &[f64]) -> Vec<f64> {
        let j = self.jacobian(CylinderState::new(z[0], z[1]));
        vec![j[0][0], j[0][1], j[1][0], j[1][1]]
    }

    fn declared_factor(&self) -> Option<f64> {
        Some(self.conformal_factor())
    }
}

/// Structure matrix J = [[0, I], [−I, 0]] for dimension `dim = 2n`, row-major.
fn structure_matrix(dim: usize) -> Vec<f64> {
    let n = dim / 2;
    let mut j = vec![0.0; dim * dim];
    for i in 0..n {
        j[i * dim + (n + i)] = 1.0;
        j[(n + i) * dim + i] = -1.0;
    }
    j
}

/// Max-entry norm of Df^T J Df − λJ at one state.
pub fn conformality_defect(map: &dyn ConformalMap, z: &[f64], lambda: f64) -> f64 {
    let dim = map.dim();
    let df = map.jacobian_at(z);
    let j = structure_matrix(dim);
    let mut jdf = vec![0.0; dim * dim];
    for r in 0..dim {
        for c in 0..dim {
            let mut acc = 0.0;
            for m in 0..dim {
                acc += j[r * dim + m] * df[m * dim + c];
            }
            jdf[r * dim + c] = acc;
        }
    }
    let mut defect = 0.0_f64;
    for r in 0..dim {
        for c in 0..dim {
            let mut acc = 0.0;
            for m in 0..dim {
                acc += df[m * dim + r] * jdf[m * dim + c];
            }
            defect = defect.max((acc - lambda * j[r * dim + c]).abs());
        }
    }
    defect
}

#[derive(Debug, Clone)]
pub struct ConformalityReport {
    pub lambda: f64,
    pub max_defect: f64,
    pub pass: bool,
}

/// Verify Df^T J Df = λJ over a sample of states with the declared λ.
pub fn verify_conformality(
    map: &dyn ConformalMap,
    states: &[Vec<f64>],
    tol: f64,
) -> ConformalityReport {
    let lambda = map.declared_factor().unwrap_or(1.0);
    let max_defect = states
        .iter()
        .map(|z| conformality_defect(map, z, lambda))
        .fold(0.0_f64, f64::max);
    ConformalityReport { lambda, max_defect, pass: max_defect <= tol }
}

/// Max defect over states for each candidate scalar factor; used to show the
/// two-factor 4-D map fails for every λ.
pub fn scan_scalar_factors(
    map: &dyn ConformalMap,
    states: &[Vec<f64>],
    lambdas: &[f64],
) -> Vec<(f64, f64)> {
    lambdas
        .iter()
        .map(|&l| {
            let d = states
                .iter()
                .map(|z| conformality_defect(map, z, l))
                .fold(0.0_f64, f64::max);
            (l, d)
        })
        .collect()
}
