//! Standard-map families: y′ = λy + μ + εV(x), x′ = x + y′, with the
//! conservative case λ = 1, μ = 0, and the non-twist variant
//! x′ = x + (y′ − a)² + μ.

use super::{CylinderState, Mat2};

/// Perturbing potential V(x).
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    /// V(x) = sin x (the classical choice).
    SingleHarmonic,
    /// V(x) = ε₁ sin x + ε₂ sin 2x.
    TwoHarmonic { eps1: f64, eps2: f64 },
}

impl Potential {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Self::SingleHarmonic => x.sin(),
            Self::TwoHarmonic { eps1, eps2 } => eps1 * x.sin() + eps2 * (2.0 * x).sin(),
        }
    }

    pub fn slope(&self, x: f64) -> f64 {
        match self {
            Self::SingleHarmonic => x.cos(),
            Self::TwoHarmonic { eps1, eps2 } => eps1 * x.cos() + 2.0 * eps2 * (2.0 * x).cos(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::SingleHarmonic => "single_harmonic",
            Self::TwoHarmonic { .. } => "two_harmonic",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StandardMapParams {
    /// Conformal factor in (0, 1]; 1 is the conservative map.
    pub lambda: f64,
    /// Drift; must be 0 in the conservative case.
    pub mu: f64,
    pub epsilon: f64,
    pub potential: Potential,
}

impl StandardMapParams {
    pub fn conservative(epsilon: f64, potential: Potential) -> Self {
        Self { lambda: 1.0, mu: 0.0, epsilon, potential }
    }

    pub fn dissipative(lambda: f64, mu: f64, epsilon: f64, potential: Potential) -> Self {
        assert!(lambda > 0.0 && lambda < 1.0, "dissipative map needs λ ∈ (0, 1)");
        Self { lambda, mu, epsilon, potential }
    }

    pub fn is_conservative(&self) -> bool {
        self.lambda == 1.0
    }

    pub fn apply(&self, s: CylinderState) -> CylinderState {
        let y = self.lambda * s.y + self.mu + self.epsilon * self.potential.value(s.x);
        CylinderState::new(y, s.x + y)
    }

    pub fn jacobian(&self, s: CylinderState) -> Mat2 {
        let vx = self.epsilon * self.potential.slope(s.x);
        [[self.lambda, vx], [self.lambda, 1.0 + vx]]
    }

    pub fn drift_derivative(&self) -> Result<[f64; 2], super::ModelError> {
        if self.is_conservative() {
            Err(super::ModelError::NoDriftParameter)
        } else {
            Ok([1.0, 1.0])
        }
    }
}

#[derive(Debug, Clone)]
pub struct NonTwistMapParams {
    pub lambda: f64,
    pub mu: f64,
    pub epsilon: f64,
    /// Shape parameter; the twist ∂x′/∂y vanishes along y′ = a.
    pub a: f64,
    pub potential: Potential,
}

impl NonTwistMapParams {
    pub fn apply(&self, s: CylinderState) -> CylinderState {
        let y = self.lambda * s.y + self.epsilon * self.potential.value(s.x);
        let d = y - self.a;
        CylinderState::new(y, s.x + d * d + self.mu)
    }

    pub fn jacobian(&self, s: CylinderState) -> Mat2 {
        let vx = self.epsilon * self.potential.slope(s.x);
        let y = self.lambda * s.y + self.epsilon * self.potential.value(s.x);
        let twist = 2.0 * (y - self.a);
        [[self.lambda, vx], [twist * self.lambda, 1.0 + twist * vx]]
    }

    pub fn drift_derivative(&self) -> Result<[f64; 2], super::ModelError> {
        Ok([0.0, 1.0])
    }
}
