//! Four-dimensional two-factor map: two standard-map factors with distinct
//! contraction rates λ₁ ≠ λ₂. Its Jacobian satisfies Df^T J Df = diag-mixed
//! factors and therefore equals λJ for no scalar λ — the canonical example of
//! a dissipative map that is not conformally symplectic.

use super::ConformalMap;

#[derive(Debug, Clone)]
pub struct TwoFactorMap4d {
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub epsilon: f64,
}

impl TwoFactorMap4d {
    pub fn new(lambda1: f64, lambda2: f64, mu1: f64, mu2: f64, epsilon: f64) -> Self {
        Self { lambda1, lambda2, mu1, mu2, epsilon }
    }

    /// State ordering (y₁, y₂, x₁, x₂).
    pub fn apply(&self, z: &[f64; 4]) -> [f64; 4] {
        let y1 = self.lambda1 * z[0] + self.mu1 + self.epsilon * z[2].sin();
        let y2 = self.lambda2 * z[1] + self.mu2 + self.epsilon * z[3].sin();
        [y1, y2, z[2] + y1, z[3] + y2]
    }
}

impl ConformalMap for TwoFactorMap4d {
    fn dim(&self) -> usize {
        4
    }

    fn jacobian_at(&self, z: &[f64]) -> Vec<f64> {
        let v1 = self.epsilon * z[2].cos();
        let v2 = self.epsilon * z[3].cos();
        let (l1, l2) = (self.lambda1, self.lambda2);
        #[rustfmt::skip]
        let j = vec![
            l1,  0.0, v1,        0.0,
            0.0, l2,  0.0,       v2,
            l1,  0.0, 1.0 + v1,  0.0,
            0.0, l2,  0.0,       1.0 + v2,
        ];
        j
    }

    fn declared_factor(&self) -> Option<f64> {
        if self.lambda1 == self.lambda2 {
            Some(self.lambda1)
        } else {
            None
        }
    }
}
