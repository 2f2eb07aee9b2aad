//! Periodic functions on the circle in dual sample/Fourier representation.
//!
//! Everything downstream (the invariance solver, bundle analysis, breakdown
//! monitoring) is built on real 2π-periodic scalar functions known on an
//! equispaced grid of `n` points (`n` a power of two) together with their
//! spectrum `f(θ) = Σ_k f̂_k e^{ikθ}`, `k = −n/2+1 … n/2`. Transforms cost
//! O(n log n); differentiation, rotation by a fixed angle and the two
//! cohomological solvers are diagonal in Fourier space.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::{Arc, Mutex, OnceLock};
use thiserror::Error;

/// Default solvability tolerance on |mean| of a small-divisor right-hand side.
pub const SOLVABILITY_TOL: f64 = 1e-10;
/// Contraction solves are refused when the factor sits this close to the unit circle.
pub const UNIT_CIRCLE_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum FourierError {
    #[error("grid size {0} is not a power of two (or is < 4)")]
    NonPowerOfTwo(usize),
    #[error("right-hand side has non-zero average {mean:.3e}; project it out before the small-divisor solve")]
    NonZeroAverage { mean: f64 },
    #[error("contraction factor {lambda} is within {UNIT_CIRCLE_TOL:.0e} of the unit circle; use the small-divisor path")]
    LambdaOnUnitCircle { lambda: f64 },
    #[error("coefficients at line {line} break Hermitian symmetry by {defect:.3e}")]
    NotHermitian { line: usize, defect: f64 },
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut cache = cache.lock().unwrap();
    cache
        .entry((n, forward))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if forward {
                planner.plan_fft_forward(n)
            } else {
                planner.plan_fft_inverse(n)
            }
        })
        .clone()
}

/// A real 2π-periodic function sampled on `n` equispaced points of [0, 2π),
/// with its Fourier coefficients synchronized lazily on first use.
///
/// Values are immutable after construction; every operation returns a new
/// function, so instances can be shared freely across worker threads.
#[derive(Debug)]
pub struct PeriodicGridFunction {
    n: usize,
    samples: OnceLock<Vec<f64>>,
    coeffs: OnceLock<Vec<Complex64>>,
}

impl Clone for PeriodicGridFunction {
    fn clone(&self) -> Self {
        let f = Self::empty(self.n);
        if let Some(s) = self.samples.get() {
            let _ = f.samples.set(s.clone());
        }
        if let Some(c) = self.coeffs.get() {
            let _ = f.coeffs.set(c.clone());
        }
        f
    }
}

fn check_size(n: usize) -> Result<(), FourierError> {
    if n < 4 || !n.is_power_of_two() {
        return Err(FourierError::NonPowerOfTwo(n));
    }
    Ok(())
}

impl PeriodicGridFunction {
    fn empty(n: usize) -> Self {
        Self { n, samples: OnceLock::new(), coeffs: OnceLock::new() }
    }

    /// Build from sample values on θ_j = 2πj/n. The length must be a power of two.
    pub fn from_samples(samples: Vec<f64>) -> Result<Self, FourierError> {
        check_size(samples.len())?;
        let f = Self::empty(samples.len());
        let _ = f.samples.set(samples);
        Ok(f)
    }

    /// Build from a full spectrum in FFT bin order (bin j holds k = j for
    /// j ≤ n/2, k = j − n otherwise). Callers are responsible for Hermitian data.
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Result<Self, FourierError> {
        check_size(coeffs.len())?;
        let f = Self::empty(coeffs.len());
        let _ = f.coeffs.set(coeffs);
        Ok(f)
    }

    /// Sample `g` on the n-point grid.
    pub fn from_fn(n: usize, g: impl Fn(f64) -> f64) -> Result<Self, FourierError> {
        check_size(n)?;
        Self::from_samples((0..n).map(|j| g(TAU * j as f64 / n as f64)).collect())
    }

    /// The constant function.
    pub fn constant(n: usize, c: f64) -> Result<Self, FourierError> {
        Self::from_samples(vec![c; n])
    }

    pub fn zero(n: usize) -> Result<Self, FourierError> {
        Self::constant(n, 0.0)
    }

    pub fn n_modes(&self) -> usize {
        self.n
    }

    /// Grid nodes θ_j = 2πj/n.
    pub fn theta(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |j| TAU * j as f64 / self.n as f64)
    }

    /// Sample values, materialized by an inverse transform if needed.
    pub fn samples(&self) -> &[f64] {
        self.samples.get_or_init(|| {
            let coeffs = self.coeffs.get().expect("either representation populated");
            let mut buf = coeffs.clone();
            plan(self.n, false).process(&mut buf);
            buf.into_iter().map(|z| z.re).collect()
        })
    }

    /// Fourier coefficients in FFT bin order, materialized by a forward transform if needed.
    pub fn coeffs(&self) -> &[Complex64] {
        self.coeffs.get_or_init(|| {
            let samples = self.samples.get().expect("either representation populated");
            let mut buf: Vec<Complex64> =
                samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            plan(self.n, true).process(&mut buf);
            let scale = 1.0 / self.n as f64;
            buf.iter_mut().for_each(|z| *z *= scale);
            buf
        })
    }

    /// Coefficient f̂_k for |k| ≤ n/2 (k = ±n/2 both address the Nyquist bin).
    pub fn coeff(&self, k: i64) -> Complex64 {
        let n = self.n as i64;
        debug_assert!(k.abs() <= n / 2);
        let bin = k.rem_euclid(n) as usize;
        self.coeffs()[bin]
    }

    /// Signed mode index of bin j.
    pub fn bin_to_k(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j <= n / 2 {
            j
        } else {
            j - n
        }
    }

    pub fn mean(&self) -> f64 {
        if let Some(c) = self.coeffs.get() {
            c[0].re
        } else {
            self.samples().iter().sum::<f64>() / self.n as f64
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples().iter().fold(0.0, |m, &x| m.max(x.abs()))
    }

    /// Sobolev H^m norm ( Σ_k |f̂_k|² (1+k²)^m )^{1/2}.
    pub fn sobolev_norm(&self, m: f64) -> f64 {
        self.coeffs()
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let k = self.bin_to_k(j) as f64;
                c.norm_sqr() * (1.0 + k * k).powf(m)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Largest coefficient magnitude among the modes with |k| > fraction·n/2.
    /// For a geometrically decaying spectrum this tracks the size of what the
    /// truncation leaves out, and unlike a tail sum it does not accumulate
    /// transform roundoff across thousands of noise-level modes.
    pub fn max_tail_coefficient(&self, fraction: f64) -> f64 {
        let cut = fraction * self.n as f64 / 2.0;
        self.coeffs()
            .iter()
            .enumerate()
            .filter(|(j, _)| self.bin_to_k(*j).abs() as f64 > cut)
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max)
    }

    /// Median coefficient magnitude among the modes with |k| > fraction·n/2.
    /// A genuine truncation tail is broadband, so its octave median sits at
    /// the decay envelope; roundoff amplified by near-resonant small divisors
    /// spikes only a handful of isolated modes and leaves the median at the
    /// noise floor.
    pub fn median_tail_coefficient(&self, fraction: f64) -> f64 {
        let cut = fraction * self.n as f64 / 2.0;
        let mut tail: Vec<f64> = self
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(j, _)| self.bin_to_k(*j).abs() as f64 > cut)
            .map(|(_, c)| c.norm())
            .collect();
        if tail.is_empty() {
            return 0.0;
        }
        let mid = tail.len() / 2;
        *tail
            .select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap())
            .1
    }

    /// Relative ℓ² coefficient mass carried by modes with |k| > fraction·n/2.
    pub fn tail_mass(&self, fraction: f64) -> f64 {
        let cut = fraction * self.n as f64 / 2.0;
        let mut tail = 0.0;
        let mut total = 0.0;
        for (j, c) in self.coeffs().iter().enumerate() {
            let k = self.bin_to_k(j).abs() as f64;
            let w = c.norm_sqr();
            total += w;
            if k > cut {
                tail += w;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }

    /// Termwise derivative: f̂_k ↦ ik f̂_k, Nyquist mode dropped.
    pub fn derivative(&self) -> Self {
        let n = self.n;
        let out: Vec<Complex64> = self
            .coeffs()
            .iter()
            .enumerate()
            .map(|(j, c)| {
                if j == n / 2 {
                    Complex64::new(0.0, 0.0)
                } else {
                    let k = self.bin_to_k(j) as f64;
                    Complex64::new(0.0, k) * c
                }
            })
            .collect();
        Self::from_coeffs(out).expect("size preserved")
    }

    /// Exact rotation f(θ) ↦ f(θ + ω): f̂_k ↦ e^{ikω} f̂_k, Nyquist mode dropped.
    pub fn shift(&self, omega: f64) -> Self {
        let n = self.n;
        let out: Vec<Complex64> = self
            .coeffs()
            .iter()
            .enumerate()
            .map(|(j, c)| {
                if j == n / 2 {
                    Complex64::new(0.0, 0.0)
                } else {
                    let k = self.bin_to_k(j) as f64;
                    Complex64::from_polar(1.0, k * omega) * c
                }
            })
            .collect();
        Self::from_coeffs(out).expect("size preserved")
    }

    /// Evaluate at an arbitrary angle by summing the series.
    pub fn eval(&self, theta: f64) -> f64 {
        let n = self.n;
        let c = self.coeffs();
        let mut acc = c[0].re;
        for k in 1..n / 2 {
            acc += 2.0 * (c[k] * Complex64::from_polar(1.0, k as f64 * theta)).re;
        }
        acc += c[n / 2].re * (0.5 * n as f64 * theta).cos();
        acc
    }

    /// Spectral resampling to a finer or coarser power-of-two grid.
    pub fn resample(&self, n_new: usize) -> Result<Self, FourierError> {
        check_size(n_new)?;
        let n = self.n;
        if n_new == n {
            return Ok(self.clone());
        }
        let c = self.coeffs();
        let mut out = vec![Complex64::new(0.0, 0.0); n_new];
        let keep = (n.min(n_new)) / 2;
        out[0] = c[0];
        for k in 1..keep {
            out[k] = c[k];
            out[n_new - k] = c[n - k];
        }
        // Nyquist energy of the coarse grid is dropped rather than split.
        Ok(Self::from_coeffs(out).expect("size checked"))
    }

    pub fn add(&self, rhs: &Self) -> Self {
        self.zip(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.zip(rhs, |a, b| a - b)
    }

    /// Pointwise product on the grid (spectrally this convolves; tails are
    /// monitored by the callers that care).
    pub fn mul(&self, rhs: &Self) -> Self {
        self.zip(rhs, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|x| c * x)
    }

    pub fn add_scalar(&self, c: f64) -> Self {
        self.map(|x| x + c)
    }

    /// Subtract the mean.
    pub fn zero_mean(&self) -> Self {
        let m = self.mean();
        self.map(|x| x - m)
    }

    pub fn map(&self, g: impl Fn(f64) -> f64) -> Self {
        let out: Vec<f64> = self.samples().iter().map(|&x| g(x)).collect();
        Self::from_samples(out).expect("size preserved")
    }

    pub fn zip(&self, rhs: &Self, g: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.n, rhs.n, "grid sizes must agree");
        let out: Vec<f64> =
            self.samples().iter().zip(rhs.samples()).map(|(&a, &b)| g(a, b)).collect();
        Self::from_samples(out).expect("size preserved")
    }
}

/// Solve the small-divisor equation W(θ) − W(θ+ω) = q(θ) with Ŵ_0 = 0.
///
/// The right-hand side must have (numerically) zero average: the free average
/// of W is the torus-translation gauge and is pinned to zero here. Divisors
/// are 1 − e^{ikω}, nonzero for irrational ω/2π.
pub fn solve_small_divisor(
    q: &PeriodicGridFunction,
    omega: f64,
) -> Result<PeriodicGridFunction, FourierError> {
    let mean = q.mean();
    if mean.abs() > SOLVABILITY_TOL * (1.0 + q.sup_norm()) {
        return Err(FourierError::NonZeroAverage { mean });
    }
    let n = q.n_modes();
    let out: Vec<Complex64> = q
        .coeffs()
        .iter()
        .enumerate()
        .map(|(j, c)| {
            if j == 0 || j == n / 2 {
                Complex64::new(0.0, 0.0)
            } else {
                let k = if j <= n / 2 { j as i64 } else { j as i64 - n as i64 };
                let div = Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, k as f64 * omega);
                c / div
            }
        })
        .collect();
    PeriodicGridFunction::from_coeffs(out)
}

/// Solve the contraction equation λU(θ) − U(θ+ω) = q(θ) for |λ| ≠ 1.
///
/// Every mode divides by λ − e^{ikω}, including k = 0; no average condition
/// is needed.
pub fn solve_contraction(
    q: &PeriodicGridFunction,
    omega: f64,
    lambda: f64,
) -> Result<PeriodicGridFunction, FourierError> {
    if (lambda.abs() - 1.0).abs() < UNIT_CIRCLE_TOL {
        return Err(FourierError::LambdaOnUnitCircle { lambda });
    }
    let n = q.n_modes();
    let out: Vec<Complex64> = q
        .coeffs()
        .iter()
        .enumerate()
        .map(|(j, c)| {
            if j == n / 2 {
                Complex64::new(0.0, 0.0)
            } else {
                let k = if j <= n / 2 { j as i64 } else { j as i64 - n as i64 };
                let div =
                    Complex64::new(lambda, 0.0) - Complex64::from_polar(1.0, k as f64 * omega);
                c / div
            }
        })
        .collect();
    PeriodicGridFunction::from_coeffs(out)
}

/// A fixed irrational rotation ω (radians per iterate) with Diophantine
/// diagnostics: the profile records min_{0<|k|≤K} |1 − e^{ikω}|·|k|^τ, the
/// measured counterpart of the Diophantine constant. Used for reporting and
/// for conditioning checks of the small-divisor solves; never as a hypothesis.
#[derive(Debug, Clone)]
pub struct DiophantineFrequency {
    omega: f64,
    tau: f64,
}

impl DiophantineFrequency {
    /// ω = 2π(√5−1)/2, the golden-mean rotation. The default preset.
    pub fn golden() -> Self {
        Self { omega: TAU * (5.0_f64.sqrt() - 1.0) / 2.0, tau: 1.0 }
    }

    /// A noble rotation number near `rho0`: the continued fraction of `rho0`
    /// is truncated once the denominator passes `q_min` and continued with 1s,
    /// giving golden-tail small divisors arbitrarily close to `rho0`.
    pub fn noble_near(rho0: f64, q_min: u64) -> Self {
        let mut x = rho0.fract();
        let int_part = rho0 - x;
        let mut quotients = Vec::new();
        let (mut q_prev, mut q) = (0u64, 1u64);
        for _ in 0..40 {
            if x < 1e-14 || q > q_min {
                break;
            }
            x = 1.0 / x;
            let a = x.floor();
            quotients.push(a as u64);
            let q_next = a as u64 * q + q_prev;
            q_prev = q;
            q = q_next;
            x -= a;
        }
        // evaluate [0; a_1, a_2, …, a_m, 1, 1, 1, …] from the golden tail inward
        let mut value = (5.0_f64.sqrt() - 1.0) / 2.0;
        for &a in quotients.iter().rev() {
            value = 1.0 / (a as f64 + value);
        }
        Self { omega: TAU * (int_part + value), tau: 1.0 }
    }

    pub fn from_rotation(rho: f64) -> Self {
        Self { omega: TAU * rho, tau: 1.0 }
    }

    pub fn from_omega(omega: f64) -> Self {
        Self { omega, tau: 1.0 }
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Rotation number ω/2π.
    pub fn rotation(&self) -> f64 {
        self.omega / TAU
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// min_{0<|k|≤K} |1 − e^{ikω}| · |k|^τ reported at each K in `cuts`.
    pub fn min_divisor_profile(&self, cuts: &[usize]) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(cuts.len());
        let mut best = f64::INFINITY;
        let mut k = 1usize;
        for &cut in cuts {
            while k <= cut {
                let div = (Complex64::new(1.0, 0.0)
                    - Complex64::from_polar(1.0, k as f64 * self.omega))
                .norm();
                best = best.min(div * (k as f64).powf(self.tau));
                k += 1;
            }
            out.push((cut, best));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn golden() -> f64 {
        DiophantineFrequency::golden().omega()
    }

    #[test]
    fn cosine_has_two_half_coefficients() {
        let f = PeriodicGridFunction::from_fn(16, |t| t.cos()).unwrap();
        assert!((f.coeff(1) - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        assert!((f.coeff(-1) - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        for k in [0i64, 2, 3, 4, 5, 6, 7] {
            if k != 1 {
                assert!(f.coeff(k).norm() < 1e-14, "stray mode {k}");
            }
        }
    }

    #[test]
    fn constant_spectrum_round_trip() {
        let mut c = vec![Complex64::new(0.0, 0.0); 16];
        c[0] = Complex64::new(2.0, 0.0);
        let f = PeriodicGridFunction::from_coeffs(c).unwrap();
        for &s in f.samples() {
            assert!((s - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn random_round_trip_all_sizes() {
        let mut rng = SplitMix64::new(0xfeed);
        for log_n in 4..=12 {
            let n = 1usize << log_n;
            let data: Vec<f64> = (0..n).map(|_| rng.next_symmetric(1.0)).collect();
            let f = PeriodicGridFunction::from_samples(data.clone()).unwrap();
            let back = PeriodicGridFunction::from_coeffs(f.coeffs().to_vec()).unwrap();
            let scale = f.sup_norm().max(1.0);
            for (a, b) in data.iter().zip(back.samples()) {
                assert!((a - b).abs() < 1e-12 * scale, "round trip at n={n}");
            }
        }
    }

    #[test]
    fn non_power_of_two_rejected() {
        assert!(PeriodicGridFunction::from_samples(vec![0.0; 12]).is_err());
        assert!(PeriodicGridFunction::from_samples(vec![0.0; 2]).is_err());
    }

    #[test]
    fn derivative_of_sine() {
        let f = PeriodicGridFunction::from_fn(32, |t| t.sin()).unwrap();
        let df = f.derivative();
        for (t, (&d, _)) in f.theta().zip(df.samples().iter().zip(0..)) {
            assert!((d - t.cos()).abs() < 1e-12);
        }
        let c = PeriodicGridFunction::constant(32, 3.7).unwrap();
        assert!(c.derivative().sup_norm() < 1e-14);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let f = PeriodicGridFunction::from_fn(64, |t| (3.0 * t).sin()).unwrap();
        let df = f.derivative();
        let h = 1e-6;
        for j in 0..16 {
            let t = TAU * j as f64 / 16.0;
            let fd = (f.eval(t + h) - f.eval(t - h)) / (2.0 * h);
            assert!((df.eval(t) - fd).abs() < 1e-5);
            assert!((df.eval(t) - 3.0 * (3.0 * t).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_identities() {
        let f = PeriodicGridFunction::from_fn(32, |t| t.cos()).unwrap();
        let same = f.shift(0.0);
        for (a, b) in f.samples().iter().zip(same.samples()) {
            assert!((a - b).abs() < 1e-14);
        }
        let quarter = f.shift(std::f64::consts::FRAC_PI_2);
        for (t, &v) in f.theta().zip(quarter.samples()) {
            assert!((v + t.sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn shift_composes_and_inverts() {
        let mut rng = SplitMix64::new(7);
        // band-limited: modes up to 10 on a 64 grid
        let mut c = vec![Complex64::new(0.0, 0.0); 64];
        c[0] = Complex64::new(rng.next_symmetric(1.0), 0.0);
        for k in 1..=10usize {
            let z = Complex64::new(rng.next_symmetric(1.0), rng.next_symmetric(1.0));
            c[k] = z;
            c[64 - k] = z.conj();
        }
        let f = PeriodicGridFunction::from_coeffs(c).unwrap();
        let w = golden();
        let back = f.shift(w).shift(-w);
        for (a, b) in f.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() < 1e-12);
        }
        let ab = f.shift(0.3).shift(0.9);
        let once = f.shift(1.2);
        for (a, b) in ab.samples().iter().zip(once.samples()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sobolev_norms_from_definition() {
        let f = PeriodicGridFunction::from_fn(32, |t| t.sin()).unwrap();
        // two modes of |c|² = 1/4, weight (1+1)² = 4 each → √2
        assert!((f.sobolev_norm(2.0) - 2.0_f64.sqrt()).abs() < 1e-12);
        let c = PeriodicGridFunction::constant(32, -2.5).unwrap();
        assert!((c.sobolev_norm(7.0) - 2.5).abs() < 1e-12);
        // sin θ + sin 2θ at m = 1 against direct summation
        let g = PeriodicGridFunction::from_fn(32, |t| t.sin() + (2.0 * t).sin()).unwrap();
        let direct = (0.25 * 2.0_f64 * 2.0 + 0.25 * 5.0 * 2.0_f64).sqrt();
        assert!((g.sobolev_norm(1.0) - direct).abs() < 1e-12);
        // H⁰ equals the ℓ² coefficient norm
        let mut rng = SplitMix64::new(41);
        let h = PeriodicGridFunction::from_samples(
            (0..64).map(|_| rng.next_symmetric(2.0)).collect(),
        )
        .unwrap();
        let l2: f64 = h.coeffs().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((h.sobolev_norm(0.0) - l2).abs() < 1e-12);
    }

    #[test]
    fn small_divisor_zero_rhs() {
        let q = PeriodicGridFunction::zero(32).unwrap();
        let w = solve_small_divisor(&q, golden()).unwrap();
        assert!(w.sup_norm() < 1e-15);
    }

    #[test]
    fn small_divisor_residual_pointwise() {
        let w = golden();
        let q = PeriodicGridFunction::from_fn(64, |t| t.cos()).unwrap();
        let sol = solve_small_divisor(&q, w).unwrap();
        let expect = q.coeff(1) / (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, w));
        assert!((sol.coeff(1) - expect).norm() < 1e-14);
        let res = sol.sub(&sol.shift(w)).sub(&q);
        assert!(res.sup_norm() < 1e-12);
    }

    #[test]
    fn small_divisor_residual_on_refined_grid() {
        let w = golden();
        let q = PeriodicGridFunction::from_fn(64, |t| (5.0 * t).sin()).unwrap();
        let sol = solve_small_divisor(&q, w).unwrap();
        // residual sampled on a 10× finer set of nodes via series evaluation
        for j in 0..640 {
            let t = TAU * j as f64 / 640.0;
            let r = sol.eval(t) - sol.eval(t + w) - q.eval(t);
            assert!(r.abs() < 1e-10, "residual {r:.3e} at node {j}");
        }
    }

    #[test]
    fn small_divisor_rejects_nonzero_average() {
        let q = PeriodicGridFunction::constant(32, 1e-3).unwrap();
        match solve_small_divisor(&q, golden()) {
            Err(FourierError::NonZeroAverage { .. }) => {}
            other => panic!("expected NonZeroAverage, got {other:?}"),
        }
    }

    #[test]
    fn contraction_constant_mode_algebra() {
        let q = PeriodicGridFunction::constant(16, 1.0).unwrap();
        let u = solve_contraction(&q, golden(), 0.5).unwrap();
        for &s in u.samples() {
            assert!((s + 2.0).abs() < 1e-14);
        }
        let z = PeriodicGridFunction::zero(16).unwrap();
        assert!(solve_contraction(&z, golden(), 0.5).unwrap().sup_norm() < 1e-15);
    }

    #[test]
    fn contraction_residual_pointwise() {
        let w = golden();
        let q = PeriodicGridFunction::from_fn(64, |t| t.cos()).unwrap();
        let u = solve_contraction(&q, w, 0.9).unwrap();
        let res = u.scale(0.9).sub(&u.shift(w)).sub(&q);
        assert!(res.sup_norm() < 1e-12);
    }

    #[test]
    fn contraction_residuals_on_random_band_limited_rhs() {
        let w = golden();
        let mut rng = SplitMix64::new(99);
        for trial in 0..20 {
            let mut c = vec![Complex64::new(0.0, 0.0); 128];
            c[0] = Complex64::new(rng.next_symmetric(1.0), 0.0);
            for k in 1..=20usize {
                let z = Complex64::new(rng.next_symmetric(1.0), rng.next_symmetric(1.0));
                c[k] = z;
                c[128 - k] = z.conj();
            }
            let q = PeriodicGridFunction::from_coeffs(c).unwrap();
            let u = solve_contraction(&q, w, 0.9).unwrap();
            let fine_u = u.resample(512).unwrap();
            let fine_q = q.resample(512).unwrap();
            let res = fine_u.scale(0.9).sub(&fine_u.shift(w)).sub(&fine_q);
            assert!(
                res.sup_norm() < 1e-10 * (1.0 + q.sup_norm()),
                "trial {trial}: residual {}",
                res.sup_norm()
            );
        }
    }

    #[test]
    fn contraction_guard_fires_before_overflow() {
        let w = golden();
        // nonzero mean: the k = 0 divisor λ − 1 drives the blow-up as λ → 1
        let q = PeriodicGridFunction::from_fn(64, |t| 1.0 + t.cos() + (2.0 * t).sin()).unwrap();
        let mut prev = 0.0;
        for &lam in &[0.99, 0.999, 0.9999] {
            let u = solve_contraction(&q, w, lam).unwrap();
            let norm = u.sobolev_norm(0.0);
            assert!(norm.is_finite());
            assert!(norm > 5.0 * prev, "‖U‖ must track the (λ−1)⁻¹ divisor");
            prev = norm;
        }
        assert!(matches!(
            solve_contraction(&q, w, 1.0 - 1e-9),
            Err(FourierError::LambdaOnUnitCircle { .. })
        ));
    }

    #[test]
    fn tail_mass_band_limited_and_geometric() {
        let f = PeriodicGridFunction::from_fn(64, |t| (3.0 * t).cos()).unwrap();
        assert!(f.tail_mass(0.5) < 1e-28, "band-limited tail is FFT noise only");
        // f̂_k = 2^{−|k|} up to |k| = 31 on a 64 grid, against direct summation
        let mut c = vec![Complex64::new(0.0, 0.0); 64];
        c[0] = Complex64::new(1.0, 0.0);
        for k in 1..32usize {
            let v = Complex64::new(0.5_f64.powi(k as i32), 0.0);
            c[k] = v;
            c[64 - k] = v;
        }
        let g = PeriodicGridFunction::from_coeffs(c).unwrap();
        let mut tail = 0.0;
        let mut total = 1.0;
        for k in 1..32usize {
            let w = 2.0 * 0.25_f64.powi(k as i32);
            total += w;
            if k > 16 {
                tail += w;
            }
        }
        assert!((g.tail_mass(0.5) - tail / total).abs() < 1e-15);
    }

    #[test]
    fn tail_mass_white_noise_statistics() {
        let mut rng = SplitMix64::new(2024);
        let n = 256;
        let trials = 40;
        let mut acc = 0.0;
        for _ in 0..trials {
            let f = PeriodicGridFunction::from_samples(
                (0..n).map(|_| rng.next_symmetric(1.0)).collect(),
            )
            .unwrap();
            acc += f.tail_mass(0.5);
        }
        let mean = acc / trials as f64;
        // white noise spreads mass uniformly; half the modes sit above the cut.
        // 3σ band with σ ≈ 0.5/√(n·trials/2)
        let sigma = 0.5 / ((n * trials / 2) as f64).sqrt();
        assert!(
            (mean - 0.5).abs() < 3.0 * sigma + 0.01,
            "tail mass {mean} off the fraction 0.5"
        );
    }

    #[test]
    fn divisor_profile_positive() {
        let w = DiophantineFrequency::golden();
        let profile = w.min_divisor_profile(&[8, 64, 512]);
        for (cut, v) in profile {
            assert!(v > 0.0, "profile at K={cut} must stay positive");
        }
    }

    #[test]
    fn noble_near_tracks_target() {
        let target = 1.0136;
        let nu = DiophantineFrequency::noble_near(target, 1000);
        assert!((nu.rotation() - target).abs() < 1e-5);
        let profile = nu.min_divisor_profile(&[1024]);
        assert!(profile[0].1 > 1e-4, "noble tail keeps divisors away from zero");
    }

    #[test]
    fn hermitian_symmetry_preserved_by_ops() {
        let mut rng = SplitMix64::new(5);
        let f = PeriodicGridFunction::from_samples(
            (0..64).map(|_| rng.next_symmetric(1.0)).collect(),
        )
        .unwrap();
        for g in [f.derivative(), f.shift(1.1), f.mul(&f), f.scale(-2.0)] {
            for k in 1..32i64 {
                let defect = (g.coeff(-k) - g.coeff(k).conj()).norm();
                assert!(defect < 1e-12, "mode {k} defect {defect:.3e}");
            }
        }
    }

    #[test]
    fn resample_preserves_band_limited_values() {
        let f = PeriodicGridFunction::from_fn(32, |t| (3.0 * t).sin() - 0.5 * t.cos()).unwrap();
        let up = f.resample(128).unwrap();
        for j in 0..32 {
            let t = TAU * j as f64 / 32.0;
            assert!((up.eval(t) - f.samples()[j]).abs() < 1e-12);
        }
        let down = up.resample(32).unwrap();
        for (a, b) in f.samples().iter().zip(down.samples()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
