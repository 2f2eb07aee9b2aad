//! Spectral computation of quasi-periodic invariant tori of symplectic maps
//! and invariant attractors of conformally symplectic maps.
//!
//! The crate solves the invariance equation f_μ∘K(θ) = K(θ+ω) for an
//! embedding K of the circle and (in the dissipative case) a drift μ, by a
//! quasi-Newton iteration whose linearized equation reduces — through the
//! adapted frame [DK | J⁻¹DK·N] — to two scalar cohomological equations that
//! are diagonal in Fourier space. On top of the solver sit: parameter
//! continuation with Sobolev-norm blow-up breakdown estimation, a
//! periodic-orbit (Greene-style) breakdown criterion with Arnold tongues,
//! invariant-bundle analysis of the attractor (stable bundle, tangency angle,
//! Lyapunov multipliers), and direct-iteration utilities (rotation numbers,
//! basins of attraction).

pub mod bundles;
pub mod continuation;
pub mod dynamics;
pub mod fourier;
pub mod greene;
pub mod io;
pub mod models;
pub mod newton;
pub mod par;
pub mod rng;

pub use fourier::{DiophantineFrequency, PeriodicGridFunction};
pub use models::{CylinderState, MapModel};
pub use newton::{SolverConfig, TorusEmbedding};
