//! Simple-wave and simple-mode solutions of first-order quasilinear systems
//! expressed through Riemann invariants.
//!
//! The crate is organised bottom-up:
//!
//! * [`algebra`]: small dense complex matrices, tolerance-based rank and kernels.
//! * [`specfun`]: complex `erf`, `erfi` and a Newton inverse of `erf`.
//! * [`systems`]: expression language and the quasilinear system model.
//! * [`dispersion`]: wave relations, dispersion roots, rotation-matrix factorizations.
//! * [`solutions`]: closed-form solution families and the simple-wave integrator.
//! * [`verify`]: grid residual verification of candidate solutions.
//! * [`dieshop`]: streamline tracing and extrusion-die rendering.

pub mod algebra;
pub mod dieshop;
pub mod dispersion;
mod error;
pub mod solutions;
pub mod specfun;
pub mod systems;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Default relative tolerance shared by rank tests, kernels and root checks.
pub const DEFAULT_TOL: f64 = 1e-10;
