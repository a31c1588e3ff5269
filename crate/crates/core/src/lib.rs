//! Numerical laboratory for the parabolic double-phase equation
//!
//! ```text
//! ∂t u − div(|Du|^{p−2}Du + a(z)|Du|^{q−2}Du) = f(z, Du)
//! ```
//!
//! The crate is organised bottom-up:
//!
//! * [`params`] exponent sets and their admissibility relations,
//! * [`coefficient`] the modulating coefficient `a(x,t)` and structural checkers,
//! * [`flux`] pointwise operators (flux, regularized flux, `F`, `g`, growth bound),
//! * [`solver`] backward-Euler solver on 1D space-time grids,
//! * [`transforms`] Steklov averages, spatial mollification and inf-convolution,
//! * [`regularity`] doubling functionals, time-Hölder barriers, modulus fits,
//! * [`verify`] inequality checkers producing [`verify::CheckReport`]s.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficient;
pub mod error;
pub mod field;
pub mod flux;
pub mod params;
pub mod regularity;
pub mod solver;
pub mod stats;
pub mod transforms;
pub mod verify;

pub use coefficient::Coefficient;
pub use error::{Error, Result};
pub use field::GridField;
pub use params::{ExponentParams, MultiPhaseParams};
