//! Numerical laboratory for finite-time blow-up of the forced nonlinear heat
//! equation
//!
//! ```text
//! u_t = Δu + |x|^α |u|^p + a(t) w(x),   (t, x) ∈ (0, ∞) × ℝᴺ
//! ```
//!
//! The crate is split by concern:
//!
//! - [`forcing`]: forcing amplitudes `a(t)`, their Cesàro means and the
//!   divergence exponent set `J` with its infimum `q₀`.
//! - [`exponents`]: closed-form critical exponents and the blow-up criterion
//!   combining them with the forcing classification.
//! - [`cutoffs`]: smooth cutoff functions with certified derivative bounds.
//! - [`solver`]: a radially symmetric method-of-lines solver with blow-up
//!   detection.
//! - [`verification`]: test-function functionals evaluated on solver traces,
//!   and numerical certificates for each inequality of the nonexistence
//!   argument.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cutoffs;
pub mod exponents;
pub mod forcing;
pub mod quad;
pub mod solver;
pub mod verification;

pub use exponents::ExtReal;
