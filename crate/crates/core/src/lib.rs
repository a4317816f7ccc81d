//! Analytical toolkit for the quantum correlation set of the CHSH scenario.
//!
//! Behaviors are 8-vectors of marginals and correlators. Pure two-qubit
//! realizations are parametrized by `(theta, a0, a1, b0, b1)`; the crate
//! certifies extremality and self-testing, reconstructs realizations from
//! statistics and builds explicit flat directions for non-exposed points.
//! Brute-force oracles in [`oracles`] cross-check the analytic machinery.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod behavior;
pub mod error;
pub mod extremality;
pub mod oracles;
pub mod realization;
pub mod scan;
pub mod selftest;
pub mod steering;
pub mod witness;

pub use behavior::{BellFunctional, Behavior, SymmetryElement, Violation};
pub use error::{Error, Result};
pub use extremality::{Classification, SignPattern, Verdict};
pub use realization::{CanonTarget, Constraint, QubitRealization};
pub use steering::SteeredCorrelators;

/// Slack for equalities and positivity tests.
pub const TOL_EQ: f64 = 1e-8;
/// Excursion beyond `[-1, 1]` that is silently clamped before `asin`/`acos`.
pub const TOL_CLAMP: f64 = 1e-9;
/// Per-parameter tolerance of the reconstruction roundtrip.
pub const TOL_RECON: f64 = 1e-6;

/// Steered correlators closer than this to `±1` are snapped onto `±1`.
///
/// `asin` and `acos` have a square-root singularity at the endpoints, so a
/// few ulps of rounding in `c` become ~1e-8 in the angle.
pub const SNAP_UNIT: f64 = 1e-14;
