//! Offset-condition toolkit for bounded regression over finite-support laws.
//!
//! * [`model`]: distributions, samples, dictionaries, predictors and losses.
//! * [`risk`]: exact population/empirical risk, `g*`, excess risk, Bernstein check.
//! * [`estimators`]: ERM, star algorithm, midpoint estimator, mirror descent,
//!   and the deterministic offset-inequality checker.
//! * [`complexity`]: offset Rademacher complexity, local Rademacher fixed
//!   point, and the exact sparse linear supremum via hat matrices.
//! * [`concentration`]: the shifted multiplier process, its
//!   self-localization, and Monte-Carlo checks of its MGF and tail bounds.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod complexity;
pub mod concentration;
pub mod error;
pub mod estimators;
pub mod model;
pub mod risk;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
