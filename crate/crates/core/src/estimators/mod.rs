//! Estimators over finite dictionaries and linear classes, and the checker
//! for the deterministic offset inequality they are analysed with.

mod aggregation;
mod mirror;
mod offset;

pub use aggregation::{
    confidence_log, empirical_distance, erm, midpoint, midpoint_epsilon, star, MidpointSolution,
    StarSolution, DEFAULT_C1, TERNARY_MAX_ITER, TERNARY_TOL,
};
pub use mirror::{linear_predictions, mirror_descent, MirrorDescentTrace, MirrorMap, DIVERGENCE_FACTOR};
pub use offset::{check_offset, OffsetReport};

/// Modulus for which the star algorithm satisfies the offset inequality
/// under the squared loss.
pub const STAR_SQUARED_GAMMA: f64 = 1.0 / 18.0;
