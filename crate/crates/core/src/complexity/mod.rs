//! Complexity measures of finite classes and of sparse linear classes.
//!
//! Suprema over star hulls `{lambda h : lambda in [0, 1]}` are always taken
//! in closed form: the objective is linear plus quadratic in `lambda`, so
//! the optimum is a clamped vertex (see [`star_hull_sup`]).

mod local;
mod offset;
mod sparse;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use local::{local_complexity_fixed_point, LocalCurve, DEFAULT_R_TOL};
pub use offset::{
    empirical_offset_complexity, empirical_offset_draws, offset_complexity_draws, offset_complexity_mc,
    star_hull_sup, SigmaMode, StarHullSup, EXACT_SIGMA_MAX_N,
};
pub use sparse::{
    hat_matrix, sparse_offset_bound_check, sparse_offset_exact, subset_count, SparseBoundReport,
    SparseClassSpec, SparseOracle, DEFAULT_SUBSET_CAP, PINV_RCOND,
};

/// A finite class of atom-indexed functions `h` (typically `f - g*`),
/// optionally closed under scaling by `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteClassSpec {
    base: Vec<Vec<f64>>,
    star_hull: bool,
}

impl FiniteClassSpec {
    pub fn new(base: Vec<Vec<f64>>, star_hull: bool) -> Result<Self> {
        let Some(first) = base.first() else {
            return Err(Error::InvalidParameter("class has no functions".into()));
        };
        let s = first.len();
        if s == 0 {
            return Err(Error::InvalidParameter("class functions have no values".into()));
        }
        for h in &base {
            if h.len() != s {
                return Err(Error::DimensionMismatch { expected: s, got: h.len() });
            }
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("class values must be finite".into()));
            }
        }
        Ok(Self { base, star_hull })
    }

    /// `star({f - g : f in rows})`.
    pub fn centered_star(rows: &[Vec<f64>], g: &[f64]) -> Result<Self> {
        Self::new(rows.iter().map(|f| crate::risk::diff(f, g)).collect(), true)
    }

    pub fn base(&self) -> &[Vec<f64>] {
        &self.base
    }

    pub fn star_hull(&self) -> bool {
        self.star_hull
    }

    pub fn support_size(&self) -> usize {
        self.base[0].len()
    }

    /// The same class with every function multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            base: self.base.iter().map(|h| h.iter().map(|v| v * factor).collect()).collect(),
            star_hull: self.star_hull,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexityKind {
    Offset,
    LocalFixedPoint,
    EmpiricalOffset,
    SparseExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityEstimate {
    pub value: f64,
    pub std_error: f64,
    pub replicates: usize,
    pub gamma: f64,
    pub kind: ComplexityKind,
}

impl ComplexityEstimate {
    /// `sqrt(se_1^2 + se_2^2)`.
    pub fn combined_se(&self, other: &ComplexityEstimate) -> f64 {
        self.std_error.hypot(other.std_error)
    }
}
