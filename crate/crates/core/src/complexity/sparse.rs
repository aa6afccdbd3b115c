use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::stats::mean_and_se;

/// Default bound on the number of enumerated subsets.
pub const DEFAULT_SUBSET_CAP: u128 = 1_000_000;
/// Singular values below `PINV_RCOND * sigma_max` are treated as zero.
pub const PINV_RCOND: f64 = 1e-10;

/// `k`-sparse linear predictors `x -> <w, Phi_x>` with `|supp(w)| <= k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseClassSpec {
    phi: DMatrix<f64>,
    k: usize,
    gamma: f64,
    cap: u128,
}

impl SparseClassSpec {
    pub fn new(phi: DMatrix<f64>, k: usize, gamma: f64) -> Result<Self> {
        let d = phi.ncols();
        if phi.nrows() == 0 || d == 0 {
            return Err(Error::InvalidParameter("feature matrix is empty".into()));
        }
        if k == 0 || k > d {
            return Err(Error::InvalidParameter(format!("sparsity k = {k} must lie in [1, {d}]")));
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma = {gamma} must be positive")));
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("feature matrix must be finite".into()));
        }
        Ok(Self { phi, k, gamma, cap: DEFAULT_SUBSET_CAP })
    }

    pub fn with_cap(mut self, cap: u128) -> Self {
        self.cap = cap;
        self
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn n(&self) -> usize {
        self.phi.nrows()
    }

    pub fn d(&self) -> usize {
        self.phi.ncols()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn cap(&self) -> u128 {
        self.cap
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Ok(Self::new(self.phi.clone(), self.k, gamma)?.with_cap(self.cap))
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Number of nonempty subsets of `{0..d}` with at most `k` elements.
pub fn subset_count(d: usize, k: usize) -> u128 {
    (1..=k.min(d)).map(|i| binomial(d, i)).sum()
}

/// Rows `Sigma_r^{-1} V_r^T` of the thin SVD of `Phi_S` restricted to the
/// retained singular values; `|| M Phi_S^T sigma ||^2 = sigma^T H_S sigma`.
fn projector_factor(cols: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = cols.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let s_max = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| {
            let s = svd.singular_values[i];
            s > 0.0 && s > PINV_RCOND * s_max
        })
        .collect();
    DMatrix::from_fn(keep.len(), cols.ncols(), |r, c| v_t[(keep[r], c)] / svd.singular_values[keep[r]])
}

/// The hat matrix `Phi_S (Phi_S^T Phi_S)^+ Phi_S^T` for the column subset `subset`.
pub fn hat_matrix(phi: &DMatrix<f64>, subset: &[usize]) -> Result<DMatrix<f64>> {
    if let Some(&bad) = subset.iter().find(|&&j| j >= phi.ncols()) {
        return Err(Error::IndexOutOfRange { index: bad, len: phi.ncols() });
    }
    let cols = phi.select_columns(subset);
    let svd = cols.svd(true, false);
    let u = svd.u.expect("requested U");
    let s_max = svd.singular_values.max();
    let mut h = DMatrix::zeros(phi.nrows(), phi.nrows());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > 0.0 && s > PINV_RCOND * s_max {
            let col = u.column(i);
            h += col * col.transpose();
        }
    }
    Ok(h)
}

/// Precomputed per-subset factors so that the supremum for many sign
/// vectors costs one small matrix-vector product per subset.
#[derive(Debug, Clone)]
pub struct SparseOracle {
    spec: SparseClassSpec,
    subsets: Vec<Vec<usize>>,
    factors: Vec<DMatrix<f64>>,
}

impl SparseOracle {
    pub fn new(spec: &SparseClassSpec) -> Result<Self> {
        let count = subset_count(spec.d(), spec.k());
        if count > spec.cap() {
            return Err(Error::EnumerationCap { count, cap: spec.cap() });
        }
        let subsets: Vec<Vec<usize>> = (1..=spec.k()).flat_map(|size| (0..spec.d()).combinations(size)).collect();
        let factors = subsets.par_iter().map(|s| projector_factor(&spec.phi.select_columns(s))).collect();
        Ok(Self { spec: spec.clone(), subsets, factors })
    }

    pub fn spec(&self) -> &SparseClassSpec {
        &self.spec
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    /// `max_S sigma^T H_S sigma / (4 gamma)` together with the maximizing subset
    /// (ties go to the first subset in enumeration order).
    pub fn argmax(&self, sigma: &[f64]) -> Result<(f64, &[usize])> {
        if sigma.len() != self.spec.n() {
            return Err(Error::DimensionMismatch { expected: self.spec.n(), got: sigma.len() });
        }
        let corr = self.spec.phi.transpose() * DVector::from_column_slice(sigma);
        let mut best = (0.0, 0usize);
        for (idx, (subset, m)) in self.subsets.iter().zip(&self.factors).enumerate() {
            let c_s = DVector::from_iterator(subset.len(), subset.iter().map(|&j| corr[j]));
            let v = (m * c_s).norm_squared();
            if v > best.0 {
                best = (v, idx);
            }
        }
        Ok((best.0 / (4.0 * self.spec.gamma), &self.subsets[best.1]))
    }

    pub fn value(&self, sigma: &[f64]) -> Result<f64> {
        Ok(self.argmax(sigma)?.0)
    }
}

/// `sup_w <Phi w, sigma> - gamma ||Phi w||^2` over `k`-sparse `w`, unnormalized.
pub fn sparse_offset_exact(spec: &SparseClassSpec, sigma: &[f64]) -> Result<f64> {
    SparseOracle::new(spec)?.value(sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseBoundReport {
    /// Mean of the supremum divided by `n` over sign draws.
    pub estimate: f64,
    pub std_error: f64,
    pub replicates: usize,
    /// `k log(e d / k) / (gamma n)`.
    pub rate: f64,
    pub ratio: f64,
}

/// Averages the exact sparse supremum over Rademacher draws and compares
/// it with the `k log(ed/k) / (gamma n)` rate.
pub fn sparse_offset_bound_check(spec: &SparseClassSpec, replicates: usize, seed: u64) -> Result<SparseBoundReport> {
    if replicates == 0 {
        return Err(Error::InvalidParameter("need at least one replicate".into()));
    }
    let oracle = SparseOracle::new(spec)?;
    let n = spec.n();
    let values = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, "sparse-sigma", r);
            let sigma: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            oracle.value(&sigma).map(|v| v / n as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (estimate, std_error) = mean_and_se(&values);
    let (k, d) = (spec.k() as f64, spec.d() as f64);
    let rate = k * (std::f64::consts::E * d / k).ln() / (spec.gamma() * n as f64);
    Ok(SparseBoundReport { estimate, std_error, replicates, rate, ratio: estimate / rate })
}
