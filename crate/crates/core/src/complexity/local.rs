use rayon::prelude::*;

use super::offset::draw_x_sigma;
use super::{ComplexityEstimate, ComplexityKind, FiniteClassSpec};
use crate::error::{Error, Result};
use crate::model::{check_len, DiscreteDistribution};
use crate::stats::mean_and_se;

pub const DEFAULT_R_TOL: f64 = 1e-6;

/// The localized Rademacher average `phi(r)` of a star-shaped class,
/// evaluated on a fixed set of `(X, sigma)` draws.
///
/// For each draw and `h` we keep `c_h = n^{-1} sum_i sigma_i h(X_i)`. The
/// localized supremum over `{lambda h : gamma E(lambda h)^2 <= r}` is then
/// `max(0, max_h lambda_max(h, r) c_h)`.
#[derive(Debug, Clone)]
pub struct LocalCurve {
    gamma: f64,
    second_moments: Vec<f64>,
    correlations: Vec<Vec<f64>>,
}

impl LocalCurve {
    pub fn new(
        dist: &DiscreteDistribution,
        class: &FiniteClassSpec,
        gamma: f64,
        n: usize,
        replicates: usize,
        seed: u64,
    ) -> Result<Self> {
        check_len(dist.support_size(), class.support_size())?;
        if !class.star_hull() {
            return Err(Error::InvalidParameter("local complexity needs a star-shaped class".into()));
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma = {gamma} must be positive")));
        }
        if n == 0 {
            return Err(Error::EmptySample);
        }
        if replicates == 0 {
            return Err(Error::InvalidParameter("need at least one replicate".into()));
        }
        let second_moments = class
            .base()
            .iter()
            .map(|h| dist.expect(&h.iter().map(|v| v * v).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?;
        let nf = n as f64;
        let correlations = (0..replicates as u64)
            .into_par_iter()
            .map(|r| {
                let draw = draw_x_sigma(dist, n, seed, r);
                class.base().iter().map(|h| draw.linear(h) / nf).collect()
            })
            .collect();
        Ok(Self { gamma, second_moments, correlations })
    }

    pub fn replicates(&self) -> usize {
        self.correlations.len()
    }

    fn lambda_max(&self, v: f64, r: f64) -> f64 {
        if v > 0.0 {
            (r / (self.gamma * v)).sqrt().min(1.0)
        } else {
            1.0
        }
    }

    /// Per-draw localized suprema at radius `r`.
    pub fn per_draw(&self, r: f64) -> Vec<f64> {
        let scale: Vec<f64> = self.second_moments.iter().map(|&v| self.lambda_max(v, r)).collect();
        self.correlations
            .iter()
            .map(|c| c.iter().zip(&scale).map(|(c, s)| c * s).fold(0.0, f64::max))
            .collect()
    }

    /// `(phi(r), standard error)`.
    pub fn phi(&self, r: f64) -> (f64, f64) {
        mean_and_se(&self.per_draw(r))
    }

    /// Smallest radius at which every `lambda_max` equals one; `phi` is
    /// constant beyond it.
    pub fn saturation_radius(&self) -> f64 {
        self.gamma * self.second_moments.iter().copied().fold(0.0, f64::max)
    }

    /// `inf {r > 0 : phi(r) <= r}` to within `r_tol`, returned as the upper
    /// end of the final bracket.
    pub fn fixed_point(&self, r_tol: f64) -> f64 {
        let phi_max = self.phi(self.saturation_radius()).0;
        if phi_max <= 0.0 {
            return 0.0;
        }
        // phi(r) / r is nonincreasing, so {phi(r) <= r} is an interval [r*, inf).
        let (mut lo, mut hi) = (0.0, self.saturation_radius().max(phi_max));
        while hi - lo >= r_tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.phi(mid).0 <= mid {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// Monte-Carlo local Rademacher fixed point. The standard error is
/// `2 se(phi(r*))`: near the crossing `phi' <= phi / 2r = 1/2`, so an error
/// `e` in `phi` moves the crossing by at most `2e`.
pub fn local_complexity_fixed_point(
    dist: &DiscreteDistribution,
    class: &FiniteClassSpec,
    gamma: f64,
    n: usize,
    replicates: usize,
    r_tol: f64,
    seed: u64,
) -> Result<ComplexityEstimate> {
    if !(r_tol > 0.0) {
        return Err(Error::InvalidParameter(format!("r_tol = {r_tol} must be positive")));
    }
    let curve = LocalCurve::new(dist, class, gamma, n, replicates, seed)?;
    let value = curve.fixed_point(r_tol);
    let std_error = if value > 0.0 { 2.0 * curve.phi(value).1 } else { 0.0 };
    Ok(ComplexityEstimate { value, std_error, replicates, gamma, kind: ComplexityKind::LocalFixedPoint })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_atom() -> DiscreteDistribution {
        DiscreteDistribution::from_responses(&[0.0, 0.0], vec![0.5, 0.5], 1.0).unwrap()
    }

    #[test]
    fn zero_class_has_zero_fixed_point() {
        let class = FiniteClassSpec::new(vec![vec![0.0, 0.0]], true).unwrap();
        let est = local_complexity_fixed_point(&two_atom(), &class, 1.0, 10, 100, DEFAULT_R_TOL, 3).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn rejects_non_star_class() {
        let class = FiniteClassSpec::new(vec![vec![1.0, 0.0]], false).unwrap();
        assert!(local_complexity_fixed_point(&two_atom(), &class, 1.0, 10, 100, DEFAULT_R_TOL, 3).is_err());
        let star = FiniteClassSpec::new(vec![vec![1.0, 0.0]], true).unwrap();
        assert!(local_complexity_fixed_point(&two_atom(), &star, 0.0, 10, 100, DEFAULT_R_TOL, 3).is_err());
    }

    #[test]
    fn matches_grid_scan() {
        let class = FiniteClassSpec::new(vec![vec![1.0, -0.5], vec![0.3, 0.8]], true).unwrap();
        let curve = LocalCurve::new(&two_atom(), &class, 0.7, 8, 2000, 11).unwrap();
        let r_star = curve.fixed_point(DEFAULT_R_TOL);
        let hi = curve.saturation_radius().max(curve.phi(10.0).0);
        let steps = 200_000;
        let grid = (1..=steps)
            .map(|i| hi * i as f64 / steps as f64)
            .find(|&r| curve.phi(r).0 <= r)
            .unwrap();
        assert!(r_star > 0.0);
        assert!((grid - r_star).abs() <= DEFAULT_R_TOL + hi / steps as f64, "{grid} vs {r_star}");
    }

    #[test]
    fn phi_over_root_r_is_nonincreasing_per_draw() {
        let class = FiniteClassSpec::new(vec![vec![1.0, -0.5], vec![0.3, 0.8], vec![-1.0, 0.1]], true).unwrap();
        let curve = LocalCurve::new(&two_atom(), &class, 0.4, 6, 300, 5).unwrap();
        let radii: Vec<f64> = (1..60).map(|i| 0.01 * i as f64).collect();
        let values: Vec<Vec<f64>> = radii.iter().map(|&r| curve.per_draw(r)).collect();
        for w in 0..radii.len() - 1 {
            for (lo, hi) in values[w].iter().zip(&values[w + 1]) {
                assert!(hi / radii[w + 1].sqrt() <= lo / radii[w].sqrt() + 1e-12);
                assert!(hi >= lo);
            }
        }
    }
}
