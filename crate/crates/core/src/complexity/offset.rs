use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ComplexityEstimate, ComplexityKind, FiniteClassSpec};
use crate::error::{Error, Result};
use crate::model::{check_len, DiscreteDistribution, Sample};
use crate::rng;
use crate::stats::{compensated_sum, mean_and_se};

/// Largest sample size for which all `2^n` sign patterns are enumerated.
pub const EXACT_SIGMA_MAX_N: usize = 20;

/// Stream tag shared by every routine that draws `(X, sigma)` pairs, so
/// that different complexities computed under one seed see the same draws.
pub(crate) const DRAW_TAG: &str = "complexity-draws";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarHullSup {
    pub index: usize,
    pub lambda: f64,
    pub value: f64,
}

fn best_lambda(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        (a / (2.0 * b)).clamp(0.0, 1.0)
    } else if a > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `max_h max_{lambda in [0,1]} lambda A(h) - lambda^2 B(h)` for `B >= 0`.
/// The maximizing `lambda` is `clamp(A / 2B, 0, 1)`; ties go to the lowest `h`.
pub fn star_hull_sup(a: &[f64], b: &[f64]) -> Result<StarHullSup> {
    check_len(a.len(), b.len())?;
    if a.is_empty() {
        return Err(Error::InvalidParameter("no coefficients".into()));
    }
    if let Some(bad) = b.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidParameter(format!("quadratic coefficient {bad} is negative")));
    }
    Ok(star_hull_sup_unchecked(a, b))
}

pub(crate) fn star_hull_sup_unchecked(a: &[f64], b: &[f64]) -> StarHullSup {
    let mut best = StarHullSup { index: 0, lambda: 0.0, value: f64::NEG_INFINITY };
    for (h, (&ah, &bh)) in a.iter().zip(b).enumerate() {
        let lambda = best_lambda(ah, bh);
        let value = lambda * ah - lambda * lambda * bh;
        if value > best.value {
            best = StarHullSup { index: h, lambda, value };
        }
    }
    best
}

/// Supremum of `A(h) - B(h)` over the class (or its star hull), divided by `n`.
pub(crate) fn class_sup(class: &FiniteClassSpec, a: &[f64], b: &[f64], n: usize) -> f64 {
    let value = if class.star_hull() {
        star_hull_sup_unchecked(a, b).value
    } else {
        a.iter().zip(b).map(|(x, y)| x - y).fold(f64::NEG_INFINITY, f64::max)
    };
    value / n as f64
}

/// Per-atom sign sums and counts of one draw of `(X, sigma)`.
pub(crate) struct Draw {
    pub sign_sum: Vec<f64>,
    pub count: Vec<f64>,
}

impl Draw {
    pub fn from_pairs(support: usize, xs: &[usize], signs: impl Iterator<Item = f64>) -> Self {
        let mut sign_sum = vec![0.0; support];
        let mut count = vec![0.0; support];
        for (&x, s) in xs.iter().zip(signs) {
            sign_sum[x] += s;
            count[x] += 1.0;
        }
        Self { sign_sum, count }
    }

    /// `sum_i sigma_i h(X_i)`.
    pub fn linear(&self, h: &[f64]) -> f64 {
        self.sign_sum.iter().zip(h).map(|(s, v)| s * v).sum()
    }

    /// `sum_i h(X_i)^2`.
    pub fn quadratic(&self, h: &[f64]) -> f64 {
        self.count.iter().zip(h).map(|(c, v)| c * v * v).sum()
    }
}

pub(crate) fn draw_x_sigma(dist: &DiscreteDistribution, n: usize, seed: u64, replicate: u64) -> Draw {
    let sampler = dist.sampler();
    let mut rng = rng::stream(seed, DRAW_TAG, replicate);
    let xs = sampler.draw(n, &mut rng);
    let signs: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    Draw::from_pairs(dist.support_size(), &xs, signs.into_iter())
}

fn check_class(dist: &DiscreteDistribution, class: &FiniteClassSpec, gamma: f64, n: usize) -> Result<()> {
    check_len(dist.support_size(), class.support_size())?;
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} must be nonnegative")));
    }
    if n == 0 {
        return Err(Error::EmptySample);
    }
    Ok(())
}

/// Per-replicate values of
/// `sup_h n^{-1} sum_i sigma_i h(X_i) - gamma h(X_i)^2 - gamma E h^2`.
///
/// Replicate `r` depends only on `(seed, r)`, so calls with different
/// `gamma` or classes under the same seed share their random draws.
pub fn offset_complexity_draws(
    dist: &DiscreteDistribution,
    class: &FiniteClassSpec,
    gamma: f64,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_class(dist, class, gamma, n)?;
    let second: Vec<f64> = class.base().iter().map(|h| dist.expect(&h.iter().map(|v| v * v).collect::<Vec<_>>())).collect::<Result<_>>()?;
    let nf = n as f64;
    Ok((0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let draw = draw_x_sigma(dist, n, seed, r);
            let a: Vec<f64> = class.base().iter().map(|h| draw.linear(h)).collect();
            let b: Vec<f64> = class
                .base()
                .iter()
                .zip(&second)
                .map(|(h, e)| gamma * (draw.quadratic(h) + nf * e))
                .collect();
            class_sup(class, &a, &b, n)
        })
        .collect())
}

/// Monte-Carlo estimate of the offset Rademacher complexity (population
/// quadratic term included). `gamma = 0` gives the plain Rademacher average.
pub fn offset_complexity_mc(
    dist: &DiscreteDistribution,
    class: &FiniteClassSpec,
    gamma: f64,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<ComplexityEstimate> {
    if replicates == 0 {
        return Err(Error::InvalidParameter("need at least one replicate".into()));
    }
    let draws = offset_complexity_draws(dist, class, gamma, n, replicates, seed)?;
    let (value, std_error) = mean_and_se(&draws);
    Ok(ComplexityEstimate { value, std_error, replicates, gamma, kind: ComplexityKind::Offset })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    MonteCarlo { replicates: usize, seed: u64 },
    /// Average over all `2^n` sign patterns (`n <= 20`).
    Exact,
}

/// Values of `sup_h n^{-1} sum_i sigma_i h(X_i) - gamma h(X_i)^2` for each
/// sign pattern (exact mode: pattern `p` has `sigma_i = +1` iff bit `i` of `p` is set).
pub fn empirical_offset_draws(
    sample_x: &Sample,
    class: &FiniteClassSpec,
    gamma: f64,
    mode: SigmaMode,
) -> Result<Vec<f64>> {
    sample_x.check_support(class.support_size())?;
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} must be nonnegative")));
    }
    let n = sample_x.n();
    let xs = sample_x.indices();
    // the quadratic part does not depend on sigma
    let b: Vec<f64> = class
        .base()
        .iter()
        .map(|h| gamma * xs.iter().map(|&x| h[x] * h[x]).sum::<f64>())
        .collect();
    let values_for = |signs: &dyn Fn(usize) -> f64| -> f64 {
        let a: Vec<f64> = class
            .base()
            .iter()
            .map(|h| xs.iter().enumerate().map(|(i, &x)| signs(i) * h[x]).sum())
            .collect();
        class_sup(class, &a, &b, n)
    };
    match mode {
        SigmaMode::Exact => {
            if n > EXACT_SIGMA_MAX_N {
                return Err(Error::InvalidParameter(format!(
                    "exact sign enumeration supports n <= {EXACT_SIGMA_MAX_N}, got {n}"
                )));
            }
            Ok((0..1u64 << n)
                .into_par_iter()
                .map(|p| values_for(&|i| if p >> i & 1 == 1 { 1.0 } else { -1.0 }))
                .collect())
        }
        SigmaMode::MonteCarlo { replicates, seed } => {
            if replicates == 0 {
                return Err(Error::InvalidParameter("need at least one replicate".into()));
            }
            Ok((0..replicates as u64)
                .into_par_iter()
                .map(|r| {
                    let mut rng = rng::stream(seed, "sigma", r);
                    let signs: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
                    values_for(&|i| signs[i])
                })
                .collect())
        }
    }
}

/// Offset complexity conditional on the inputs `sample_x`, without the
/// population quadratic term.
pub fn empirical_offset_complexity(
    sample_x: &Sample,
    class: &FiniteClassSpec,
    gamma: f64,
    mode: SigmaMode,
) -> Result<ComplexityEstimate> {
    let draws = empirical_offset_draws(sample_x, class, gamma, mode)?;
    let (value, std_error) = match mode {
        SigmaMode::Exact => (compensated_sum(draws.iter().copied()) / draws.len() as f64, 0.0),
        SigmaMode::MonteCarlo { .. } => mean_and_se(&draws),
    };
    Ok(ComplexityEstimate {
        value,
        std_error,
        replicates: draws.len(),
        gamma,
        kind: ComplexityKind::EmpiricalOffset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_hull_sup_vertices() {
        let s = star_hull_sup(&[2.0], &[1.0]).unwrap();
        assert_eq!((s.lambda, s.value), (1.0, 1.0));
        let s = star_hull_sup(&[1.0], &[1.0]).unwrap();
        assert_eq!((s.lambda, s.value), (0.5, 0.25));
        for b in [0.0, 0.5, 7.0] {
            let s = star_hull_sup(&[-3.0], &[b]).unwrap();
            assert_eq!((s.lambda, s.value), (0.0, 0.0));
        }
        let s = star_hull_sup(&[0.5], &[0.0]).unwrap();
        assert_eq!((s.lambda, s.value), (1.0, 0.5));
        assert!(star_hull_sup(&[1.0], &[-0.1]).is_err());
        assert!(star_hull_sup(&[1.0, 2.0], &[0.1]).is_err());
    }

    #[test]
    fn star_hull_sup_ties_go_low() {
        let s = star_hull_sup(&[1.0, 1.0, -1.0], &[1.0, 1.0, 0.0]).unwrap();
        assert_eq!(s.index, 0);
        let zero = star_hull_sup(&[-1.0, -2.0], &[1.0, 1.0]).unwrap();
        assert_eq!((zero.index, zero.value), (0, 0.0));
    }

    #[test]
    fn zero_class_has_zero_complexity() {
        let d = DiscreteDistribution::from_responses(&[0.0, 0.0], vec![0.5, 0.5], 1.0).unwrap();
        let class = FiniteClassSpec::new(vec![vec![0.0, 0.0]], true).unwrap();
        let est = offset_complexity_mc(&d, &class, 0.3, 10, 200, 1).unwrap();
        assert_eq!((est.value, est.std_error), (0.0, 0.0));
        let s = Sample::new(vec![0, 1, 1], &d).unwrap();
        let e = empirical_offset_complexity(&s, &class, 0.3, SigmaMode::Exact).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.replicates, 8);
    }

    #[test]
    fn exact_mode_is_capped() {
        let class = FiniteClassSpec::new(vec![vec![1.0]], true).unwrap();
        let s = Sample::from_indices(vec![0; 21]).unwrap();
        assert!(empirical_offset_complexity(&s, &class, 0.1, SigmaMode::Exact).is_err());
        let bad = Sample::from_indices(vec![1]).unwrap();
        assert!(empirical_offset_complexity(&bad, &class, 0.1, SigmaMode::Exact).is_err());
    }
}
