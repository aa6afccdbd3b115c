//! Instance generators used by the commands and the verification checks.

use anyhow::Result;
use offset_risk_core::complexity::FiniteClassSpec;
use offset_risk_core::concentration::{JointAtom, MultiplierSetup};
use offset_risk_core::model::{Atom, Dictionary, DiscreteDistribution, Instance};
use offset_risk_core::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A regression function `g*` with `|g*| <= truth_bound`, symmetric noise
/// `+-noise`, and a dictionary holding `g*` and `g* +- a_j u` for
/// `a_j = top * 2^-j`, `j < levels`, where `u` is a random sign pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderSpec {
    pub support: usize,
    pub levels: usize,
    pub top: f64,
    pub truth_bound: f64,
    pub noise: f64,
    pub b: f64,
    pub seed: u64,
}

impl Default for LadderSpec {
    fn default() -> Self {
        Self { support: 16, levels: 7, top: 0.5, truth_bound: 0.4, noise: 0.5, b: 1.0, seed: 2024 }
    }
}

pub fn truth_ladder(spec: &LadderSpec) -> Result<Instance> {
    anyhow::ensure!(spec.support > 0, "ladder support must be positive");
    anyhow::ensure!(
        spec.truth_bound + spec.top <= spec.b && spec.truth_bound + spec.noise <= spec.b,
        "ladder values exceed the bound b"
    );
    let mut rng = rng::stream(spec.seed, "truth-ladder", 0);
    let truth: Vec<f64> = (0..spec.support).map(|_| rng.random_range(-spec.truth_bound..=spec.truth_bound)).collect();
    let signs: Vec<f64> = (0..spec.support).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();

    // atom 2x carries y = g*(x) + noise, atom 2x + 1 carries y = g*(x) - noise
    let mut atoms = Vec::with_capacity(2 * spec.support);
    for (x, g) in truth.iter().enumerate() {
        for s in [1.0, -1.0] {
            atoms.push(Atom { x: vec![x as f64 / spec.support as f64], y: g + s * spec.noise });
        }
    }
    let probs = vec![1.0 / atoms.len() as f64; atoms.len()];
    let on_atoms = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..atoms.len()).map(|a| f(a / 2)).collect() };

    let mut rows = vec![on_atoms(&|x| truth[x])];
    for j in 0..spec.levels {
        let a = spec.top * 0.5f64.powi(j as i32);
        for s in [1.0, -1.0] {
            rows.push(on_atoms(&|x| truth[x] + s * a * signs[x]));
        }
    }
    let dist = DiscreteDistribution::new(atoms, probs, spec.b)?;
    Ok(Instance::new(dist, Dictionary::new(rows, spec.b)?)?)
}

pub fn random_probs<R: Rng>(rng: &mut R, s: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..s).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let head: f64 = p[..s - 1].iter().sum();
    p[s - 1] = 1.0 - head;
    p
}

/// Uniform responses in `[-b, b]` on `s` atoms with one-dimensional features,
/// and `m` dictionary rows with values in `[-b, b]`.
pub fn random_instance<R: Rng>(rng: &mut R, s: usize, m: usize, b: f64) -> Result<Instance> {
    let atoms = (0..s).map(|i| Atom { x: vec![i as f64], y: rng.random_range(-b..=b) }).collect();
    let dist = DiscreteDistribution::new(atoms, random_probs(rng, s), b)?;
    let rows = (0..m).map(|_| (0..s).map(|_| rng.random_range(-b..=b)).collect()).collect();
    Ok(Instance::new(dist, Dictionary::new(rows, b)?)?)
}

pub fn random_star_class<R: Rng>(rng: &mut R, size: usize, s: usize, scale: f64) -> Result<FiniteClassSpec> {
    let base = (0..size).map(|_| (0..s).map(|_| rng.random_range(-scale..=scale)).collect()).collect();
    Ok(FiniteClassSpec::new(base, true)?)
}

/// Random distribution on `s` atoms for complexity computations.
pub fn random_distribution<R: Rng>(rng: &mut R, s: usize) -> Result<DiscreteDistribution> {
    Ok(DiscreteDistribution::from_responses(&vec![0.0; s], random_probs(rng, s), 1.0)?)
}

/// A joint law of `(X, zeta)` that alternates between independent
/// Rademacher multipliers and arbitrary dependent tables.
pub fn random_multiplier_setup<R: Rng>(rng: &mut R) -> Result<MultiplierSetup> {
    let s = rng.random_range(1..=8);
    let size = rng.random_range(1..=5);
    let class = random_star_class(rng, size, s, 1.0)?;
    let gamma = rng.random_range(0.1..2.0);
    let scale = rng.random_range(0.2..2.0);
    if rng.random::<bool>() {
        let p_x = random_probs(rng, s);
        Ok(MultiplierSetup::rademacher_product(&p_x, scale, class, gamma)?)
    } else {
        let atoms = (0..2 * s)
            .map(|j| JointAtom { feature: j % s, zeta: rng.random_range(-scale..=scale) })
            .collect();
        let probs = random_probs(rng, 2 * s);
        Ok(MultiplierSetup::new(atoms, probs, class, gamma)?)
    }
}

/// Linear-regression instance with `d`-dimensional features in `[-1/d, 1/d]^d`.
pub fn random_linear<R: Rng>(rng: &mut R, s: usize, d: usize) -> Result<DiscreteDistribution> {
    let atoms = (0..s)
        .map(|_| Atom {
            x: (0..d).map(|_| rng.random_range(-1.0..1.0) / d as f64).collect(),
            y: rng.random_range(-1.0..1.0),
        })
        .collect();
    Ok(DiscreteDistribution::new(atoms, random_probs(rng, s), 1.0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use offset_risk_core::model::LossSpec;
    use offset_risk_core::risk::{population_minimizer, population_risk};

    #[test]
    fn ladder_contains_the_regression_function() {
        let inst = truth_ladder(&LadderSpec::default()).unwrap();
        assert_eq!(inst.dict.m(), 15);
        assert_eq!(inst.dist.support_size(), 32);
        let loss = LossSpec::squared(1.0).unwrap();
        let best = population_minimizer(&inst.dist, &loss, &inst.dict).unwrap();
        assert_eq!(best.gstar_index, 0);
        // excess risk of g* + a u is a^2 since u^2 = 1 and the noise is centered
        let r1 = population_risk(&inst.dist, &loss, inst.dict.row(1)).unwrap().value;
        assert!((r1 - best.gstar_risk - 0.25).abs() < 1e-12);
        assert!((best.gstar_risk - 0.25).abs() < 1e-12);
    }

    #[test]
    fn ladder_is_reproducible() {
        let spec = LadderSpec::default();
        assert_eq!(truth_ladder(&spec).unwrap(), truth_ladder(&spec).unwrap());
        let other = LadderSpec { seed: 1, ..spec };
        assert_ne!(truth_ladder(&other).unwrap(), truth_ladder(&LadderSpec::default()).unwrap());
        assert!(truth_ladder(&LadderSpec { top: 0.9, ..LadderSpec::default() }).is_err());
    }
}
