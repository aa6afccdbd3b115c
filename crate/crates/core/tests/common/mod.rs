#![allow(dead_code)]

use offset_risk_core::complexity::FiniteClassSpec;
use offset_risk_core::model::{Dictionary, DiscreteDistribution};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn probs<R: Rng>(rng: &mut R, s: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..s).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|v| v / total).collect();
    // put the rounding residue on the last atom so the sum is exactly one
    let head: f64 = p[..s - 1].iter().sum();
    p[s - 1] = 1.0 - head;
    p
}

pub fn distribution<R: Rng>(rng: &mut R, s: usize, b: f64) -> DiscreteDistribution {
    let ys: Vec<f64> = (0..s).map(|_| rng.random_range(-b..=b)).collect();
    DiscreteDistribution::from_responses(&ys, probs(rng, s), b).unwrap()
}

pub fn dictionary<R: Rng>(rng: &mut R, m: usize, s: usize, b: f64) -> Dictionary {
    Dictionary::new((0..m).map(|_| (0..s).map(|_| rng.random_range(-b..=b)).collect()).collect(), b).unwrap()
}

pub fn star_class<R: Rng>(rng: &mut R, size: usize, s: usize, scale: f64) -> FiniteClassSpec {
    FiniteClassSpec::new(
        (0..size).map(|_| (0..s).map(|_| rng.random_range(-scale..=scale)).collect()).collect(),
        true,
    )
    .unwrap()
}
