mod common;

use nalgebra::DMatrix;
use offset_risk_core::complexity::{
    empirical_offset_complexity, empirical_offset_draws, hat_matrix, local_complexity_fixed_point,
    offset_complexity_draws, offset_complexity_mc, sparse_offset_bound_check, sparse_offset_exact, FiniteClassSpec,
    SigmaMode, SparseClassSpec, SparseOracle, DEFAULT_R_TOL,
};
use offset_risk_core::model::{draw_sample, DiscreteDistribution, Sample};
use itertools::Itertools;
use rand::Rng;
use rand_distr::StandardNormal;

/// `E max(0, h * mean(sigma))` by summing over the binomial law of the sign count.
fn single_atom_rademacher(h: f64, n: usize) -> f64 {
    let mut total = 0.0;
    let mut binom = 1.0f64;
    for plus in 0..=n {
        if plus > 0 {
            binom = binom * (n - plus + 1) as f64 / plus as f64;
        }
        let mean = (2.0 * plus as f64 - n as f64) / n as f64;
        total += binom * (h * mean).max(0.0);
    }
    total / 2f64.powi(n as i32)
}

#[test]
fn single_atom_matches_sign_enumeration() {
    let dist = DiscreteDistribution::from_responses(&[0.0], vec![1.0], 1.0).unwrap();
    for n in [1, 4, 7, 12] {
        let h = 0.8;
        let class = FiniteClassSpec::new(vec![vec![h]], true).unwrap();
        let exact = single_atom_rademacher(h, n);

        // brute force over all 2^n patterns, independent of the library
        let brute: f64 = (0..1u32 << n)
            .map(|p| {
                let s: f64 = (0..n).map(|i| if p >> i & 1 == 1 { 1.0 } else { -1.0 }).sum();
                (h * s / n as f64).max(0.0)
            })
            .sum::<f64>()
            / 2f64.powi(n as i32);
        assert!((brute - exact).abs() < 1e-12);

        let sample = Sample::new(vec![0; n], &dist).unwrap();
        let e = empirical_offset_complexity(&sample, &class, 0.0, SigmaMode::Exact).unwrap();
        assert!((e.value - exact).abs() < 1e-12, "n = {n}: {} vs {exact}", e.value);

        let mc = offset_complexity_mc(&dist, &class, 0.0, n, 20_000, 17).unwrap();
        assert!((mc.value - exact).abs() <= 4.0 * mc.std_error, "n = {n}: {} +- {} vs {exact}", mc.value, mc.std_error);
    }
}

#[test]
fn exact_and_monte_carlo_sign_averages_agree() {
    let mut rng = common::rng(3);
    let class = common::star_class(&mut rng, 4, 5, 1.0);
    let sample = Sample::from_indices((0..12).map(|_| rng.random_range(0..5)).collect()).unwrap();
    for gamma in [0.0, 0.2, 1.0] {
        let exact = empirical_offset_complexity(&sample, &class, gamma, SigmaMode::Exact).unwrap();
        let mc = empirical_offset_complexity(&sample, &class, gamma, SigmaMode::MonteCarlo { replicates: 100_000, seed: 5 })
            .unwrap();
        assert!((exact.value - mc.value).abs() <= 4.0 * mc.std_error, "{} vs {} +- {}", exact.value, mc.value, mc.std_error);
    }
}

#[test]
fn per_draw_values_are_monotone_in_gamma_and_nonnegative() {
    let mut rng = common::rng(8);
    let dist = common::distribution(&mut rng, 6, 1.0);
    let class = common::star_class(&mut rng, 5, 6, 1.0);
    let gammas = [0.0, 0.1, 0.5, 2.0];
    let draws: Vec<Vec<f64>> =
        gammas.iter().map(|&g| offset_complexity_draws(&dist, &class, g, 20, 500, 4).unwrap()).collect();
    for w in draws.windows(2) {
        for (lo, hi) in w[1].iter().zip(&w[0]) {
            assert!(*lo >= 0.0);
            assert!(lo <= hi);
        }
    }
    let small = offset_complexity_mc(&dist, &class, 0.1, 20, 500, 4).unwrap();
    let large = offset_complexity_mc(&dist, &class, 0.5, 20, 500, 4).unwrap();
    assert!(large.value <= small.value + 3.0 * large.combined_se(&small));
}

#[test]
fn scaling_identity_holds_per_draw() {
    let mut rng = common::rng(12);
    let dist = common::distribution(&mut rng, 5, 1.0);
    let class = common::star_class(&mut rng, 4, 5, 1.0);
    let gamma = 0.3;
    let base = offset_complexity_draws(&dist, &class, gamma, 15, 300, 9).unwrap();
    for lambda in [1.0, 0.5, 0.125] {
        let scaled = offset_complexity_draws(&dist, &class.scaled(lambda), gamma / lambda, 15, 300, 9).unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            assert!((a - b / lambda).abs() <= 1e-12 * (1.0 + a.abs()), "{a} vs {}", b / lambda);
        }
    }
}

#[test]
fn population_offset_is_below_average_empirical_offset() {
    let mut rng = common::rng(21);
    let dist = common::distribution(&mut rng, 6, 1.0);
    let class = common::star_class(&mut rng, 4, 6, 1.0);
    let (gamma, n) = (0.4, 10);
    let population = offset_complexity_mc(&dist, &class, gamma, n, 20_000, 2).unwrap();
    let conditional: Vec<f64> = (0..300)
        .map(|r| {
            let sample = draw_sample(&dist, n, 1000 + r).unwrap();
            empirical_offset_complexity(&sample, &class, gamma, SigmaMode::Exact).unwrap().value
        })
        .collect();
    let (mean, se) = offset_risk_core::stats::mean_and_se(&conditional);
    assert!(population.value <= mean + 3.0 * se.hypot(population.std_error), "{} vs {mean}", population.value);
}

#[test]
fn offset_is_below_local_fixed_point() {
    let mut rng = common::rng(31);
    for trial in 0..5 {
        let dist = common::distribution(&mut rng, 8, 1.0);
        let class = common::star_class(&mut rng, 6, 8, 1.0);
        let gamma = rng.random_range(0.2..2.0);
        let off = offset_complexity_mc(&dist, &class, gamma, 30, 4000, trial).unwrap();
        let loc = local_complexity_fixed_point(&dist, &class, gamma, 30, 4000, DEFAULT_R_TOL, trial).unwrap();
        assert!(off.value <= loc.value + 3.0 * off.combined_se(&loc), "{} vs {}", off.value, loc.value);
    }
}

#[test]
fn empirical_draws_are_reproducible() {
    let mut rng = common::rng(1);
    let class = common::star_class(&mut rng, 3, 4, 1.0);
    let sample = Sample::from_indices(vec![0, 1, 2, 3, 3, 2]).unwrap();
    let mode = SigmaMode::MonteCarlo { replicates: 64, seed: 77 };
    assert_eq!(
        empirical_offset_draws(&sample, &class, 0.3, mode).unwrap(),
        empirical_offset_draws(&sample, &class, 0.3, mode).unwrap()
    );
}

fn gaussian_matrix<R: Rng>(rng: &mut R, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
}

fn signs<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// `max_S c_S^T G_S^{-1} c_S / (4 gamma)` with `G_S` solved densely by LU.
fn dense_solve_oracle(phi: &DMatrix<f64>, sigma: &[f64], k: usize, gamma: f64) -> f64 {
    let s = nalgebra::DVector::from_column_slice(sigma);
    (1..=k)
        .flat_map(|size| (0..phi.ncols()).combinations(size))
        .map(|subset| {
            let cols = phi.select_columns(&subset);
            let gram = cols.transpose() * &cols;
            let c = cols.transpose() * &s;
            let w = gram.lu().solve(&c).expect("full-rank Gram matrix");
            c.dot(&w) / (4.0 * gamma)
        })
        .fold(0.0, f64::max)
}

#[test]
fn sparse_value_matches_dense_solves() {
    let mut rng = common::rng(41);
    for _ in 0..20 {
        let (n, d) = (rng.random_range(6..14), rng.random_range(2..7));
        let k = rng.random_range(1..=d.min(3));
        let gamma = rng.random_range(0.3..3.0);
        let phi = gaussian_matrix(&mut rng, n, d);
        let sigma = signs(&mut rng, n);
        let spec = SparseClassSpec::new(phi.clone(), k, gamma).unwrap();
        let value = sparse_offset_exact(&spec, &sigma).unwrap();
        let oracle = dense_solve_oracle(&phi, &sigma, k, gamma);
        assert!((value - oracle).abs() <= 1e-8 * (1.0 + oracle), "{value} vs {oracle}");
    }
}

#[test]
fn hat_matrices_are_orthogonal_projections() {
    let mut rng = common::rng(43);
    for _ in 0..20 {
        let (n, d) = (rng.random_range(4..10), rng.random_range(1..6));
        let mut phi = gaussian_matrix(&mut rng, n, d);
        if d > 1 {
            // a repeated column makes the subset rank deficient
            let c0 = phi.column(0).clone_owned();
            phi.set_column(d - 1, &c0);
        }
        let size = rng.random_range(1..=d);
        let subset: Vec<usize> = (0..d).collect::<Vec<_>>()[..size].to_vec();
        let h = hat_matrix(&phi, &subset).unwrap();
        assert!((&h - h.transpose()).amax() <= 1e-8);
        assert!((&h * &h - &h).amax() <= 1e-8);
        for ev in h.clone().symmetric_eigen().eigenvalues.iter() {
            assert!(ev.abs() <= 1e-8 || (ev - 1.0).abs() <= 1e-8, "eigenvalue {ev}");
        }
        assert!(h.norm_squared() <= size as f64 + 1e-8);
    }
}

#[test]
fn sparse_value_scales_inversely_with_gamma() {
    let mut rng = common::rng(47);
    let phi = gaussian_matrix(&mut rng, 16, 6);
    let spec = SparseClassSpec::new(phi, 2, 0.7).unwrap();
    let doubled = spec.with_gamma(1.4).unwrap();
    let (o1, o2) = (SparseOracle::new(&spec).unwrap(), SparseOracle::new(&doubled).unwrap());
    for _ in 0..50 {
        let sigma = signs(&mut rng, 16);
        let (a, b) = (o1.value(&sigma).unwrap(), o2.value(&sigma).unwrap());
        assert!((a - 2.0 * b).abs() <= 1e-10 * (1.0 + a), "{a} vs {b}");
    }
    let r1 = sparse_offset_bound_check(&spec, 200, 3).unwrap();
    let r2 = sparse_offset_bound_check(&doubled, 200, 3).unwrap();
    assert!((r1.estimate - 2.0 * r2.estimate).abs() <= 1e-10 * (1.0 + r1.estimate));
    assert!((r1.ratio - r2.ratio).abs() <= 1e-10 * (1.0 + r1.ratio));
}
