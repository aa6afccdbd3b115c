//! The verification checks run by `offset-risk verify` and by the
//! acceptance test target. Every check is deterministic given the master
//! seed: random instances are drawn from per-instance streams and results
//! are collected in instance order.

use anyhow::{bail, Result};
use nalgebra::{DMatrix, DVector};
use offset_risk_core::complexity::{
    hat_matrix, local_complexity_fixed_point, offset_complexity_mc, sparse_offset_bound_check, SparseClassSpec,
    SparseOracle, DEFAULT_R_TOL,
};
use offset_risk_core::concentration::{lambda_grid, mgf_verify, multiplier_sup, tail_verify, SelfLocalization};
use offset_risk_core::estimators::{check_offset, erm, linear_predictions, mirror_descent, star, MirrorMap};
use offset_risk_core::model::{draw_sample, LossSpec, Sample};
use offset_risk_core::risk::{bernstein_check, MARGIN_TOL};
use offset_risk_core::rng::{self, StreamRng};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{run_aggregate, AggregateParams};
use crate::config::Estimator;
use crate::instances::{
    random_distribution, random_instance, random_linear, random_multiplier_setup, random_star_class, truth_ladder,
    LadderSpec,
};

pub const CHECK_IDS: [&str; 10] = [
    "star_offset",
    "self_localization",
    "offset_le_local",
    "sparse_identity",
    "sparse_bound",
    "mgf_bound",
    "tail_form",
    "aggregation_rate",
    "mirror_descent",
    "duality",
];

/// Sizes and tolerances of every check. The defaults are the acceptance sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Subset of [`CHECK_IDS`] to run; all when empty.
    pub checks: Vec<String>,

    pub star_instances: usize,
    /// Modulus used by the star check (raise it for a negative control).
    pub star_gamma: f64,
    pub star_max_m: usize,
    pub star_max_n: usize,
    pub star_max_support: usize,
    pub exact_tol: f64,

    pub self_localization_setups: usize,
    pub self_localization_max_n: usize,

    pub local_classes: usize,
    pub local_replicates: usize,
    pub local_n: usize,
    pub local_min_pass: usize,

    pub sparse_identity_cases: usize,
    pub sparse_identity_tol: f64,
    pub sparse_d: Vec<usize>,
    pub sparse_k: Vec<usize>,
    pub sparse_gammas: Vec<f64>,
    pub sparse_n: usize,
    pub sparse_sigma_draws: usize,
    pub sparse_scaling_draws: usize,
    /// Frozen bound on `estimate / (k log(ed/k) / (gamma n))` across the sweep.
    pub sparse_constant: f64,

    pub mgf_setups: usize,
    pub mgf_replicates: usize,
    pub mgf_lambda_points: usize,
    pub mgf_n: usize,
    pub mgf_confidence: f64,
    pub tail_deltas: Vec<f64>,

    pub rate_ladder: LadderSpec,
    pub rate_n_grid: Vec<usize>,
    pub rate_replicates: usize,
    pub rate_delta: f64,
    pub rate_slope_band: (f64, f64),

    pub mirror_instances: usize,
    pub mirror_epsilon: f64,
    pub mirror_step: f64,
    /// Allowed Bregman overshoot in units of the step size.
    pub mirror_slack_factor: f64,
    pub mirror_analytic_step: f64,

    pub duality_instances: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            checks: Vec::new(),
            star_instances: 1000,
            star_gamma: 1.0 / 18.0,
            star_max_m: 10,
            star_max_n: 50,
            star_max_support: 16,
            exact_tol: 1e-10,
            self_localization_setups: 10_000,
            self_localization_max_n: 40,
            local_classes: 50,
            local_replicates: 10_000,
            local_n: 30,
            local_min_pass: 48,
            sparse_identity_cases: 100,
            sparse_identity_tol: 1e-8,
            sparse_d: vec![8, 16, 32],
            sparse_k: vec![1, 2, 4],
            sparse_gammas: vec![0.5, 1.0, 2.0],
            sparse_n: 64,
            sparse_sigma_draws: 1000,
            sparse_scaling_draws: 100,
            sparse_constant: 0.35,
            mgf_setups: 10,
            mgf_replicates: 100_000,
            mgf_lambda_points: 8,
            mgf_n: 20,
            mgf_confidence: 0.95,
            tail_deltas: vec![0.1, 0.01],
            rate_ladder: LadderSpec::default(),
            rate_n_grid: vec![64, 128, 256, 512, 1024, 2048, 4096],
            rate_replicates: 1000,
            rate_delta: 0.05,
            rate_slope_band: (-1.25, -0.80),
            mirror_instances: 100,
            mirror_epsilon: 0.05,
            mirror_step: 1e-3,
            mirror_slack_factor: 4.0,
            mirror_analytic_step: 1e-4,
            duality_instances: 100,
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(bad) = self.checks.iter().find(|c| !CHECK_IDS.contains(&c.as_str())) {
            bail!("unknown check '{bad}'; known checks: {}", CHECK_IDS.join(", "));
        }
        if self.star_max_m == 0 || self.star_max_n == 0 || self.star_max_support < 2 {
            bail!("star instance sizes must be positive");
        }
        if self.rate_n_grid.len() < 2 || self.rate_n_grid.windows(2).any(|w| w[0] >= w[1]) {
            bail!("rate_n_grid needs at least two increasing sizes");
        }
        Ok(())
    }

    pub fn selected(&self) -> Vec<&'static str> {
        CHECK_IDS.iter().copied().filter(|id| self.checks.is_empty() || self.checks.iter().any(|c| c == id)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check_id: String,
    pub property: String,
    pub passed: bool,
    /// The headline number of the check (see `detail` for its meaning).
    pub statistic: f64,
    pub detail: String,
}

fn outcome(id: &str, property: &str, passed: bool, statistic: f64, detail: String) -> CheckOutcome {
    CheckOutcome { check_id: id.into(), property: property.into(), passed, statistic, detail }
}

fn stream(seed: u64, id: &str, i: usize) -> StreamRng {
    rng::stream(seed, &format!("check/{id}"), i as u64)
}

pub fn run_check(id: &str, cfg: &VerifyConfig, seed: u64) -> Result<CheckOutcome> {
    match id {
        "star_offset" => star_offset(cfg, seed),
        "self_localization" => self_localization(cfg, seed),
        "offset_le_local" => offset_le_local(cfg, seed),
        "sparse_identity" => sparse_identity(cfg, seed),
        "sparse_bound" => sparse_bound(cfg, seed),
        "mgf_bound" => mgf_bound(cfg, seed),
        "tail_form" => tail_form(cfg, seed),
        "aggregation_rate" => aggregation_rate(cfg, seed),
        "mirror_descent" => mirror_check(cfg, seed),
        "duality" => duality(cfg, seed),
        other => bail!("unknown check '{other}'"),
    }
}

fn min(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::INFINITY, f64::min)
}

fn max(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Random squared-loss aggregation problem with `b = 1`.
fn aggregation_problem(cfg: &VerifyConfig, rng: &mut StreamRng) -> Result<(offset_risk_core::model::Instance, Sample)> {
    let s = rng.random_range(2..=cfg.star_max_support);
    let m = rng.random_range(1..=cfg.star_max_m);
    let n = rng.random_range(1..=cfg.star_max_n);
    let inst = random_instance(rng, s, m, 1.0)?;
    let sample = Sample::from_indices(inst.dist.sampler().draw(n, rng))?;
    Ok((inst, sample))
}

fn star_offset(cfg: &VerifyConfig, seed: u64) -> Result<CheckOutcome> {
    let loss = LossSpec::squared(1.0)?;
    let margins: Vec<f64> = (0..cfg.star_instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, "star_offset", i);
            let (inst, sample) = aggregation_problem(cfg, &mut rng)?;
            let st = star(&sample, &inst.dist, &loss, &inst.dict)?;
            let f = inst.dict.evaluate(&st.weights)?;
            let per_g = inst
                .dict
                .rows()
                .iter()
                .map(|g| Ok(check_offset(&sample, &inst.dist, &loss, &f, g, cfg.star_gamma, 0.0)?.margin))
                .collect::<Result<Vec<f64>>>()?;
            Ok(min(per_g))
        })
        .collect::<Result<_>>()?;
    let failures = margins.iter().filter(|m| **m < -cfg.exact_tol).count();
    let worst = min(margins.iter().copied());
    Ok(outcome(
        "star_offset",
        "star estimator satisfies the offset inequality against every dictionary element",
        failures == 0,
        worst,
        format!("{} instances, gamma = {}, failures = {failures}, min margin = {worst:e}", cfg.star_instances, cfg.star_gamma),
    ))
}

fn self_localization(cfg: &VerifyConfig, seed: u64) -> Result<CheckOutcome> {
    let margins: Vec<f64> = (0..cfg.self_localization_setups)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, "self_localization", i);
            let setup = random_multiplier_setup(&mut rng)?;
            let n = rng.random_range(1..=cfg.self_localization_max_n);
            let sample = Sample::from_indices(setup.sampler()?.draw(n, &mut rng))?;
            Ok(SelfLocalization::from(&multiplier_sup(&setup, &sample)?).margin)
        })
        .collect::<Result<_>>()?;
    let failures = margins.iter().filter(|m| **m < -cfg.exact_tol).count();
    let worst = min(margins.iter().copied());
    Ok(outcome(
        "self_localization",
        "quadratic part at the maximizer of the multiplier process is bounded by its supremum",
        failures == 0,
        worst,
        format!("{} setups, failures = {failures}, min margin = {worst:e}", cfg.self_localization_setups),
    ))
}

fn offset_le_local(cfg: &VerifyConfig, seed: u64) -> Result<CheckOutcome> {
    let rows: Vec<(f64, f64, f64)> = (0..cfg.local_classes)
        .map(|i| {
            let mut rng = stream(seed, "offset_le_local", i);
            let s = rng.random_range(4..=16);
            let dist = random_distribution(&mut rng, s)?;
            let size = rng.random_range(2..=8);
            let class = random_star_class(&mut rng, size, s, 1.0)?;
            let gamma = rng.random_range(0.2..2.0);
            let mc_seed = rng.random::<u64>();
            let off = offset_complexity_mc(&dist, &class, gamma, cfg.local_n, cfg.local_replicates, mc_seed)?;
            let loc = local_complexity_fixed_point(&dist, &class, gamma, cfg.local_n, cfg.local_replicates, DEFAULT_R_TOL, mc_seed)?;
            Ok((off.value, loc.value, off.combined_se(&loc)))
        })
        .collect::<Result<_>>()?;
    let passes = rows.iter().filter(|(o, l, se)| o <= &(l + 3.0 * se)).count();
    let worst = max(rows.iter().map(|(o, l, se)| (o - l) / se.max(f64::MIN_POSITIVE)));
    Ok(outcome(
        "offset_le_local",
        "offset complexity is at most the local complexity fixed point on star-shaped classes",
        passes >= cfg.local_min_pass,
        passes as f64,
        format!(
            "{passes}/{} classes within 3 combined SE (required {}), worst (offset - local)/SE = {worst:.3}",
            cfg.local_classes, cfg.local_min_pass
        ),
    ))
}

fn gaussian(rng: &mut StreamRng, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
}

fn signs(rng: &mut StreamRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// `sup_w <Phi_S w, sigma> - gamma |Phi_S w|^2`, evaluated at the maximizer
/// `w = (2 gamma)^{-1} G^{-1} Phi_S^T sigma` from a Cholesky solve.
fn dense_subset_value(cols: &DMatrix<f64>, sigma: &DVector<f64>, gamma: f64) -> Option<f64> {
    let gram = cols.transpose() * cols;
    let c = cols.transpose() * sigma;
    let w = gram.cholesky()?.solve(&c) / (2.0 * gamma);
    let fitted = cols * &w;
    Some(fitted.dot(sigma) - gamma * fitted.norm_squared())
}

fn sparse_identity(cfg: &VerifyConfig, seed: u64) -> Result<CheckOutcome> {
    let tol = cfg.sparse_identity_tol;
    let cases: Vec<(f64, f64, f64, bool)> = (0..cfg.sparse_identity_cases)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, "sparse_identity", i);
            let n = rng.random_range(8..=20);
            let d = rng.random_range(2..=8);
            let size = rng.random_range(1..=d.min(4));
            let gamma = rng.random_range(0.25..4.0);
            let phi = gaussian(&mut rng, n, d);
            let sigma = signs(&mut rng, n);
            let mut subset = sample_indices(&mut rng, d, size).into_vec();
            subset.sort_unstable();

            let h = hat_matrix(&phi, &subset)?;
            let s = DVector::from_column_slice(&sigma);
            let hat_value = s.dot(&(&h * &s)) / (4.0 * gamma);
            let cols = phi.select_columns(&subset);
            let Some(dense) = dense_subset_value(&cols, &s, gamma) else {
                bail!("case {i}: Gram matrix is not positive definite");
            };
            let value_err = (hat_value - dense).abs() / dense.abs().max(1.0);

            // the full sparse oracle against the best dense subset value
            let spec = SparseClassSpec::new(phi.clone(), size, gamma)?;
            let oracle = SparseOracle::new(&spec)?;
            let best_dense = oracle
                .subsets()
                .iter()
                .map(|sub| dense_subset_value(&phi.select_columns(sub), &s, gamma).unwrap_or(f64::NAN))
                .fold(0.0, f64::max);
            let oracle_err = (oracle.value(&sigma)? - best_dense).abs() / best_dense.abs().max(1.0);

            let sym = (&h - h.transpose()).amax();
            let idem = (&h * &h - &h).amax();
            let eig_ok = h.clone().symmetric_eigen().eigenvalues.iter().all(|e| e.abs() <= tol || (e - 1.0).abs() <= tol);
            let frob_ok = h.norm_squared() <= size as f64 + tol;
            Ok((value_err.max(oracle_err), sym, idem, eig_ok && frob_ok))
        })
        .collect::<Result<_>>()?;
    let worst_value = max(cases.iter().map(|c| c.0));
    let worst_sym = max(cases.iter().map(|c| c.1));
    let worst_idem = max(cases.iter().map(|c| c.2));
    let spectral = cases.iter().filter(|c| !c.3).count();
    Ok(outcome(
        "sparse_identity",
        "hat-matrix value of the sparse offset supremum matches direct quadratic maximization",
        worst_value <= tol && worst_sym <= tol && worst_idem <= tol && spectral == 0,
        worst_value,
        format!(
            "{} cases, max relative value error = {worst_value:e}, max asymmetry = {worst_sym:e}, \
             max idempotency error = {worst_idem:e}, spectrum/Frobenius failures = {spectral}",
            cfg.sparse_identity_cases
        ),
    ))
}

fn sparse_bound(cfg: &VerifyConfig, seed: u64) -> Result<CheckOutcome> {
    let mut worst_ratio = 0.0f64;
    let mut worst_scaling = 0.0f64;
    let mut cells = Vec::new();
    for (di, &d) in cfg.sparse_d.iter().enumerate() {
        let mut rng = stream(seed, "sparse_bound", di);
        let phi = gaussian(&mut rng, cfg.sparse_n, d);
        let sigmas: Vec<Vec<f64>> = (0..cfg.sparse_scaling_draws).map(|_| signs(&mut rng, cfg.sparse_n)).collect();
        for &k in cfg.sparse_k.iter().filter(|&&k| k <= d) {
            let base = SparseOracle::new(&SparseClassSpec::new(phi.clone(), k, 1.0)?)?;
            let base_values: Vec<f64> = sigmas.iter().map(|s| base.value(s)).collect::<offset_risk_core::Result<_>>()?;
            for &gamma in &cfg.sparse_gammas {
                let spec = SparseClassSpec::new(phi.clone(), k, gamma)?;
                let report = sparse_offset_bound_check(&spec, cfg.sparse_sigma_draws, seed ^ (d as u64) << 8 ^ k as u64)?;
                worst_ratio = worst_ratio.max(report.ratio);
                let oracle = SparseOracle::new(&spec)?;
                for (s, v1) in sigmas.iter().zip(&base_values) {
                    let v = oracle.value(s)?;
                    worst_scaling = worst_scaling.max((v * gamma - v1).abs() / v1.abs().max(1.0));
                }
                cells.push(format!("d={d} k={k} gamma={gamma}: ratio={:.4}", report.ratio));
            }
        }
    }
    let passed = worst_ratio <= cfg.sparse_constant && worst_scaling <= 1e-10;
    Ok(outcome(
        "sparse_bound",
        "sparse offset complexity is bounded by a fixed multiple of k log(ed/k) / (gamma n)",
        passed,
        worst_ratio,
        format!(
            "max ratio = {worst_ratio:.4} (frozen constant {}), max 1/gamma scaling error = {worst_scaling:e}; {}",
            cfg.sparse_constant,
            cells.join("; ")
        ),
    ))
}

fn mgf_setups(cfg: &VerifyConfig, seed: u64) -> Result<Vec<offset_risk_core::concentration::MultiplierSetup>> {
    (0..cfg.mgf_setups).map(|i| random_multiplier_setup(&mut stream(seed, "mgf", i))).collect()
}

fn mgf_bound(cfg: &VerifyConfig, seed: u64) -> Result<CheckOutcome> {
    let mut violations = 0;
    let mut failures = 0;
    let mut worst_gap = f64::NEG_INFINITY;
    let mut lines = Vec::new();
    for (i, setup) in mgf_setups(cfg, seed)?.iter().enumerate() {
        let lambdas = lambda_grid(setup, cfg.mgf_lambda_points);
        let report = mgf_verify(setup, cfg.mgf_n, cfg.mgf_replicates, &lambdas, cfg.mgf_confidence, seed.wrapping_add(i as u64))?;
        violations += report.violations.len();
        failures += report.self_localization_failures;
        let gap = max(report.points.iter().map(|p| p.ci_lower - p.bound));
        worst_gap = worst_gap.max(gap);
        lines.push(format!("setup {i}: eta={:.4} EU={:.5} violations={}", report.eta, report.eu_hat, report.violations.len()));
    }
    Ok(outcome(
        "mgf_bound",
        "log-MGF of the centered multiplier supremum stays below its sub-gamma bound",
        violations == 0 && failures == 0,
        violations as f64,
        format!(
            "violations = {violations}, self-localization failures = {failures}, max (CI lower - bound) = {worst_gap:e}; {}",
            lines.join("; ")
        ),
    ))
}

fn tail_form(cfg: &VerifyConfig, seed: u64) -> Result<CheckOutcome> {
    let mut worst = f64::NEG_INFINITY;
    let mut failed = 0;
    let mut lines = Vec::new();
    for (i, setup) in mgf_setups(cfg, seed)?.iter().enumerate() {
        let report = tail_verify(setup, cfg.mgf_n, cfg.mgf_replicates, &cfg.tail_deltas, seed.wrapping_add(i as u64))?;
        failed += report.rows.iter().filter(|r| !r.holds).count();
        worst = worst.max(max(report.rows.iter().map(|r| r.frequency - r.allowed)));
        let freqs: Vec<String> = report.rows.iter().map(|r| format!("{}:{}", r.delta, r.frequency)).collect();
        lines.push(format!("setup {i}: {}", freqs.join(",")));
    }
    Ok(outcome(
        "tail_form",
        "exceedance of 2 E U + 1.5 eta log(1/delta) happens with frequency at most delta",
        failed == 0,
        worst,
        format!("failed rows = {failed}, max (frequency - allowed) = {worst:e}; {}", lines.join("; ")),
    ))
}

fn aggregation_rate(cfg: &VerifyConfig, seed: u64) -> Result<CheckOutcome> {
    let inst = truth_ladder(&cfg.rate_ladder)?;
    let params = AggregateParams {
        estimators: vec![Estimator::Star, Estimator::Midpoint],
        n_grid: cfg.rate_n_grid.clone(),
        replicates: cfg.rate_replicates,
        delta: cfg.rate_delta,
        c1: offset_risk_core::estimators::DEFAULT_C1,
        seed,
    };
    let res = run_aggregate(&inst, &params)?;
    let (lo, hi) = cfg.rate_slope_band;
    let mut passed = true;
    let mut worst = f64::NEG_INFINITY;
    let mut lines = Vec::new();
    for &e in &params.estimators {
        match res.fit_for(e) {
            Some(fit) => {
                passed &= (lo..=hi).contains(&fit.slope);
                worst = worst.max(fit.slope);
                lines.push(format!("{}: slope={:.4} r2={:.4}", e.name(), fit.slope, fit.r_squared));
            }
            None => {
                passed = false;
                lines.push(format!("{}: no fit (nonpositive quantile)", e.name()));
            }
        }
    }
    Ok(outcome(
        "aggregation_rate",
        "upper quantile of the excess risk of star and midpoint decays like 1/n",
        passed,
        worst,
        format!("band [{lo}, {hi}]; {}", lines.join("; ")),
    ))
}

fn mirror_check(cfg: &VerifyConfig, seed: u64) -> Result<CheckOutcome> {
    let loss = LossSpec::squared(1.0)?;
    let (eps, step) = (cfg.mirror_epsilon, cfg.mirror_step);
    // (time bound ok, Bregman ok, offset ok, overshoot / step)
    let runs: Vec<(bool, bool, bool, f64)> = (0..cfg.mirror_instances)
        .into_par_iter()
        .flat_map_iter(|i| {
            [MirrorMap::Euclidean, MirrorMap::NegativeEntropy].into_iter().map(move |map| (i, map))
        })
        .map(|(i, map)| {
            let mut rng = stream(seed, "mirror_descent", i);
            let (s, d) = (rng.random_range(2..=8), rng.random_range(1..=4));
            let dist = random_linear(&mut rng, s, d)?;
            let n = rng.random_range(5..=50);
            let sample = draw_sample(&dist, n, rng.random())?;
            let (w_star, w0): (Vec<f64>, Vec<f64>) = match map {
                MirrorMap::Euclidean => (
                    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
                ),
                MirrorMap::NegativeEntropy => (
                    (0..d).map(|_| rng.random_range(0.1..1.5)).collect(),
                    (0..d).map(|_| rng.random_range(0.1..1.5)).collect(),
                ),
            };
            let tr = mirror_descent(&sample, &dist, &loss, &w_star, &w0, map, eps, step, None)?;
            let Some(t_star) = tr.t_star else {
                return Ok((false, false, false, f64::INFINITY));
            };
            let time_ok = t_star <= tr.stopping_time_bound() + step;
            let overshoot = tr.bregman_at_stop.unwrap_or(f64::INFINITY) - tr.bregman_initial;
            let bregman_ok = overshoot <= cfg.mirror_slack_factor * step;
            let f_stop = linear_predictions(&dist, tr.stopped_weights().expect("stopped"))?;
            let f_star = linear_predictions(&dist, &w_star)?;
            let offset_ok = check_offset(&sample, &dist, &loss, &f_stop, &f_star, 0.5 * loss.strong_convexity(), eps)?.holds;
            Ok((time_ok, bregman_ok, offset_ok, overshoot / step))
        })
        .collect::<Result<_>>()?;
    let failures = runs.iter().filter(|r| !(r.0 && r.1 && r.2)).count();
    let worst_overshoot = max(runs.iter().map(|r| r.3));

    // w_t = exp(-2t) for f_w(x) = w x on x = 1, y = 0, from w0 = 1 to w* = 0
    let h = cfg.mirror_analytic_step;
    let dist = offset_risk_core::model::DiscreteDistribution::new(
        vec![offset_risk_core::model::Atom { x: vec![1.0], y: 0.0 }],
        vec![1.0],
        1.0,
    )?;
    let sample = Sample::new(vec![0], &dist)?;
    let analytic_eps = 0.01;
    let tr = mirror_descent(&sample, &dist, &loss, &[0.0], &[1.0], MirrorMap::Euclidean, analytic_eps, h, None)?;
    let path_err = max(tr.w_path.iter().map(|(t, w)| (w[0] - (-2.0 * t).exp()).abs()));
    let t_exact = (2.0f64 / analytic_eps).ln() / 4.0;
    let t_err = tr.t_star.map_or(f64::INFINITY, |t| (t - t_exact).abs());
    let analytic_ok = path_err <= h && t_err <= 2.0 * h * (1.0 + t_exact) && t_exact <= 2.0 * 0.5 / analytic_eps;

    Ok(outcome(
        "mirror_descent",
        "early-stopped mirror descent reaches the offset inequality inside the initial Bregman ball",
        failures == 0 && analytic_ok,
        failures as f64,
        format!(
            "{} runs, failures = {failures}, max Bregman overshoot = {worst_overshoot:.4} steps (allowed {}); \
             analytic path error = {path_err:e}, stopping time error = {t_err:e}",
            runs.len(),
            cfg.mirror_slack_factor
        ),
    ))
}

fn duality(cfg: &VerifyConfig, seed: u64) -> Result<CheckOutcome> {
    let loss = LossSpec::squared(1.0)?;
    let rows: Vec<(f64, usize)> = (0..cfg.duality_instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, "duality", i);
            let (inst, sample) = aggregation_problem(cfg, &mut rng)?;
            let gamma = rng.random_range(0.05..3.0);
            let e = erm(&sample, &inst.dist, &loss, &inst.dict)?;
            let pn = inst.dist.empirical(&sample)?;
            let bern = bernstein_check(&pn, &loss, inst.dict.rows(), inst.dict.row(e), gamma)?;
            let mut worst = 0.0f64;
            let mut disagreements = 0;
            for (entry, f) in bern.entries.iter().zip(inst.dict.rows()) {
                let off = check_offset(&sample, &inst.dist, &loss, inst.dict.row(e), f, gamma, 0.0)?;
                worst = worst.max((gamma * entry.margin - off.margin).abs());
                if off.margin.abs() > MARGIN_TOL && (entry.margin >= 0.0) != (off.margin >= 0.0) {
                    disagreements += 1;
                }
            }
            Ok((worst, disagreements))
        })
        .collect::<Result<_>>()?;
    let worst = max(rows.iter().map(|r| r.0));
    let disagreements: usize = rows.iter().map(|r| r.1).sum();
    Ok(outcome(
        "duality",
        "empirical Bernstein condition at the ERM equals the offset inequality for the ERM",
        worst <= 1e-12 && disagreements == 0,
        worst,
        format!("{} instances, max |gamma * bernstein margin - offset margin| = {worst:e}, verdict disagreements = {disagreements}", cfg.duality_instances),
    ))
}
