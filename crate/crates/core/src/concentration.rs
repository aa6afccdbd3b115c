//! The shifted multiplier process
//! `U = sup_{h in star(H)} sum_i (zeta_i h(X_i) - E[zeta h]) - gamma sum_i (h(X_i)^2 + E h^2)`,
//! its self-localization property and Monte-Carlo checks of its moment
//! generating function and tail.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complexity::{star_hull_sup, FiniteClassSpec};
use crate::error::{Error, Result};
use crate::model::{check_len, AtomSampler, Sample};
use crate::rng;
use crate::stats::{compensated_sum, mean_and_se, quantile};

/// Number of bootstrap resamples behind each log-MGF interval.
pub const BOOTSTRAP_RESAMPLES: usize = 1000;
/// Minimum replicate count accepted by [`mgf_verify`].
pub const MIN_MGF_REPLICATES: usize = 1000;
/// Tolerance on the self-localization inequality.
pub const SELF_LOCALIZATION_TOL: f64 = 1e-10;

/// One atom of the joint law of `(X, zeta)`: a feature id indexing the
/// class functions and a multiplier value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointAtom {
    pub feature: usize,
    pub zeta: f64,
}

#[derive(Debug, Clone)]
pub struct MultiplierSetup {
    atoms: Vec<JointAtom>,
    probs: Vec<f64>,
    class: FiniteClassSpec,
    gamma: f64,
    kappa: f64,
    sigma_bound: f64,
    eta: f64,
    zeta_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl MultiplierSetup {
    pub fn new(atoms: Vec<JointAtom>, probs: Vec<f64>, class: FiniteClassSpec, gamma: f64) -> Result<Self> {
        check_len(atoms.len(), probs.len())?;
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("joint law has no atoms".into()));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution("joint probabilities must be nonnegative and sum to 1".into()));
        }
        if !class.star_hull() {
            return Err(Error::InvalidParameter("multiplier process needs a star-shaped class".into()));
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma = {gamma} must be positive")));
        }
        let support = class.support_size();
        for a in &atoms {
            if a.feature >= support {
                return Err(Error::IndexOutOfRange { index: a.feature, len: support });
            }
            if !a.zeta.is_finite() {
                return Err(Error::InvalidDistribution("multiplier values must be finite".into()));
            }
        }
        let kappa = class.base().iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let sigma_bound = atoms.iter().fold(0.0f64, |m, a| m.max(a.zeta.abs()));
        let eta = 8.0 * (sigma_bound * sigma_bound / gamma + gamma * kappa * kappa);
        let expect = |f: &dyn Fn(&JointAtom) -> f64| compensated_sum(atoms.iter().zip(&probs).map(|(a, p)| p * f(a)));
        let zeta_moment = class.base().iter().map(|h| expect(&|a| a.zeta * h[a.feature])).collect();
        let second_moment = class.base().iter().map(|h| expect(&|a| h[a.feature] * h[a.feature])).collect();
        Ok(Self { atoms, probs, class, gamma, kappa, sigma_bound, eta, zeta_moment, second_moment })
    }

    /// Product law: `X ~ p_x` and an independent sign `zeta = +-scale`.
    /// Atom `2x` carries `+scale`, atom `2x + 1` carries `-scale`.
    pub fn rademacher_product(p_x: &[f64], scale: f64, class: FiniteClassSpec, gamma: f64) -> Result<Self> {
        let atoms = (0..p_x.len())
            .flat_map(|x| [JointAtom { feature: x, zeta: scale }, JointAtom { feature: x, zeta: -scale }])
            .collect();
        let probs = p_x.iter().flat_map(|p| [0.5 * p, 0.5 * p]).collect();
        Self::new(atoms, probs, class, gamma)
    }

    pub fn atoms(&self) -> &[JointAtom] {
        &self.atoms
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn class(&self) -> &FiniteClassSpec {
        &self.class
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `max_h sup |h|` over the support.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `max |zeta|` over the support.
    pub fn sigma_bound(&self) -> f64 {
        self.sigma_bound
    }

    /// `8 (sigma^2 / gamma + gamma kappa^2)`.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `1 / (2 eta)`, or `1` when `eta = 0`.
    pub fn lambda_cap(&self) -> f64 {
        if self.eta > 0.0 {
            0.5 / self.eta
        } else {
            1.0
        }
    }

    pub fn sampler(&self) -> Result<AtomSampler> {
        AtomSampler::new(&self.probs)
    }
}

/// `U` on one sample together with the maximizing `(h, lambda)` and the
/// linear and quadratic parts evaluated at `h~ = lambda h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSup {
    pub value: f64,
    pub index: usize,
    pub lambda: f64,
    pub a_tilde: f64,
    pub b_tilde: f64,
}

fn sup_unchecked(setup: &MultiplierSetup, ids: &[usize]) -> MultiplierSup {
    let n = ids.len() as f64;
    let base = setup.class.base();
    let mut a = Vec::with_capacity(base.len());
    let mut b = Vec::with_capacity(base.len());
    for (j, h) in base.iter().enumerate() {
        let mut lin = 0.0;
        let mut quad = 0.0;
        for &id in ids {
            let atom = setup.atoms[id];
            let v = h[atom.feature];
            lin += atom.zeta * v;
            quad += v * v;
        }
        a.push(lin - n * setup.zeta_moment[j]);
        b.push(setup.gamma * (quad + n * setup.second_moment[j]));
    }
    let best = star_hull_sup(&a, &b).expect("quadratic parts are nonnegative");
    let l = best.lambda;
    MultiplierSup {
        value: best.value,
        index: best.index,
        lambda: l,
        a_tilde: l * a[best.index],
        b_tilde: l * l * b[best.index],
    }
}

/// Exact `U(S_n)` for a sample of joint-atom ids.
pub fn multiplier_sup(setup: &MultiplierSetup, sample: &Sample) -> Result<MultiplierSup> {
    sample.check_support(setup.atoms.len())?;
    Ok(sup_unchecked(setup, sample.indices()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfLocalization {
    pub holds: bool,
    /// `U - B(h~)`.
    pub margin: f64,
}

impl From<&MultiplierSup> for SelfLocalization {
    fn from(s: &MultiplierSup) -> Self {
        let margin = s.value - s.b_tilde;
        Self { holds: margin >= -SELF_LOCALIZATION_TOL, margin }
    }
}

/// Checks `gamma sum_i (E h~^2 + h~(X_i)^2) <= U` at the maximizer.
pub fn self_localization_check(setup: &MultiplierSetup, sample: &Sample) -> Result<SelfLocalization> {
    Ok(SelfLocalization::from(&multiplier_sup(setup, sample)?))
}

/// `U` on `replicates` independent samples of size `n`.
pub fn simulate(setup: &MultiplierSetup, n: usize, replicates: usize, seed: u64) -> Result<Vec<MultiplierSup>> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let sampler = setup.sampler()?;
    Ok((0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, "multiplier", r);
            sup_unchecked(setup, &sampler.draw(n, &mut rng))
        })
        .collect())
}

/// `points` equally spaced values on `(0, 1 / (2 eta)]`.
pub fn lambda_grid(setup: &MultiplierSetup, points: usize) -> Vec<f64> {
    let cap = setup.lambda_cap();
    (1..=points).map(|i| cap * i as f64 / points as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgfPoint {
    pub lambda: f64,
    pub log_mgf: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    /// `lambda^2 eta E U / (2 (1 - eta lambda))`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub eu_hat: f64,
    pub eu_se: f64,
    pub eta: f64,
    pub replicates: usize,
    pub confidence: f64,
    pub points: Vec<MgfPoint>,
    /// Values of `lambda` whose interval lies entirely above the bound.
    pub violations: Vec<f64>,
    pub self_localization_failures: usize,
}

impl ConcentrationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.self_localization_failures == 0
    }
}

/// Log-MGF bound for the centered supremum.
pub fn mgf_bound(eta: f64, eu: f64, lambda: f64) -> f64 {
    lambda * lambda * eta * eu / (2.0 * (1.0 - eta * lambda))
}

fn check_lambdas(setup: &MultiplierSetup, lambdas: &[f64]) -> Result<()> {
    let cap = setup.lambda_cap();
    for &l in lambdas {
        if setup.eta > 0.0 && l * setup.eta >= 1.0 {
            return Err(Error::InvalidParameter(format!("lambda = {l} is at or beyond the pole 1/eta = {}", 1.0 / setup.eta)));
        }
        if !(l > 0.0) || l > cap * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!("lambda = {l} must lie in (0, {cap}]")));
        }
    }
    Ok(())
}

/// Compares the empirical log-MGF of `U - E U` with its bound on a grid of
/// `lambda`, using percentile bootstrap intervals at level `confidence`.
pub fn mgf_verify(
    setup: &MultiplierSetup,
    n: usize,
    replicates: usize,
    lambdas: &[f64],
    confidence: f64,
    seed: u64,
) -> Result<ConcentrationReport> {
    if replicates < MIN_MGF_REPLICATES {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_MGF_REPLICATES} replicates, got {replicates}"
        )));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidParameter(format!("confidence = {confidence} must lie in (0, 1)")));
    }
    check_lambdas(setup, lambdas)?;
    let draws = simulate(setup, n, replicates, seed)?;
    let self_localization_failures = draws.iter().filter(|d| !SelfLocalization::from(*d).holds).count();
    let u: Vec<f64> = draws.iter().map(|d| d.value).collect();
    let (eu_hat, eu_se) = mean_and_se(&u);
    let len = u.len() as f64;

    // e[l][i] = expm1(lambda_l (U_i - mean)); a resample with mean m* has
    // log-MGF ln(1 + mean e*) - lambda (m* - mean).
    let shifted: Vec<Vec<f64>> =
        lambdas.iter().map(|&l| u.iter().map(|v| (l * (v - eu_hat)).exp_m1()).collect()).collect();
    let boot: Vec<Vec<f64>> = (0..BOOTSTRAP_RESAMPLES as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::stream(seed, "bootstrap", b);
            let idx: Vec<usize> = (0..u.len()).map(|_| rng.random_range(0..u.len())).collect();
            let m_star = compensated_sum(idx.iter().map(|&i| u[i])) / len;
            lambdas
                .iter()
                .zip(&shifted)
                .map(|(l, e)| (compensated_sum(idx.iter().map(|&i| e[i])) / len).ln_1p() - l * (m_star - eu_hat))
                .collect()
        })
        .collect();

    let alpha = 1.0 - confidence;
    let mut points = Vec::with_capacity(lambdas.len());
    let mut violations = Vec::new();
    for (j, (&lambda, e)) in lambdas.iter().zip(&shifted).enumerate() {
        let column: Vec<f64> = boot.iter().map(|row| row[j]).collect();
        let point = MgfPoint {
            lambda,
            log_mgf: (compensated_sum(e.iter().copied()) / len).ln_1p(),
            ci_lower: quantile(&column, alpha / 2.0),
            ci_upper: quantile(&column, 1.0 - alpha / 2.0),
            bound: mgf_bound(setup.eta, eu_hat, lambda),
        };
        if point.ci_lower > point.bound {
            violations.push(lambda);
        }
        points.push(point);
    }
    Ok(ConcentrationReport {
        eu_hat,
        eu_se,
        eta: setup.eta,
        replicates,
        confidence,
        points,
        violations,
        self_localization_failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub delta: f64,
    /// `2 E U + 1.5 eta ln(1 / delta)`.
    pub threshold: f64,
    pub frequency: f64,
    /// `delta + 3 sqrt(delta (1 - delta) / R)`.
    pub allowed: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub eu_hat: f64,
    pub eta: f64,
    pub replicates: usize,
    pub rows: Vec<TailRow>,
}

impl TailReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }
}

/// Empirical frequency of `U > 2 E U + 1.5 eta ln(1 / delta)` for each `delta`.
pub fn tail_verify(setup: &MultiplierSetup, n: usize, replicates: usize, deltas: &[f64], seed: u64) -> Result<TailReport> {
    if replicates == 0 {
        return Err(Error::InvalidParameter("need at least one replicate".into()));
    }
    if let Some(d) = deltas.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
        return Err(Error::InvalidParameter(format!("delta = {d} must lie in (0, 1]")));
    }
    let u: Vec<f64> = simulate(setup, n, replicates, seed)?.iter().map(|d| d.value).collect();
    let eu_hat = mean_and_se(&u).0;
    let r = replicates as f64;
    let rows = deltas
        .iter()
        .map(|&delta| {
            let threshold = 2.0 * eu_hat + 1.5 * setup.eta * (1.0 / delta).ln();
            let frequency = u.iter().filter(|&&v| v > threshold).count() as f64 / r;
            let allowed = delta + 3.0 * (delta * (1.0 - delta) / r).sqrt();
            TailRow { delta, threshold, frequency, allowed, holds: frequency <= allowed }
        })
        .collect();
    Ok(TailReport { eu_hat, eta: setup.eta, replicates, rows })
}
