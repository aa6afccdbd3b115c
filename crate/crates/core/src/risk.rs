//! Exact population and empirical risk functionals over atom-indexed
//! predictors, the population minimizer `g*` of a dictionary, excess risk,
//! and the Bernstein condition as a checkable predicate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_len, Dictionary, DiscreteDistribution, LossSpec, Sample};

/// Slack under which a nonpositive margin still counts as satisfied.
pub const MARGIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskKind {
    Population,
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskValue {
    pub value: f64,
    pub kind: RiskKind,
}

/// `R(f) = sum_a p_a l(f(x_a), y_a)`.
pub fn population_risk(dist: &DiscreteDistribution, loss: &LossSpec, f: &[f64]) -> Result<RiskValue> {
    check_len(dist.support_size(), f.len())?;
    let value = dist
        .atoms()
        .iter()
        .zip(dist.probs())
        .zip(f)
        .map(|((atom, p), fx)| p * loss.value(*fx, atom.y))
        .sum();
    Ok(RiskValue { value, kind: RiskKind::Population })
}

/// `R_n(f) = n^{-1} sum_i l(f(X_i), Y_i)`.
pub fn empirical_risk(
    sample: &Sample,
    dist: &DiscreteDistribution,
    loss: &LossSpec,
    f: &[f64],
) -> Result<RiskValue> {
    sample.check_against(dist)?;
    check_len(dist.support_size(), f.len())?;
    Ok(RiskValue { value: empirical_risk_unchecked(sample.indices(), dist, loss, f), kind: RiskKind::Empirical })
}

pub(crate) fn empirical_risk_unchecked(
    indices: &[usize],
    dist: &DiscreteDistribution,
    loss: &LossSpec,
    f: &[f64],
) -> f64 {
    let atoms = dist.atoms();
    let total: f64 = indices.iter().map(|&i| loss.value(f[i], atoms[i].y)).sum();
    total / indices.len() as f64
}

/// The dictionary row of least population risk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub gstar_index: usize,
    pub gstar_risk: f64,
}

/// Argmin of the population risk over the dictionary rows; ties go to the
/// lowest index.
pub fn population_minimizer(
    dist: &DiscreteDistribution,
    loss: &LossSpec,
    dict: &Dictionary,
) -> Result<ReferenceSolution> {
    dict.check_support(dist)?;
    let mut best = ReferenceSolution { gstar_index: 0, gstar_risk: f64::INFINITY };
    for j in 0..dict.m() {
        let r = population_risk(dist, loss, dict.row(j))?.value;
        if r < best.gstar_risk {
            best = ReferenceSolution { gstar_index: j, gstar_risk: r };
        }
    }
    Ok(best)
}

/// `R(f) - R(g*)`. Negative values are legitimate for predictors outside
/// the dictionary and are returned as is.
pub fn excess_risk(
    dist: &DiscreteDistribution,
    loss: &LossSpec,
    dict: &Dictionary,
    f: &[f64],
) -> Result<f64> {
    let reference = population_minimizer(dist, loss, dict)?;
    Ok(population_risk(dist, loss, f)?.value - reference.gstar_risk)
}

/// `||h||_n^2 = n^{-1} sum_i h(X_i)^2`.
pub fn empirical_sq_norm(sample: &Sample, dist: &DiscreteDistribution, h: &[f64]) -> Result<f64> {
    sample.check_against(dist)?;
    check_len(dist.support_size(), h.len())?;
    Ok(sq_norm_unchecked(sample.indices(), h))
}

pub(crate) fn sq_norm_unchecked(indices: &[usize], h: &[f64]) -> f64 {
    let total: f64 = indices.iter().map(|&i| h[i] * h[i]).sum();
    total / indices.len() as f64
}

/// `E h(X)^2`, exact.
pub fn population_sq_norm(dist: &DiscreteDistribution, h: &[f64]) -> Result<f64> {
    check_len(dist.support_size(), h.len())?;
    Ok(dist.probs().iter().zip(h).map(|(p, v)| p * v * v).sum())
}

/// Difference of two value tables.
pub fn diff(f: &[f64], g: &[f64]) -> Vec<f64> {
    f.iter().zip(g).map(|(a, b)| a - b).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernsteinEntry {
    /// `E (f - g*)^2`
    pub lhs: f64,
    /// `gamma^{-1} E[l_f - l_{g*}]`
    pub rhs: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernsteinReport {
    pub gamma: f64,
    pub entries: Vec<BernsteinEntry>,
    pub holds: bool,
}

impl BernsteinReport {
    pub fn min_margin(&self) -> f64 {
        self.entries.iter().map(|e| e.margin).fold(f64::INFINITY, f64::min)
    }
}

/// Evaluates `E(f - g*)^2 <= gamma^{-1} E[l_f - l_{g*}]` for every member
/// of `class`. Passing an empirical measure as `dist` gives the empirical
/// counterpart.
pub fn bernstein_check(
    dist: &DiscreteDistribution,
    loss: &LossSpec,
    class: &[Vec<f64>],
    gstar: &[f64],
    gamma: f64,
) -> Result<BernsteinReport> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} must be positive")));
    }
    let gstar_risk = population_risk(dist, loss, gstar)?.value;
    let entries = class
        .iter()
        .map(|f| {
            let lhs = population_sq_norm(dist, &diff(f, gstar))?;
            let rhs = (population_risk(dist, loss, f)?.value - gstar_risk) / gamma;
            Ok(BernsteinEntry { lhs, rhs, margin: rhs - lhs })
        })
        .collect::<Result<Vec<_>>>()?;
    let holds = entries.iter().all(|e| e.margin >= -MARGIN_TOL);
    Ok(BernsteinReport { gamma, entries, holds })
}
