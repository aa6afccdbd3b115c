//! Model selection aggregation over a finite dictionary: empirical risk
//! minimization, the star algorithm and the midpoint estimator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dictionary, DiscreteDistribution, LossKind, LossSpec, PredictorWeights, Sample};
use crate::risk::{empirical_risk_unchecked, sq_norm_unchecked};

/// Iteration cap of the ternary search used for non-squared losses.
pub const TERNARY_MAX_ITER: usize = 200;
/// Interval width at which the ternary search stops.
pub const TERNARY_TOL: f64 = 1e-10;
/// Default constant in front of the empirical distance of the midpoint set.
pub const DEFAULT_C1: f64 = 4.0;

fn check_inputs(sample: &Sample, dist: &DiscreteDistribution, dict: &Dictionary) -> Result<()> {
    sample.check_against(dist)?;
    dict.check_support(dist)
}

fn empirical_risks(sample: &Sample, dist: &DiscreteDistribution, loss: &LossSpec, dict: &Dictionary) -> Vec<f64> {
    (0..dict.m())
        .map(|j| empirical_risk_unchecked(sample.indices(), dist, loss, dict.row(j)))
        .collect()
}

fn argmin_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = j;
        }
    }
    best
}

/// Index of the dictionary row with least empirical risk (lowest index on ties).
pub fn erm(sample: &Sample, dist: &DiscreteDistribution, loss: &LossSpec, dict: &Dictionary) -> Result<usize> {
    check_inputs(sample, dist, dict)?;
    Ok(argmin_lowest(&empirical_risks(sample, dist, loss, dict)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarSolution {
    pub erm_index: usize,
    pub partner_index: usize,
    pub lambda: f64,
    /// `lambda * e_erm + (1 - lambda) * e_partner`
    pub weights: PredictorWeights,
    pub empirical_risk: f64,
}

fn mix(a: &[f64], g: &[f64], lambda: f64) -> Vec<f64> {
    a.iter().zip(g).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect()
}

/// Exact minimizer over `[0, 1]` of `R_n(lambda a + (1 - lambda) g)` for the
/// squared loss. A segment that is degenerate on the sample returns 1.
fn squared_segment_lambda(indices: &[usize], dist: &DiscreteDistribution, a: &[f64], g: &[f64]) -> f64 {
    let atoms = dist.atoms();
    let (mut rd, mut dd) = (0.0, 0.0);
    for &i in indices {
        let r = g[i] - atoms[i].y;
        let d = a[i] - g[i];
        rd += r * d;
        dd += d * d;
    }
    if dd == 0.0 {
        1.0
    } else {
        (-rd / dd).clamp(0.0, 1.0)
    }
}

fn ternary_segment_lambda(indices: &[usize], dist: &DiscreteDistribution, loss: &LossSpec, a: &[f64], g: &[f64]) -> f64 {
    let risk = |l: f64| segment_risk(indices, dist, loss, a, g, l);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..TERNARY_MAX_ITER {
        if hi - lo < TERNARY_TOL {
            break;
        }
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if risk(m1) <= risk(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let interior = 0.5 * (lo + hi);
    // endpoints are not reached exactly by the shrinking bracket
    [0.0, interior, 1.0]
        .into_iter()
        .map(|l| (risk(l), l))
        .fold((f64::INFINITY, 1.0), |best, cand| if cand.0 < best.0 { cand } else { best })
        .1
}

fn segment_risk(indices: &[usize], dist: &DiscreteDistribution, loss: &LossSpec, a: &[f64], g: &[f64], lambda: f64) -> f64 {
    let atoms = dist.atoms();
    let total: f64 = indices
        .iter()
        .map(|&i| loss.value(lambda * a[i] + (1.0 - lambda) * g[i], atoms[i].y))
        .sum();
    total / indices.len() as f64
}

/// The star algorithm: minimizes `R_n(lambda f_erm + (1 - lambda) g)` jointly
/// over partners `g` in the dictionary and `lambda` in `[0, 1]`.
///
/// `lambda = 1` always denotes the ERM itself and is reported with
/// `partner_index == erm_index`. Remaining ties go to the lowest partner
/// index, then to the smaller `lambda`.
pub fn star(sample: &Sample, dist: &DiscreteDistribution, loss: &LossSpec, dict: &Dictionary) -> Result<StarSolution> {
    check_inputs(sample, dist, dict)?;
    let idx = sample.indices();
    let risks = empirical_risks(sample, dist, loss, dict);
    let e = argmin_lowest(&risks);
    let a = dict.row(e);

    let (mut best_risk, mut best_partner, mut best_lambda) = (risks[e], e, 1.0);
    for j in (0..dict.m()).filter(|&j| j != e) {
        let g = dict.row(j);
        let lambda = match loss.kind() {
            LossKind::Squared => squared_segment_lambda(idx, dist, a, g),
            LossKind::Custom => ternary_segment_lambda(idx, dist, loss, a, g),
        };
        if lambda == 1.0 {
            continue;
        }
        let r = empirical_risk_unchecked(idx, dist, loss, &mix(a, g, lambda));
        let better = r < best_risk
            || (r == best_risk && (j < best_partner || (j == best_partner && lambda < best_lambda)));
        if better {
            best_risk = r;
            best_partner = j;
            best_lambda = lambda;
        }
    }

    Ok(StarSolution {
        erm_index: e,
        partner_index: best_partner,
        lambda: best_lambda,
        weights: PredictorWeights::pair(dict.m(), e, best_lambda, best_partner, 1.0 - best_lambda),
        empirical_risk: best_risk,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidpointSolution {
    pub erm_index: usize,
    pub partner_index: usize,
    /// One half on the ERM and one half on the partner (merged when equal).
    pub weights: PredictorWeights,
    /// Rows whose empirical risk is within `c1 * C_b * d(f_erm, g)` of the ERM.
    pub almost_minimizer_set: Vec<usize>,
    pub empirical_risk: f64,
}

/// `log(2m / delta)`.
pub fn confidence_log(m: usize, delta: f64) -> f64 {
    (2.0 * m as f64 / delta).ln()
}

/// `d(g, g') = sqrt(||g - g'||_n^2 log(2m/delta) / n) + b log(2m/delta) / n`.
pub fn empirical_distance(sq_norm: f64, n: usize, m: usize, delta: f64, b: f64) -> f64 {
    let l = confidence_log(m, delta);
    let n = n as f64;
    (sq_norm * l / n).sqrt() + b * l / n
}

/// Slack of the offset inequality satisfied by the midpoint estimator (with
/// modulus `gamma / 64`) whenever `g*` lies in its almost-minimizer set:
/// `(4 c1^2 C_b^2 / gamma + c1 b C_b / 2) log(2m/delta) / n`.
pub fn midpoint_epsilon(loss: &LossSpec, b: f64, m: usize, delta: f64, n: usize, c1: f64) -> f64 {
    let cb = loss.lipschitz();
    let gamma = loss.strong_convexity();
    (4.0 * c1 * c1 * cb * cb / gamma + 0.5 * c1 * b * cb) * confidence_log(m, delta) / n as f64
}

/// The midpoint estimator: the best midpoint `(f_erm + g) / 2` over the
/// data-dependent set of almost empirical risk minimizers `g`.
pub fn midpoint(
    sample: &Sample,
    dist: &DiscreteDistribution,
    loss: &LossSpec,
    dict: &Dictionary,
    delta: f64,
    c1: f64,
) -> Result<MidpointSolution> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta = {delta} must lie in (0, 1)")));
    }
    if !(c1 > 0.0) {
        return Err(Error::InvalidParameter(format!("c1 = {c1} must be positive")));
    }
    check_inputs(sample, dist, dict)?;
    let idx = sample.indices();
    let n = sample.n();
    let m = dict.m();
    let risks = empirical_risks(sample, dist, loss, dict);
    let e = argmin_lowest(&risks);
    let a = dict.row(e);

    let slack_scale = c1 * loss.lipschitz();
    let almost: Vec<usize> = (0..m)
        .filter(|&j| {
            let g = dict.row(j);
            let h: Vec<f64> = a.iter().zip(g).map(|(x, y)| x - y).collect();
            let d = empirical_distance(sq_norm_unchecked(idx, &h), n, m, delta, dist.b());
            risks[j] <= risks[e] + slack_scale * d
        })
        .collect();

    let mut best: Option<(f64, usize)> = None;
    for &j in &almost {
        let r = empirical_risk_unchecked(idx, dist, loss, &mix(a, dict.row(j), 0.5));
        if best.is_none_or(|(br, _)| r < br) {
            best = Some((r, j));
        }
    }
    let (empirical_risk, partner) = best.expect("the ERM always belongs to its own almost-minimizer set");

    Ok(MidpointSolution {
        erm_index: e,
        partner_index: partner,
        weights: PredictorWeights::pair(m, e, 0.5, partner, 0.5),
        almost_minimizer_set: almost,
        empirical_risk,
    })
}
