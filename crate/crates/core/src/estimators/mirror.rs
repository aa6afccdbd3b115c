//! Early-stopped mirror descent on linear predictors `f_w(x) = <w, x>`.
//!
//! The flow `dw/dt = -(hess psi(w))^{-1} grad R_n(w)` is integrated with
//! explicit Euler steps in mirror coordinates `theta = grad psi(w)`:
//! `theta_{k+1} = theta_k - step * grad R_n(w_k)`. With this scheme the
//! three-point identity gives, exactly,
//!
//! ```text
//! D(w*, w_{k+1}) = D(w*, w_k) - step <grad R_n(w_k), w_k - w*> + D(w_k, w_{k+1})
//! ```
//!
//! so the only gap to the continuous-time argument is the accumulated
//! `sum_k D(w_k, w_{k+1})`, which is `O(step)` over a bounded horizon. It is
//! recorded as [`MirrorDescentTrace::discretization_slack`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_len, DiscreteDistribution, LossSpec, Sample};

/// Iterates whose norm exceeds `DIVERGENCE_FACTOR * (|w0| + 1)` abort the run.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MirrorMap {
    /// `psi(w) = |w|^2 / 2`
    Euclidean,
    /// `psi(w) = sum_j w_j log w_j - w_j` on the positive orthant
    NegativeEntropy,
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

impl MirrorMap {
    pub fn potential(&self, w: &[f64]) -> f64 {
        match self {
            MirrorMap::Euclidean => 0.5 * w.iter().map(|v| v * v).sum::<f64>(),
            MirrorMap::NegativeEntropy => w.iter().map(|&v| xlogy(v, v) - v).sum(),
        }
    }

    pub fn to_dual(&self, w: &[f64]) -> Vec<f64> {
        match self {
            MirrorMap::Euclidean => w.to_vec(),
            MirrorMap::NegativeEntropy => w.iter().map(|v| v.ln()).collect(),
        }
    }

    pub fn from_dual(&self, theta: &[f64]) -> Vec<f64> {
        match self {
            MirrorMap::Euclidean => theta.to_vec(),
            MirrorMap::NegativeEntropy => theta.iter().map(|t| t.exp()).collect(),
        }
    }

    /// `D(x, y) = psi(x) - psi(y) - <grad psi(y), x - y>`.
    pub fn bregman(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            MirrorMap::Euclidean => 0.5 * x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
            MirrorMap::NegativeEntropy => x
                .iter()
                .zip(y)
                .map(|(&a, &b)| xlogy(a, a) - xlogy(a, b) - a + b)
                .sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirrorDescentTrace {
    pub mirror_map: MirrorMap,
    /// `(t_k, w_k)` with `t_k = k * step`.
    pub w_path: Vec<(f64, Vec<f64>)>,
    /// First recorded time with `delta(t) <= epsilon`.
    pub t_star: Option<f64>,
    pub t_star_index: Option<usize>,
    /// `D(w*, w_0)`
    pub bregman_initial: f64,
    /// `D(w*, w_{t*})` when the stopping time is reached.
    pub bregman_at_stop: Option<f64>,
    /// `delta(t) = R_n(w_t) - R_n(w*) + (gamma/2) ||f_{w_t} - f_{w*}||_n^2`.
    pub delta_path: Vec<(f64, f64)>,
    pub epsilon: f64,
    pub step: f64,
    pub t_max: f64,
    /// Strong-convexity modulus of the loss used inside `delta`.
    pub gamma: f64,
    /// `sum_{k < k*} D(w_k, w_{k+1})` (over the whole path if `t*` is not reached).
    pub discretization_slack: f64,
}

impl MirrorDescentTrace {
    pub fn stopped_weights(&self) -> Option<&[f64]> {
        self.t_star_index.map(|k| self.w_path[k].1.as_slice())
    }

    /// `2 D(w*, w_0) / epsilon`.
    pub fn stopping_time_bound(&self) -> f64 {
        2.0 * self.bregman_initial / self.epsilon
    }
}

/// Values of `f_w(x_a) = <w, x_a>` over the support.
pub fn linear_predictions(dist: &DiscreteDistribution, w: &[f64]) -> Result<Vec<f64>> {
    check_len(dist.feature_dim(), w.len())?;
    Ok(dist
        .atoms()
        .iter()
        .map(|a| a.x.iter().zip(w).map(|(x, v)| x * v).sum())
        .collect())
}

/// The sample as (atom id, weight c_a / n) pairs over sampled atoms.
fn sample_weights(sample: &Sample, support: usize) -> Vec<(usize, f64)> {
    let mut counts = vec![0usize; support];
    for &i in sample.indices() {
        counts[i] += 1;
    }
    let n = sample.n() as f64;
    counts
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c > 0)
        .map(|(a, c)| (a, c as f64 / n))
        .collect()
}

struct Objective<'a> {
    dist: &'a DiscreteDistribution,
    loss: &'a LossSpec,
    weights: Vec<(usize, f64)>,
    star_pred: Vec<f64>,
    star_risk: f64,
}

impl Objective<'_> {
    fn predict(&self, a: usize, w: &[f64]) -> f64 {
        self.dist.atom(a).x.iter().zip(w).map(|(x, v)| x * v).sum()
    }

    fn delta(&self, w: &[f64]) -> f64 {
        let (mut risk, mut quad) = (0.0, 0.0);
        for (k, &(a, p)) in self.weights.iter().enumerate() {
            let f = self.predict(a, w);
            risk += p * self.loss.value(f, self.dist.atom(a).y);
            quad += p * (f - self.star_pred[k]).powi(2);
        }
        risk - self.star_risk + 0.5 * self.loss.strong_convexity() * quad
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; w.len()];
        for &(a, p) in &self.weights {
            let atom = self.dist.atom(a);
            let coef = p * self.loss.grad(self.predict(a, w), atom.y);
            for (gj, xj) in g.iter_mut().zip(&atom.x) {
                *gj += coef * xj;
            }
        }
        g
    }
}

fn norm(w: &[f64]) -> f64 {
    w.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Runs mirror descent from `w0` and records `delta(t)` against the
/// reference weights `w_star` until `t_max` (default `2 D(w*, w0) / epsilon + step`).
#[allow(clippy::too_many_arguments)]
pub fn mirror_descent(
    sample: &Sample,
    dist: &DiscreteDistribution,
    loss: &LossSpec,
    w_star: &[f64],
    w0: &[f64],
    mirror_map: MirrorMap,
    epsilon: f64,
    step: f64,
    t_max: Option<f64>,
) -> Result<MirrorDescentTrace> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("step = {step} must be positive")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be positive")));
    }
    sample.check_against(dist)?;
    check_len(dist.feature_dim(), w0.len())?;
    check_len(dist.feature_dim(), w_star.len())?;
    if mirror_map == MirrorMap::NegativeEntropy {
        if w0.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidParameter(
                "negative-entropy mirror map needs a strictly positive starting point".into(),
            ));
        }
        if w_star.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidParameter(
                "negative-entropy mirror map needs a nonnegative reference point".into(),
            ));
        }
    }

    let weights = sample_weights(sample, dist.support_size());
    let star_pred: Vec<f64> = weights
        .iter()
        .map(|&(a, _)| dist.atom(a).x.iter().zip(w_star).map(|(x, v)| x * v).sum())
        .collect();
    let star_risk = weights
        .iter()
        .zip(&star_pred)
        .map(|(&(a, p), f)| p * loss.value(*f, dist.atom(a).y))
        .sum();
    let obj = Objective { dist, loss, weights, star_pred, star_risk };

    let bregman_initial = mirror_map.bregman(w_star, w0);
    let t_max = t_max.unwrap_or(2.0 * bregman_initial / epsilon + step);
    let steps = (t_max / step).ceil() as usize;
    let blowup = DIVERGENCE_FACTOR * norm(w0) + DIVERGENCE_FACTOR;

    let mut trace = MirrorDescentTrace {
        mirror_map,
        w_path: Vec::with_capacity(steps + 1),
        t_star: None,
        t_star_index: None,
        bregman_initial,
        bregman_at_stop: None,
        delta_path: Vec::with_capacity(steps + 1),
        epsilon,
        step,
        t_max,
        gamma: loss.strong_convexity(),
        discretization_slack: 0.0,
    };

    let mut w = w0.to_vec();
    let mut theta = mirror_map.to_dual(&w);
    for k in 0..=steps {
        let t = k as f64 * step;
        let delta = obj.delta(&w);
        if trace.t_star.is_none() && delta <= epsilon {
            trace.t_star = Some(t);
            trace.t_star_index = Some(k);
            trace.bregman_at_stop = Some(mirror_map.bregman(w_star, &w));
        }
        trace.delta_path.push((t, delta));
        trace.w_path.push((t, w.clone()));
        if k == steps {
            break;
        }

        let g = obj.gradient(&w);
        for (th, gj) in theta.iter_mut().zip(&g) {
            *th -= step * gj;
        }
        let next = mirror_map.from_dual(&theta);
        if trace.t_star.is_none() {
            trace.discretization_slack += mirror_map.bregman(&w, &next);
        }
        w = next;
        let size = norm(&w);
        if !size.is_finite() || size > blowup {
            let t = (k + 1) as f64 * step;
            return Err(Error::Divergence { t, trace: Box::new(trace) });
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Atom;

    fn scalar_problem() -> (DiscreteDistribution, Sample) {
        let d = DiscreteDistribution::new(vec![Atom { x: vec![1.0], y: 0.0 }], vec![1.0], 1.0).unwrap();
        let s = Sample::new(vec![0], &d).unwrap();
        (d, s)
    }

    #[test]
    fn euclidean_scalar_flow_matches_exponential() {
        let (d, s) = scalar_problem();
        let loss = LossSpec::squared(1.0).unwrap();
        let (eps, step) = (0.01, 1e-4);
        let tr = mirror_descent(&s, &d, &loss, &[0.0], &[1.0], MirrorMap::Euclidean, eps, step, None).unwrap();
        assert_eq!(tr.bregman_initial, 0.5);
        // w_t = exp(-2t); Euler error is at most O(step) uniformly
        for (t, w) in tr.w_path.iter().step_by(97) {
            assert!((w[0] - (-2.0 * t).exp()).abs() <= step, "t = {t}");
        }
        // delta(t) = 2 exp(-4t), t* = ln(2/eps)/4
        let t_star = tr.t_star.unwrap();
        let exact = (2.0f64 / eps).ln() / 4.0;
        assert!((t_star - exact).abs() <= 2.0 * step + 1e-3 * exact, "{t_star} vs {exact}");
        assert!(t_star <= 1.0 / eps);
        assert!(t_star <= tr.stopping_time_bound() + step);
    }

    #[test]
    fn start_at_target_stops_immediately() {
        let (d, s) = scalar_problem();
        let loss = LossSpec::squared(1.0).unwrap();
        let tr = mirror_descent(&s, &d, &loss, &[0.3], &[0.3], MirrorMap::Euclidean, 0.1, 1e-3, Some(0.01)).unwrap();
        assert_eq!(tr.t_star, Some(0.0));
        assert_eq!(tr.discretization_slack, 0.0);
    }

    #[test]
    fn entropy_requires_positive_start() {
        let (d, s) = scalar_problem();
        let loss = LossSpec::squared(1.0).unwrap();
        let err = mirror_descent(&s, &d, &loss, &[0.5], &[0.0], MirrorMap::NegativeEntropy, 0.1, 1e-3, None);
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
        assert!(mirror_descent(&s, &d, &loss, &[0.5], &[1.0], MirrorMap::Euclidean, 0.0, 1e-3, None).is_err());
    }

    #[test]
    fn divergence_is_reported_with_trace() {
        let (d, s) = scalar_problem();
        let loss = LossSpec::squared(1.0).unwrap();
        // step far beyond the stability limit 1 for curvature 2
        let err = mirror_descent(&s, &d, &loss, &[0.0], &[1.0], MirrorMap::Euclidean, 1e-12, 5.0, Some(1e4)).unwrap_err();
        match err {
            Error::Divergence { trace, .. } => assert!(trace.w_path.len() > 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bregman_divergences() {
        let e = MirrorMap::NegativeEntropy;
        let x = [0.2, 0.5, 0.3];
        assert!(e.bregman(&x, &x).abs() < 1e-15);
        assert!(e.bregman(&x, &[0.3, 0.3, 0.4]) > 0.0);
        assert!(e.bregman(&[0.0, 1.0], &[0.5, 0.5]).is_finite());
        let u = MirrorMap::Euclidean;
        assert_eq!(u.bregman(&[1.0, 2.0], &[0.0, 0.0]), 2.5);
        let back = e.from_dual(&e.to_dual(&x));
        assert!(back.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-15));
        // D(x, y) = psi(x) - psi(y) - <grad psi(y), x - y>
        let y = [0.1, 0.6, 0.3];
        let gy = e.to_dual(&y);
        let direct = e.potential(&x) - e.potential(&y) - gy.iter().zip(x.iter().zip(&y)).map(|(g, (a, b))| g * (a - b)).sum::<f64>();
        assert!((direct - e.bregman(&x, &y)).abs() < 1e-14);
    }
}
