use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_len, DiscreteDistribution, LossSpec, Sample};
use crate::risk::{empirical_risk_unchecked, MARGIN_TOL};

/// Outcome of the deterministic offset inequality
/// `R_n(f) - R_n(g*) <= -gamma ||f - g*||_n^2 + epsilon` on one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetReport {
    /// `R_n(f) - R_n(g*)`
    pub lhs: f64,
    /// `||f - g*||_n^2`, averaged over the sample.
    pub quadratic: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// `-gamma * quadratic + epsilon`
    pub rhs: f64,
    pub holds: bool,
    pub margin: f64,
}

/// Checks the offset inequality for `predictor` against the reference
/// `gstar`, both given as value tables over the support.
pub fn check_offset(
    sample: &Sample,
    dist: &DiscreteDistribution,
    loss: &LossSpec,
    predictor: &[f64],
    gstar: &[f64],
    gamma: f64,
    epsilon: f64,
) -> Result<OffsetReport> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} must be positive")));
    }
    sample.check_against(dist)?;
    check_len(dist.support_size(), predictor.len())?;
    check_len(dist.support_size(), gstar.len())?;
    let idx = sample.indices();
    let lhs = empirical_risk_unchecked(idx, dist, loss, predictor)
        - empirical_risk_unchecked(idx, dist, loss, gstar);
    let quadratic = idx
        .iter()
        .map(|&i| (predictor[i] - gstar[i]).powi(2))
        .sum::<f64>()
        / idx.len() as f64;
    let rhs = -gamma * quadratic + epsilon;
    let margin = rhs - lhs;
    Ok(OffsetReport { lhs, quadratic, gamma, epsilon, rhs, holds: margin >= -MARGIN_TOL, margin })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_against_itself() {
        let d = DiscreteDistribution::from_responses(&[0.1, -0.3], vec![0.5, 0.5], 1.0).unwrap();
        let s = Sample::new(vec![0, 1, 1], &d).unwrap();
        let loss = LossSpec::squared(1.0).unwrap();
        let g = [0.4, 0.2];
        let r = check_offset(&s, &d, &loss, &g, &g, 0.5, 0.0).unwrap();
        assert_eq!((r.lhs, r.quadratic, r.margin), (0.0, 0.0, 0.0));
        assert!(r.holds);
        assert!(check_offset(&s, &d, &loss, &g, &g, 0.0, 0.0).is_err());
        assert!(check_offset(&s, &d, &loss, &g, &[0.0], 1.0, 0.0).is_err());
    }

    #[test]
    fn violated_inequality_is_reported() {
        let d = DiscreteDistribution::from_responses(&[0.0], vec![1.0], 1.0).unwrap();
        let s = Sample::new(vec![0], &d).unwrap();
        let loss = LossSpec::squared(1.0).unwrap();
        // f = 0.5 is worse than g* = 0: lhs = 0.25, quadratic = 0.25
        let r = check_offset(&s, &d, &loss, &[0.5], &[0.0], 1.0, 0.1).unwrap();
        assert!((r.rhs - (-0.25 + 0.1)).abs() < 1e-15);
        assert!((r.margin - (-0.15 - 0.25)).abs() < 1e-15);
        assert!(!r.holds);
    }
}
