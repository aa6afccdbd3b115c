//! Least-squares power-law fits `statistic ~ C n^slope` on log-log axes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RateFitError {
    #[error("need at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("point ({n}, {value}) is not strictly positive")]
    NonPositive { n: f64, value: f64 },
    #[error("all sample sizes coincide")]
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl RateFit {
    /// Fits `ln value = intercept + slope ln n`.
    pub fn fit(points: &[(f64, f64)]) -> Result<Self, RateFitError> {
        if points.len() < 2 {
            return Err(RateFitError::TooFewPoints(points.len()));
        }
        if let Some(&(n, value)) = points.iter().find(|(n, v)| !(*n > 0.0 && *v > 0.0)) {
            return Err(RateFitError::NonPositive { n, value });
        }
        let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
        let len = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / len;
        let my = ys.iter().sum::<f64>() / len;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        if sxx == 0.0 {
            return Err(RateFitError::Degenerate);
        }
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
        Ok(Self { points: points.to_vec(), slope, intercept, r_squared })
    }

    pub fn predict(&self, n: f64) -> f64 {
        (self.intercept + self.slope * n.ln()).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_an_exact_power_law() {
        let pts: Vec<(f64, f64)> = [64.0, 128.0, 256.0, 1024.0].iter().map(|&n| (n, 3.0 / n)).collect();
        let fit = RateFit::fit(&pts).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!((fit.predict(512.0) - 3.0 / 512.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_unusable_points() {
        assert_eq!(RateFit::fit(&[(1.0, 1.0)]), Err(RateFitError::TooFewPoints(1)));
        assert!(matches!(RateFit::fit(&[(1.0, 1.0), (2.0, 0.0)]), Err(RateFitError::NonPositive { .. })));
        assert_eq!(RateFit::fit(&[(2.0, 1.0), (2.0, 3.0)]), Err(RateFitError::Degenerate));
    }
}
