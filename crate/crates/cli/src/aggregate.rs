//! Excess-risk scaling study for the aggregation estimators.

use anyhow::Result;
use offset_risk_core::estimators::{erm, midpoint, star};
use offset_risk_core::model::{Instance, LossSpec, PredictorWeights, Sample};
use offset_risk_core::risk::{population_minimizer, population_risk};
use offset_risk_core::rng;
use offset_risk_core::stats::{mean_and_se, median, quantile};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Estimator;
use crate::output::{num, LinePlot, Series, Table};
use crate::ratefit::RateFit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateParams {
    pub estimators: Vec<Estimator>,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    /// The rate statistic is the `(1 - delta)`-quantile of the excess risk.
    pub delta: f64,
    pub c1: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub estimator: Estimator,
    pub n: usize,
    pub replicate: usize,
    pub excess_risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub estimator: Estimator,
    pub n: usize,
    pub mean: f64,
    pub se: f64,
    pub median: f64,
    pub quantile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorFit {
    pub estimator: Estimator,
    /// `None` when some quantile is not positive (for example `m = 1`).
    pub fit: Option<RateFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub params: AggregateParams,
    pub gstar_index: usize,
    pub trials: Vec<Trial>,
    pub summary: Vec<SummaryRow>,
    pub fits: Vec<EstimatorFit>,
}

fn fitted(estimator: Estimator, sample: &Sample, inst: &Instance, loss: &LossSpec, p: &AggregateParams) -> Result<PredictorWeights> {
    let (dist, dict) = (&inst.dist, &inst.dict);
    Ok(match estimator {
        Estimator::Erm => PredictorWeights::unit(dict.m(), erm(sample, dist, loss, dict)?),
        Estimator::Star => star(sample, dist, loss, dict)?.weights,
        Estimator::Midpoint => midpoint(sample, dist, loss, dict, p.delta, p.c1)?.weights,
    })
}

/// Runs `replicates` trials per sample size. All estimators see the same
/// sample in a given `(n, replicate)` cell.
pub fn run_aggregate(inst: &Instance, params: &AggregateParams) -> Result<AggregateResult> {
    anyhow::ensure!(!params.estimators.is_empty(), "no estimators selected");
    let loss = LossSpec::squared(inst.dist.b())?;
    let reference = population_minimizer(&inst.dist, &loss, &inst.dict)?;
    let sampler = inst.dist.sampler();

    let cells: Vec<(usize, usize)> =
        params.n_grid.iter().flat_map(|&n| (0..params.replicates).map(move |r| (n, r))).collect();
    let per_cell: Vec<Vec<Trial>> = cells
        .par_iter()
        .map(|&(n, r)| {
            let mut rng = rng::stream(params.seed, &format!("aggregate/n={n}"), r as u64);
            let sample = Sample::from_indices(sampler.draw(n, &mut rng))?;
            params
                .estimators
                .iter()
                .map(|&estimator| {
                    let w = fitted(estimator, &sample, inst, &loss, params)?;
                    let f = inst.dict.evaluate(&w)?;
                    let excess_risk = population_risk(&inst.dist, &loss, &f)?.value - reference.gstar_risk;
                    Ok(Trial { estimator, n, replicate: r, excess_risk })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut trials: Vec<Trial> = per_cell.into_iter().flatten().collect();
    trials.sort_by_key(|t| (t.estimator, t.n, t.replicate));

    let mut summary = Vec::new();
    let mut fits = Vec::new();
    for &estimator in &params.estimators {
        let mut points = Vec::new();
        for &n in &params.n_grid {
            let values: Vec<f64> =
                trials.iter().filter(|t| t.estimator == estimator && t.n == n).map(|t| t.excess_risk).collect();
            let (mean, se) = mean_and_se(&values);
            let q = quantile(&values, 1.0 - params.delta);
            summary.push(SummaryRow { estimator, n, mean, se, median: median(&values), quantile: q });
            points.push((n as f64, q));
        }
        fits.push(EstimatorFit { estimator, fit: RateFit::fit(&points).ok() });
    }
    Ok(AggregateResult { params: params.clone(), gstar_index: reference.gstar_index, trials, summary, fits })
}

impl AggregateResult {
    pub fn fit_for(&self, estimator: Estimator) -> Option<&RateFit> {
        self.fits.iter().find(|f| f.estimator == estimator).and_then(|f| f.fit.as_ref())
    }

    pub fn trial_table(&self) -> Table {
        let mut t = Table::new(["estimator", "n", "replicate", "excess_risk"]);
        for tr in &self.trials {
            t.push(vec![tr.estimator.name().into(), tr.n.to_string(), tr.replicate.to_string(), num(tr.excess_risk)]);
        }
        t
    }

    pub fn plot(&self) -> LinePlot {
        let series = self
            .params
            .estimators
            .iter()
            .flat_map(|&e| {
                let rows: Vec<&SummaryRow> = self.summary.iter().filter(|s| s.estimator == e).collect();
                [
                    Series { name: format!("{} mean", e.name()), points: rows.iter().map(|s| (s.n as f64, s.mean)).collect() },
                    Series {
                        name: format!("{} q{}", e.name(), 1.0 - self.params.delta),
                        points: rows.iter().map(|s| (s.n as f64, s.quantile)).collect(),
                    },
                ]
            })
            .collect();
        LinePlot {
            title: "Excess risk versus sample size".into(),
            x_label: "n".into(),
            y_label: "excess risk".into(),
            log_x: true,
            log_y: true,
            series,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use offset_risk_core::model::{Dictionary, DiscreteDistribution};

    fn params(estimators: Vec<Estimator>) -> AggregateParams {
        AggregateParams { estimators, n_grid: vec![8, 16, 32], replicates: 40, delta: 0.05, c1: 4.0, seed: 3 }
    }

    #[test]
    fn single_function_dictionary_has_zero_excess() {
        let dist = DiscreteDistribution::from_responses(&[0.3, -0.2, 0.9], vec![0.2, 0.3, 0.5], 1.0).unwrap();
        let inst = Instance::new(dist, Dictionary::new(vec![vec![0.1, 0.0, -0.4]], 1.0).unwrap()).unwrap();
        let res = run_aggregate(&inst, &params(vec![Estimator::Erm, Estimator::Star, Estimator::Midpoint])).unwrap();
        assert!(res.trials.iter().all(|t| t.excess_risk == 0.0));
        assert!(res.fits.iter().all(|f| f.fit.is_none()));
        assert_eq!(res.trials.len(), 3 * 3 * 40);
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let inst = crate::instances::truth_ladder(&Default::default()).unwrap();
        let p = params(vec![Estimator::Star, Estimator::Midpoint]);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let a = one.install(|| run_aggregate(&inst, &p)).unwrap();
        let b = run_aggregate(&inst, &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trial_table().rows.len(), 2 * 3 * 40);
        assert_eq!(a.plot().series.len(), 4);
    }
}
