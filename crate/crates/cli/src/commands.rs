//! The five experiment commands and the files each one writes.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use offset_risk_core::complexity::{local_complexity_fixed_point, offset_complexity_mc, FiniteClassSpec};
use offset_risk_core::concentration::{lambda_grid, mgf_verify, tail_verify, ConcentrationReport, MultiplierSetup, TailReport};
use offset_risk_core::estimators::{mirror_descent, MirrorDescentTrace, MirrorMap};
use offset_risk_core::model::{draw_sample, Instance, LossSpec};
use offset_risk_core::risk::population_minimizer;
use serde::{Deserialize, Serialize};

use crate::aggregate::{run_aggregate, AggregateParams};
use crate::config::{Command, ExperimentConfig, MirrorChoice};
use crate::output::{num, write_json, LinePlot, Provenance, Series, Table};
use crate::verify::{run_verify, status_line, write_manifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

/// Which artifact kinds to write; all of them when `formats` is empty.
#[derive(Debug, Clone, Default)]
pub struct Outputs {
    pub formats: Vec<Format>,
}

impl Outputs {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.is_empty() || self.formats.contains(&f)
    }
}

/// Result of a command: whether every executed check passed (always true
/// for commands that run no checks) and the files written.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandReport {
    pub passed: bool,
    pub files: Vec<String>,
}

struct Writer<'a> {
    dir: &'a Path,
    prov: Provenance,
    outputs: &'a Outputs,
    files: Vec<String>,
}

impl Writer<'_> {
    fn csv(&mut self, name: &str, table: &Table) -> Result<()> {
        if self.outputs.wants(Format::Csv) {
            table.write_csv(&self.dir.join(name), &self.prov)?;
            self.files.push(name.into());
        }
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        if self.outputs.wants(Format::Json) {
            write_json(&self.dir.join(name), &self.prov, value)?;
            self.files.push(name.into());
        }
        Ok(())
    }

    fn svg(&mut self, name: &str, plot: &LinePlot) -> Result<()> {
        if self.outputs.wants(Format::Svg) {
            plot.write_svg(&self.dir.join(name), &self.prov)?;
            self.files.push(name.into());
        }
        Ok(())
    }
}

/// Runs `command` with `cfg` and writes its artifacts into `out`.
pub fn run_command(command: Command, cfg: &ExperimentConfig, out: &Path, outputs: &Outputs) -> Result<CommandReport> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let prov = Provenance { config_hash: cfg.hash(), seed: cfg.seed };
    let mut w = Writer { dir: out, prov, outputs, files: Vec::new() };
    let passed = match command {
        Command::Aggregate => aggregate(cfg, &mut w)?,
        Command::Complexity => complexity(cfg, &mut w)?,
        Command::Concentration => concentration(cfg, &mut w)?,
        Command::Mirror => mirror(cfg, &mut w)?,
        Command::Verify => verify(cfg, &mut w)?,
    };
    Ok(CommandReport { passed, files: w.files })
}

fn aggregate(cfg: &ExperimentConfig, w: &mut Writer) -> Result<bool> {
    let inst = cfg.load_instance()?;
    let params = AggregateParams {
        estimators: cfg.aggregate.estimators.clone(),
        n_grid: cfg.n_grid.clone(),
        replicates: cfg.replicates,
        delta: cfg.delta,
        c1: cfg.aggregate.c1,
        seed: cfg.seed,
    };
    let res = run_aggregate(&inst, &params)?;
    w.csv("aggregate_trials.csv", &res.trial_table())?;
    let mut summary = Table::new(["estimator", "n", "mean", "se", "median", "quantile"]);
    for s in &res.summary {
        summary.push(vec![s.estimator.name().into(), s.n.to_string(), num(s.mean), num(s.se), num(s.median), num(s.quantile)]);
    }
    w.csv("aggregate_summary.csv", &summary)?;
    w.json(
        "aggregate.json",
        &serde_json::json!({ "params": res.params, "gstar_index": res.gstar_index, "summary": res.summary, "fits": res.fits }),
    )?;
    w.svg("aggregate_rate.svg", &res.plot())?;
    Ok(true)
}

fn centered_class(inst: &Instance) -> Result<FiniteClassSpec> {
    let loss = LossSpec::squared(inst.dist.b())?;
    let best = population_minimizer(&inst.dist, &loss, &inst.dict)?;
    Ok(FiniteClassSpec::centered_star(inst.dict.rows(), inst.dict.row(best.gstar_index))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ComplexityRow {
    n: usize,
    offset: f64,
    offset_se: f64,
    local: f64,
    local_se: f64,
}

fn complexity(cfg: &ExperimentConfig, w: &mut Writer) -> Result<bool> {
    let inst = cfg.load_instance()?;
    let class = centered_class(&inst)?;
    let gamma = cfg.complexity.gamma;
    let rows = cfg
        .n_grid
        .iter()
        .map(|&n| {
            let off = offset_complexity_mc(&inst.dist, &class, gamma, n, cfg.replicates, cfg.seed)?;
            let loc = local_complexity_fixed_point(&inst.dist, &class, gamma, n, cfg.replicates, cfg.complexity.r_tol, cfg.seed)?;
            Ok(ComplexityRow { n, offset: off.value, offset_se: off.std_error, local: loc.value, local_se: loc.std_error })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(["n", "offset", "offset_se", "local", "local_se"]);
    for r in &rows {
        t.push(vec![r.n.to_string(), num(r.offset), num(r.offset_se), num(r.local), num(r.local_se)]);
    }
    w.csv("complexity.csv", &t)?;
    w.json("complexity.json", &serde_json::json!({ "gamma": gamma, "replicates": cfg.replicates, "rows": rows }))?;
    w.svg(
        "complexity.svg",
        &LinePlot {
            title: "Offset and local complexity".into(),
            x_label: "n".into(),
            y_label: "complexity".into(),
            log_x: true,
            log_y: true,
            series: vec![
                Series { name: "offset".into(), points: rows.iter().map(|r| (r.n as f64, r.offset)).collect() },
                Series { name: "local fixed point".into(), points: rows.iter().map(|r| (r.n as f64, r.local)).collect() },
            ],
        },
    )?;
    Ok(true)
}

/// Product law `P_X x Rademacher(zeta_scale)` with `P_X` the atom law of the
/// instance and the centered star hull of the dictionary as the class.
pub fn concentration_setup(cfg: &ExperimentConfig, inst: &Instance) -> Result<MultiplierSetup> {
    let class = centered_class(inst)?;
    Ok(MultiplierSetup::rademacher_product(inst.dist.probs(), cfg.concentration.zeta_scale, class, cfg.concentration.gamma)?)
}

fn concentration(cfg: &ExperimentConfig, w: &mut Writer) -> Result<bool> {
    let inst = cfg.load_instance()?;
    let setup = concentration_setup(cfg, &inst)?;
    let c = &cfg.concentration;
    let lambdas = lambda_grid(&setup, c.lambda_points);
    let mgf: ConcentrationReport = mgf_verify(&setup, c.n, cfg.replicates, &lambdas, c.confidence, cfg.seed)?;
    let tail: TailReport = tail_verify(&setup, c.n, cfg.replicates, &c.deltas, cfg.seed)?;

    let mut t = Table::new(["lambda", "log_mgf", "ci_lower", "ci_upper", "bound"]);
    for p in &mgf.points {
        t.push(vec![num(p.lambda), num(p.log_mgf), num(p.ci_lower), num(p.ci_upper), num(p.bound)]);
    }
    w.csv("concentration_mgf.csv", &t)?;
    let mut tt = Table::new(["delta", "threshold", "frequency", "allowed", "holds"]);
    for r in &tail.rows {
        tt.push(vec![num(r.delta), num(r.threshold), num(r.frequency), num(r.allowed), r.holds.to_string()]);
    }
    w.csv("concentration_tail.csv", &tt)?;
    w.json("concentration.json", &serde_json::json!({ "mgf": mgf, "tail": tail }))?;
    w.svg(
        "concentration_mgf.svg",
        &LinePlot {
            title: "Log-MGF of the centered supremum".into(),
            x_label: "lambda".into(),
            y_label: "log MGF".into(),
            log_x: false,
            log_y: false,
            series: vec![
                Series { name: "empirical".into(), points: mgf.points.iter().map(|p| (p.lambda, p.log_mgf)).collect() },
                Series { name: "CI upper".into(), points: mgf.points.iter().map(|p| (p.lambda, p.ci_upper)).collect() },
                Series { name: "bound".into(), points: mgf.points.iter().map(|p| (p.lambda, p.bound)).collect() },
            ],
        },
    )?;
    Ok(mgf.passed() && tail.passed())
}

fn thin<T: Clone>(items: &[T], max_rows: usize) -> Vec<T> {
    if items.len() <= max_rows || max_rows < 2 {
        return items.to_vec();
    }
    let stride = (items.len() - 1).div_ceil(max_rows - 1);
    let mut out: Vec<T> = items.iter().step_by(stride).cloned().collect();
    if !(items.len() - 1).is_multiple_of(stride) {
        out.push(items[items.len() - 1].clone());
    }
    out
}

fn mirror(cfg: &ExperimentConfig, w: &mut Writer) -> Result<bool> {
    let inst = cfg.load_instance()?;
    let m = &cfg.mirror;
    let d = inst.dist.feature_dim();
    let w0 = m.w0.clone().unwrap_or_else(|| vec![1.0; d]);
    let w_star = m.w_star.clone().unwrap_or_else(|| vec![0.5; d]);
    anyhow::ensure!(w0.len() == d && w_star.len() == d, "w0 and w_star must have the feature dimension {d}");
    let maps = match m.map {
        MirrorChoice::Euclidean => vec![MirrorMap::Euclidean],
        MirrorChoice::NegativeEntropy => vec![MirrorMap::NegativeEntropy],
        MirrorChoice::Both => vec![MirrorMap::Euclidean, MirrorMap::NegativeEntropy],
    };
    let loss = LossSpec::squared(inst.dist.b())?;
    let sample = draw_sample(&inst.dist, m.n, cfg.seed)?;
    let traces: Vec<MirrorDescentTrace> = maps
        .iter()
        .map(|&map| Ok(mirror_descent(&sample, &inst.dist, &loss, &w_star, &w0, map, m.epsilon, m.step, None)?))
        .collect::<Result<_>>()?;

    let mut columns = vec!["map".to_string(), "t".into(), "delta".into()];
    columns.extend((0..d).map(|j| format!("w{j}")));
    let mut path = Table::new(columns);
    let mut series = Vec::new();
    for tr in &traces {
        let name = serde_json::to_value(tr.mirror_map)?.as_str().unwrap_or_default().to_string();
        let rows: Vec<(usize, (f64, f64))> = thin(&tr.delta_path.iter().copied().enumerate().collect::<Vec<_>>(), m.max_rows);
        for (k, (t, delta)) in &rows {
            let mut row = vec![name.clone(), num(*t), num(*delta)];
            row.extend(tr.w_path[*k].1.iter().map(|v| num(*v)));
            path.push(row);
        }
        series.push(Series { name, points: rows.iter().map(|(_, p)| *p).collect() });
    }
    w.csv("mirror_path.csv", &path)?;
    let summaries: Vec<serde_json::Value> = traces
        .iter()
        .map(|tr| {
            serde_json::json!({
                "mirror_map": tr.mirror_map,
                "t_star": tr.t_star,
                "stopping_time_bound": tr.stopping_time_bound(),
                "bregman_initial": tr.bregman_initial,
                "bregman_at_stop": tr.bregman_at_stop,
                "discretization_slack": tr.discretization_slack,
                "epsilon": tr.epsilon,
                "step": tr.step,
                "stopped_weights": tr.stopped_weights(),
            })
        })
        .collect();
    w.json("mirror.json", &summaries)?;
    w.svg(
        "mirror_delta.svg",
        &LinePlot {
            title: "Offset gap along the mirror descent path".into(),
            x_label: "t".into(),
            y_label: "delta(t)".into(),
            log_x: false,
            log_y: false,
            series,
        },
    )?;
    Ok(true)
}

fn verify(cfg: &ExperimentConfig, w: &mut Writer) -> Result<bool> {
    let run = run_verify(&cfg.verify, cfg.seed, |c| eprintln!("{}", status_line(c)))?;
    if w.outputs.wants(Format::Json) {
        write_manifest(w.dir, &w.prov, &run)?;
        w.files.extend(["manifest.json".to_string(), "timings.json".to_string()]);
    }
    w.csv("checks.csv", &run.manifest.table())?;
    Ok(run.manifest.all_passed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thinning_keeps_both_ends() {
        let v: Vec<usize> = (0..101).collect();
        let t = thin(&v, 10);
        assert!(t.len() <= 11);
        assert_eq!(t[0], 0);
        assert_eq!(*t.last().unwrap(), 100);
        assert_eq!(thin(&v, 500), v);
    }

    #[test]
    fn empty_format_list_means_everything() {
        let all = Outputs::default();
        assert!(all.wants(Format::Csv) && all.wants(Format::Svg));
        let csv = Outputs { formats: vec![Format::Csv] };
        assert!(csv.wants(Format::Csv) && !csv.wants(Format::Json));
    }
}
