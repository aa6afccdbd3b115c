//! Runs the verification checks and writes the manifest. The manifest is a
//! pure function of the configuration and seed; wall-clock timings go to a
//! separate file.

use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use serde::{Deserialize, Serialize};

use crate::checks::{run_check, CheckOutcome, VerifyConfig};
use crate::output::{num, write_json, Provenance, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub all_passed: bool,
    pub checks: Vec<CheckOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub check_id: String,
    pub seconds: f64,
}

pub struct VerifyRun {
    pub manifest: Manifest,
    pub timings: Vec<Timing>,
}

/// Runs the selected checks in order, calling `on_done` after each one.
pub fn run_verify(cfg: &VerifyConfig, seed: u64, mut on_done: impl FnMut(&CheckOutcome)) -> Result<VerifyRun> {
    let mut checks = Vec::new();
    let mut timings = Vec::new();
    for id in cfg.selected() {
        let start = Instant::now();
        let outcome = run_check(id, cfg, seed)?;
        timings.push(Timing { check_id: id.into(), seconds: start.elapsed().as_secs_f64() });
        on_done(&outcome);
        checks.push(outcome);
    }
    let all_passed = checks.iter().all(|c| c.passed);
    Ok(VerifyRun { manifest: Manifest { all_passed, checks }, timings })
}

impl Manifest {
    pub fn table(&self) -> Table {
        let mut t = Table::new(["check_id", "property", "passed", "statistic", "detail"]);
        for c in &self.checks {
            t.push(vec![c.check_id.clone(), c.property.clone(), c.passed.to_string(), num(c.statistic), c.detail.clone()]);
        }
        t
    }
}

/// Writes `manifest.json` and `timings.json` into `dir`.
pub fn write_manifest(dir: &Path, prov: &Provenance, run: &VerifyRun) -> Result<()> {
    write_json(&dir.join("manifest.json"), prov, &run.manifest)?;
    write_json(&dir.join("timings.json"), prov, &run.timings)
}

/// One line per check for terminal output.
pub fn status_line(c: &CheckOutcome) -> String {
    format!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.check_id, c.detail)
}
