//! End-to-end runs of the `offset-risk` binary on small configurations.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use offset_risk::output::Table;
use serde_json::Value;

fn run(dir: &Path, args: &[&str], config: &str) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_offset-risk"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .env("OFFSET_RISK_THREADS", "2")
        .output()
        .unwrap()
}

const SMALL_VERIFY: &str = r#"{
  "verify": {
    "checks": ["star_offset", "self_localization", "sparse_identity", "duality", "mirror_descent"],
    "star_instances": 40,
    "self_localization_setups": 200,
    "sparse_identity_cases": 10,
    "duality_instances": 20,
    "mirror_instances": 3
  }
}"#;

#[test]
fn negative_control_fails_the_star_check_and_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["verify", "--seed", "1"],
        r#"{"verify": {"checks": ["star_offset"], "star_instances": 50, "star_gamma": 10.0}}"#,
    );
    assert_eq!(out.status.code(), Some(1));
    let manifest: Value = serde_json::from_slice(&fs::read(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    let check = &manifest["result"]["checks"][0];
    assert_eq!(check["check_id"], "star_offset");
    assert_eq!(check["passed"], false);
    assert_eq!(manifest["result"]["all_passed"], false);
}

#[test]
fn passing_checks_exit_zero_and_manifests_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run(a.path(), &["verify", "--seed", "9"], SMALL_VERIFY);
    let rb = run(b.path(), &["verify", "--seed", "9"], SMALL_VERIFY);
    assert_eq!(ra.status.code(), Some(0), "{}", String::from_utf8_lossy(&ra.stderr));
    assert_eq!(rb.status.code(), Some(0));
    let ma = fs::read(a.path().join("out/manifest.json")).unwrap();
    let mb = fs::read(b.path().join("out/manifest.json")).unwrap();
    assert_eq!(ma, mb);
    assert!(a.path().join("out/timings.json").is_file());
}

#[test]
fn aggregate_writes_provenance_tagged_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["aggregate", "--seed", "5"], r#"{"n_grid": [16, 32, 64], "replicates": 20}"#);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("out");

    let (prov, trials) = Table::from_csv(&fs::read_to_string(o.join("aggregate_trials.csv")).unwrap()).unwrap();
    let prov = prov.unwrap();
    assert_eq!(prov.seed, 5);
    assert_eq!(prov.config_hash.len(), 64);
    assert_eq!(trials.columns, ["estimator", "n", "replicate", "excess_risk"]);
    assert_eq!(trials.rows.len(), 3 * 3 * 20);

    let json: Value = serde_json::from_str(&fs::read_to_string(o.join("aggregate.json")).unwrap()).unwrap();
    assert_eq!(json["provenance"]["config_hash"], prov.config_hash.as_str());
    let svg = fs::read_to_string(o.join("aggregate_rate.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 6);
    assert!(svg.contains(&prov.config_hash));
}

#[test]
fn format_flag_restricts_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["mirror", "--format", "csv", "--seed", "2"],
        r#"{"instance": {"truth_ladder": {"support": 4, "levels": 2}}, "mirror": {"epsilon": 0.05, "step": 0.01}}"#,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let files: Vec<String> =
        fs::read_dir(dir.path().join("out")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(files, ["mirror_path.csv"]);
}

#[test]
fn complexity_and_concentration_commands_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"n_grid": [8, 16], "replicates": 1000, "instance": {"truth_ladder": {"support": 4, "levels": 2}},
                 "concentration": {"n": 8, "lambda_points": 3}}"#;
    for cmd in ["complexity", "concentration"] {
        let out = run(dir.path(), &[cmd], cfg);
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let (_, t) = Table::from_csv(&fs::read_to_string(dir.path().join("out/complexity.csv")).unwrap()).unwrap();
    assert_eq!(t.rows.len(), 2);
    let (_, m) = Table::from_csv(&fs::read_to_string(dir.path().join("out/concentration_mgf.csv")).unwrap()).unwrap();
    assert_eq!(m.rows.len(), 3);
    let svg = fs::read_to_string(dir.path().join("out/concentration_mgf.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 3);
}

#[test]
fn file_referenced_instance_is_resolved_next_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("inst.json"),
        r#"{"atoms": [{"x": [0.0], "y": 0.3}, {"x": [1.0], "y": -0.2}], "probs": [0.5, 0.5], "b": 1.0,
            "dictionary": [[0.1, 0.0], [0.2, -0.1]]}"#,
    )
    .unwrap();
    let out = run(
        dir.path(),
        &["aggregate", "--format", "json"],
        r#"{"instance": {"file": "inst.json"}, "n_grid": [8, 16], "replicates": 5}"#,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/aggregate.json")).unwrap()).unwrap();
    // row 1 misses each response by 0.1, row 0 by 0.2
    assert_eq!(json["result"]["gstar_index"], 1);
}

#[test]
fn invalid_configuration_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["aggregate"], r#"{"n_grid": [64, 32]}"#);
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), &["aggregate"], r#"{"instance": {"file": "missing.json"}}"#);
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), &["aggregate"], r#"{"unknown_field": 1}"#);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("out"), "a file, not a directory").unwrap();
    let out = run(dir.path(), &["aggregate"], r#"{"n_grid": [8, 16], "replicates": 2}"#);
    assert_eq!(out.status.code(), Some(2));
}
