//! End-to-end tests of the command-line front-end: exit codes, artifact
//! schemas, provenance envelopes, manifest checksums, and byte-stable
//! reruns, all against the installed binary.

use std::path::Path;
use std::process::{Command, Output};

use lostsales::report::sha256_hex;
use serde_json::Value;

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_lostsales")
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(binary()).args(args).output().expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

const TWO_POINT: &str = r#"{
  "demand": { "atoms": [0, 2], "probs": [0.5, 0.5], "unit": 1 },
  "c": 1.0,
  "h": 1.0,
  "lead_time": 2,
  "horizon": 4,
  "seed": 11,
  "rates": ["1/2"],
  "epsilons": [0.5]
}"#;

#[test]
fn constants_reports_envelope_and_m() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TWO_POINT);
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
        "constants",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&dir.path().join("out/constants.json"));
    assert_eq!(doc["artifact_version"], 1);
    assert_eq!(doc["root_seed"], 11);
    assert!(doc["config_sha256"].as_str().unwrap().len() == 64);
    assert_eq!(doc["report"]["m"], 16900);
    assert_eq!(doc["report"]["q_units"], 0);
    let theta = doc["report"]["thetas"][0]["theta"].as_f64().unwrap();
    assert!((theta - 1.0 / 48.0).abs() < 1e-12);
}

#[test]
fn exact_outputs_are_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TWO_POINT);
    for sub in ["a", "b"] {
        let out = run(&[
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().join(sub).to_str().unwrap(),
            "constants",
        ]);
        assert!(out.status.success());
    }
    let a = std::fs::read(dir.path().join("a/constants.json")).unwrap();
    let b = std::fs::read(dir.path().join("b/constants.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn missing_config_is_a_config_error() {
    let out = run(&["constants"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("requires --config"));
}

#[test]
fn malformed_and_unknown_field_configs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "{ not json");
    let out = run(&["--config", bad.to_str().unwrap(), "constants"]);
    assert_eq!(out.status.code(), Some(2));

    let unknown = write_config(
        dir.path(),
        r#"{ "demand": { "atoms": [0, 2], "probs": [0.5, 0.5], "unit": 1 }, "horizonn": 4 }"#,
    );
    let out = run(&["--config", unknown.to_str().unwrap(), "constants"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizonn"));
}

#[test]
fn exhausted_state_budget_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
          "demand": { "atoms": [0, 2], "probs": [0.5, 0.5], "unit": 1 },
          "lead_time": 2, "horizon": 4, "state_budget": 1
        }"#,
    );
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
        "dp",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn dp_reports_opt_and_saves_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
          "demand": { "atoms": [0, 2], "probs": [0.5, 0.5], "unit": 1 },
          "c": 1.0, "h": 1.0, "lead_time": 1, "horizon": 3, "keep_table": true
        }"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "dp",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&out_dir.join("dp.json"));
    // c/h = 1 puts the quantile at 0: never ordering is optimal and each of
    // the three penalized periods costs c E[D] = 1.
    let opt = doc["report"]["opt"].as_f64().unwrap();
    assert!((opt - 3.0).abs() < 1e-9, "opt = {opt}");
    let cap_diff = doc["report"]["telemetry"]["cap_rel_diff"].as_f64().unwrap();
    assert!(cap_diff < 1e-6);
    assert!(out_dir.join("dp_table.bin").exists());
}

#[test]
fn z_search_picks_zero_rate_at_unit_cost_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TWO_POINT);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "z-search",
    ]);
    assert!(out.status.success());
    let doc = read_json(&out_dir.join("zsearch.json"));
    assert_eq!(doc["report"]["z"], "0");
    let cost = doc["report"]["cost"].as_f64().unwrap();
    assert!((cost - 1.0).abs() < 1e-9, "stationary cost at z = 0 is c E[D] = 1, got {cost}");
}

#[test]
fn lindley_reports_supremum_and_tail_suite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
          "demand": { "atoms": [0, 2], "probs": [0.5, 0.5], "unit": 1 },
          "rates": ["1/2"], "k_max": 10, "mc_samples": 20000, "seed": 5
        }"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "lindley",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&out_dir.join("lindley.json"));
    assert_eq!(doc["report"]["all_pass"], true);
    let mean = doc["report"]["supremum"]["mean"].as_f64().unwrap();
    assert!((mean - 0.59574).abs() < 1e-3);
    assert!(doc["report"]["tail_suite"]["records"].as_array().unwrap().len() > 10);
}

#[test]
fn simulate_writes_cost_summary_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
          "demand": { "atoms": [0, 2], "probs": [0.5, 0.5], "unit": 1 },
          "lead_time": 1, "horizon": 6, "replications": 200, "seed": 3,
          "policy": { "kind": "base_stock", "S": 2 }
        }"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "simulate",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&out_dir.join("simulate.json"));
    assert!(doc["report"]["cost"]["mean"].as_f64().unwrap() >= 0.0);
    assert_eq!(doc["report"]["cost"]["reps"], 200);
    let csv = std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,I,x1,order,D,N,C");
    // One record per period 1..=T+L.
    assert_eq!(lines.count(), 7);
}

#[test]
fn gap_certifies_the_unit_cost_instance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
          "demand": { "atoms": [0, 2], "probs": [0.5, 0.5], "unit": 1 },
          "c": 1.0, "h": 1.0, "lead_time": 2, "panel_samples": 10000, "seed": 9
        }"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "gap",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&out_dir.join("gap.json"));
    assert_eq!(doc["report"]["pass"], true);
    assert_eq!(doc["report"]["coupling_violations"], 0);
}

#[test]
fn degenerate_gap_is_named_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
          "demand": { "atoms": [0, 2], "probs": [0.5, 0.5], "unit": 1 },
          "c": 4.0, "h": 1.0, "lead_time": 2, "seed": 9
        }"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "gap",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let doc = read_json(&out_dir.join("gap.json"));
    assert_eq!(doc["report"]["degenerate"], true);
    assert!(!doc["report"]["r_star"].as_str().unwrap().is_empty());
}

#[test]
fn ratio_table_emits_fixed_schema_with_recomputable_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
          "demand": { "atoms": [0, 2], "probs": [0.5, 0.5], "unit": 1 },
          "horizon": 4,
          "lead_times": [1, 2],
          "cost_pairs": [[1.0, 1.0], [4.0, 1.0]]
        }"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "ratio-table",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let raw = std::fs::read_to_string(out_dir.join("ratio_table.csv")).unwrap();
    assert!(raw.starts_with("L,c,h,demand_id,OPT,cost_pi_z,ratio\n"));
    let mut reader = csv::Reader::from_reader(raw.as_bytes());
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    // 2 lead times x 2 cost pairs of data, then the three summary rows.
    assert_eq!(rows.len(), 4 + 3);
    for row in &rows[..4] {
        let opt: f64 = row[4].parse().unwrap();
        let cost: f64 = row[5].parse().unwrap();
        let ratio: f64 = row[6].parse().unwrap();
        assert!(ratio >= 1.0 - 1e-12);
        assert!((ratio - cost / opt).abs() < 1e-9);
    }
    assert_eq!(&rows[4][0], "summary");
    assert_eq!(&rows[4][3], "fraction_under_2");
    let doc = read_json(&out_dir.join("ratio_table.json"));
    assert_eq!(doc["report"]["cells"].as_array().unwrap().len(), 4);
}

#[test]
fn verify_subset_passes_with_machine_readable_report() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "--out",
        out_dir.to_str().unwrap(),
        "--seed",
        "123",
        "verify",
        "--criteria",
        "4,5,11",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 3);
    let doc = read_json(&out_dir.join("verify.json"));
    assert_eq!(doc["root_seed"], 123);
    assert_eq!(doc["report"]["passed"], 3);
    assert_eq!(doc["report"]["failed"], 0);
    let ids: Vec<u64> = doc["report"]["criteria"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["id"].as_u64().unwrap())
        .collect();
    assert_eq!(ids, vec![4, 5, 11]);
}

#[test]
fn verify_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "--out",
        dir.path().join("out").to_str().unwrap(),
        "verify",
        "--criteria",
        "99",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn manifest_records_checksums_that_match_the_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TWO_POINT);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "constants",
    ]);
    assert!(out.status.success());
    let manifest = read_json(&out_dir.join("constants.manifest.json"));
    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(!outputs.is_empty());
    for record in outputs {
        let bytes = std::fs::read(record["path"].as_str().unwrap()).unwrap();
        assert_eq!(record["sha256"].as_str().unwrap(), sha256_hex(&bytes));
        assert_eq!(record["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
    assert_eq!(manifest["root_seed"], 11);
    assert_eq!(manifest["command"], "constants");
}
