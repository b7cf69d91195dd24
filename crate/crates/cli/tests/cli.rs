use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn hardy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hardy")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn run(command: &str, config: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![command, "--config", config, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    hardy(&args)
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../docs/schemas")
        .join(name);
    read_json(path)
}

/// Checks the `required` keys of `schema` (following local `$ref`s) on `value`.
fn check_required(value: &Value, node: &Value, root: &Value, at: &str) {
    if let Some(r) = node.get("$ref").and_then(Value::as_str) {
        let key = r.trim_start_matches("#/$defs/");
        return check_required(value, &root["$defs"][key], root, at);
    }
    if let Some(req) = node.get("required").and_then(Value::as_array) {
        for k in req {
            let k = k.as_str().unwrap();
            assert!(value.get(k).is_some(), "missing key {at}.{k}");
        }
    }
    if let (Some(props), Some(obj)) = (node.get("properties"), value.as_object()) {
        for (k, v) in obj {
            if let Some(sub) = props.get(k) {
                check_required(v, sub, root, &format!("{at}.{k}"));
            }
        }
    }
    if let (Some(items), Some(arr)) = (node.get("items"), value.as_array()) {
        for v in arr {
            check_required(v, items, root, at);
        }
    }
}

fn conforms(value: &Value, schema_name: &str) {
    let s = schema(schema_name);
    check_required(value, &s, &s, "");
}

const INTERVAL: &str = r#"{
    "domain": { "kind": "interval", "a": 0.0, "b": 1.0 },
    "partition": "all_dirichlet",
    "mesh": { "cells": 2000 },
    "seed": 3
}"#;

#[test]
fn estimate_writes_report_and_history() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", INTERVAL);
    let o = run("estimate", &cfg, dir.path(), &["--sequential"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(dir.path().join("report.json"));
    conforms(&report, "estimate.report.schema.json");
    let lambda = report["report"]["lambda_estimate"].as_f64().unwrap();
    assert!((0.25..=0.30).contains(&lambda), "{lambda}");
    assert_eq!(report["report"]["analytic_lower"].as_f64(), Some(0.25));
    assert_eq!(report["meta"]["seed"].as_u64(), Some(3));
    assert_eq!(report["meta"]["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(report["meta"]["mesh"][0]["nodes"].as_u64(), Some(2001));
    let history = std::fs::read_to_string(dir.path().join("history.csv")).unwrap();
    assert!(history.starts_with("iteration,quotient\n"));
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", INTERVAL);
    let o = run(
        "estimate",
        &cfg,
        dir.path(),
        &["--seed", "11", "--max-iter", "5", "--tol", "1e-3"],
    );
    assert_eq!(code(&o), 0);
    let report = read_json(dir.path().join("report.json"));
    assert_eq!(report["meta"]["seed"].as_u64(), Some(11));
    assert!(report["report"]["iterations"].as_u64().unwrap() <= 5);
    let first_hash = report["meta"]["config_hash"].clone();
    assert_eq!(
        code(&run(
            "estimate",
            &cfg,
            dir.path(),
            &["--seed", "12", "--max-iter", "5", "--tol", "1e-3"]
        )),
        0
    );
    assert_ne!(
        read_json(dir.path().join("report.json"))["meta"]["config_hash"],
        first_hash
    );
}

#[test]
fn random_starts_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "m.json",
        r#"{
            "domain": { "kind": "interval", "a": 0, "b": 1 },
            "partition": { "all_robin": 1.0 },
            "mesh": { "cells": 200 },
            "random_starts": 2
        }"#,
    );
    assert_eq!(code(&run("estimate", &cfg, dir.path(), &[])), 0);
    let report = read_json(dir.path().join("report.json"));
    conforms(&report, "estimate.report.schema.json");
    let ms = &report["multi_start"];
    assert_eq!(ms["estimates"].as_array().unwrap().len(), 3);
    assert!(ms["spread"].as_f64().unwrap() < 1e-6);
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let zero = write_config(
        dir.path(),
        "zero.json",
        r#"{ "domain": { "kind": "interval", "a": 0, "b": 1 }, "partition": "all_dirichlet", "mesh": { "cells": 0 } }"#,
    );
    assert_eq!(code(&run("estimate", &zero, dir.path(), &[])), 1);
    let unknown = write_config(
        dir.path(),
        "unknown.json",
        r#"{ "domain": { "kind": "interval", "a": 0, "b": 1 }, "partition": "all_dirichlet", "colour": 1 }"#,
    );
    assert_eq!(code(&run("estimate", &unknown, dir.path(), &[])), 1);
    let nested = write_config(
        dir.path(),
        "nested.json",
        r#"{ "domain": { "kind": "interval", "a": 0, "b": 1 }, "partition": "all_dirichlet", "solver": { "maxiter": 3 } }"#,
    );
    assert_eq!(code(&run("estimate", &nested, dir.path(), &[])), 1);
    assert_eq!(code(&hardy(&["estimate"])), 1);
    assert_eq!(code(&hardy(&["estimate", "--bogus"])), 1);
    assert_eq!(code(&hardy(&["frobnicate"])), 1);
    assert_eq!(code(&run("estimate", "/nonexistent/c.json", dir.path(), &[])), 1);
    let cfg = write_config(dir.path(), "c.json", INTERVAL);
    assert_eq!(code(&run("estimate", &cfg, dir.path(), &["--tol", "-1"])), 1);
    assert_eq!(code(&hardy(&["--help"])), 0);
}

#[test]
fn tampered_weight_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "t.json",
        r#"{
            "domain": { "kind": "interval", "a": 0, "b": 1 },
            "partition": "all_dirichlet",
            "mesh": { "cells": 200 },
            "fault": { "tamper_weight": 100.0 }
        }"#,
    );
    let o = run("estimate", &cfg, dir.path(), &[]);
    assert_eq!(code(&o), 2);
    assert_eq!(
        read_json(dir.path().join("report.json"))["report"]["violation"],
        Value::Bool(true)
    );
}

#[test]
fn verify_reports_seed_and_negation_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "v.json", r#"{ "lemma_cases": 40, "hardy_cases": 10 }"#);
    let o = run("verify", &cfg, dir.path(), &["--seed", "7"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("seed 7\n"));
    let v = read_json(dir.path().join("verify.json"));
    conforms(&v, "verify.report.schema.json");
    assert_eq!(v["meta"]["seed"].as_u64(), Some(7));
    assert!(v["suites"]
        .as_array()
        .unwrap()
        .iter()
        .all(|s| s["seed"].as_u64() == Some(7)));

    let neg = write_config(
        dir.path(),
        "n.json",
        r#"{ "lemma_cases": 5, "hardy_cases": 2, "fault": { "negate": true } }"#,
    );
    let o = run("verify", &neg, dir.path(), &[]);
    assert_eq!(code(&o), 2);
    let v = read_json(dir.path().join("verify.json"));
    assert_eq!(v["passed"], Value::Bool(false));
    let failure = &v["suites"][0]["failures"][0];
    assert!(failure["input"]["profile"].is_object(), "{failure}");
}

#[test]
fn sweep_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.json",
        r#"{ "domain": { "kind": "interval", "a": 0, "b": 1 }, "mesh": { "cells": 400 }, "sigmas": [10, 0.01, 1] }"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&run("sweep-sigma", &cfg, &a, &["--sequential"])), 0);
    assert_eq!(code(&run("sweep-sigma", &cfg, &b, &["--sequential"])), 0);
    let csv_a = std::fs::read(a.join("sweep.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(b.join("sweep.csv")).unwrap());
    assert_eq!(
        std::fs::read(a.join("sweep.json")).unwrap(),
        std::fs::read(b.join("sweep.json")).unwrap()
    );
    let text = String::from_utf8(csv_a).unwrap();
    assert!(text.starts_with("sigma,lambda,theorem2_bound\n0.01,"));
    let s = read_json(a.join("sweep.json"));
    conforms(&s, "sweep_sigma.report.schema.json");
    assert_eq!(s["nonincreasing"], Value::Bool(true));
    assert_eq!(s["certified"], Value::Bool(true));
}

#[test]
fn exterior_grid_has_branch_switch_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "e.json",
        r#"{ "dims": [2], "ps": [3.0], "sigmas": [1.0], "cells": 200, "log_span": 10 }"#,
    );
    assert_eq!(code(&run("exterior", &cfg, dir.path(), &["--sequential"])), 0);
    let text = std::fs::read_to_string(dir.path().join("exterior.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,p,sigma,R,rho_max,estimate,certificate,gap"));
    let sigmas: Vec<f64> = lines.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(sigmas.len(), 2);
    assert!((sigmas[0] - 1.0 / 9.0).abs() < 1e-15);
    let e = read_json(dir.path().join("exterior.json"));
    conforms(&e, "exterior.report.schema.json");
    assert_eq!(e["certified"], Value::Bool(true));
}

#[test]
fn concentrate_far_energy_decreases() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "k.json",
        r#"{
            "domain": { "kind": "interval", "a": 0, "b": 1 },
            "partition": { "pieces": ["dirichlet", { "robin": 1.0 }] },
            "levels": 4
        }"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&run("concentrate", &cfg, &a, &["--sequential"])), 0);
    assert_eq!(code(&run("concentrate", &cfg, &b, &["--sequential"])), 0);
    let csv_a = std::fs::read_to_string(a.join("concentrate.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read_to_string(b.join("concentrate.csv")).unwrap());
    assert!(csv_a.starts_with("level,quotient,near_energy,far_energy\n"));
    let c = read_json(a.join("concentrate.json"));
    conforms(&c, "concentrate.report.schema.json");
    assert_eq!(c["far_energy_decreasing"], Value::Bool(true));
    assert_eq!(c["meta"]["mesh"].as_array().unwrap().len(), 4);

    let robin_only = write_config(
        dir.path(),
        "r.json",
        r#"{ "domain": { "kind": "interval", "a": 0, "b": 1 }, "partition": { "all_robin": 1.0 } }"#,
    );
    assert_eq!(code(&run("concentrate", &robin_only, dir.path(), &[])), 1);
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = tempfile::tempdir().unwrap();
    let cfg = root.join("estimate_dirichlet_interval.json");
    let o = run("estimate", cfg.to_str().unwrap(), dir.path(), &["--max-iter", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}
