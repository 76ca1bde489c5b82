use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rodtopo")).args(args).output().unwrap()
}

fn json(args: &[&str]) -> (Value, i32) {
    let mut all = vec!["--format", "json"];
    all.extend_from_slice(args);
    let out = run(&all);
    let v =
        serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)));
    (v, out.status.code().unwrap())
}

fn scratch(name: &str, body: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn counterexample_analysis() {
    let path = data("counterexample.json");
    let (v, code) = json(&["analyze", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["end"]["topology"]["label"], "S¹×S²");
    assert_eq!(v["end"]["pi1"]["free_rank"], 1);
    let horizons: Vec<&str> =
        v["horizons"].as_array().unwrap().iter().map(|h| h["topology"]["label"].as_str().unwrap()).collect();
    assert_eq!(horizons, ["S³", "S³"]);
    let text = String::from_utf8(run(&["classify", path.to_str().unwrap()]).stdout).unwrap();
    assert!(text.starts_with("S⁴"), "{text}");
}

#[test]
fn plumbing_chain_decomposition() {
    let path = data("plumbing_chain.json");
    let (v, code) = json(&["decompose", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    for key in ["J", "N1", "N2"] {
        assert_eq!(v["counts"][key], 1, "{key}");
    }
    let text = String::from_utf8(run(&["decompose", path.to_str().unwrap()]).stdout).unwrap();
    assert!(text.contains("[L(5,2) e1, L(2,1) e0]"), "{text}");
    assert!(text.contains("(1,0,2)"));
}

#[test]
fn normal_form_of_columns() {
    let path = data("hermite_columns.json");
    let (v, code) = json(&["hnf", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["q"], serde_json::json!([[1, 1, 0], [0, -1, 0], [0, 1, 1]]));
}

#[test]
fn fillin_chain() {
    let path = scratch("pair.json", r#"{"v": [1, 0], "w": [2, 5]}"#);
    let out = run(&["fillin", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("(1,0)") && text.trim_end().ends_with("(2,5)"), "{text}");
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["analyze", "/nonexistent/diagram.json"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    let bad = scratch("bad.json", r#"{"n": 2, "shape": "half_plane", "rods": []}"#);
    assert_eq!(run(&["validate", bad.to_str().unwrap()]).status.code(), Some(1));
    let torus = scratch(
        "torus.json",
        r#"{"n": 3, "shape": "disk", "rods": [{"kind": "axis", "v": [1, 0, 0]}, {"kind": "axis", "v": [0, 1, 0]}]}"#,
    );
    let out = run(&["classify", torus.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not simply connected"));
    let singular = scratch(
        "singular.json",
        r#"{"n": 2, "shape": "half_plane", "rods": [{"kind": "axis", "v": [1, 0]}, {"kind": "axis", "v": [1, 2]}]}"#,
    );
    assert_eq!(run(&["analyze", singular.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn output_is_reproducible() {
    let path = data("plumbing_chain.json");
    for cmd in ["analyze", "decompose", "pi1"] {
        let a = run(&["--format", "json", cmd, path.to_str().unwrap()]);
        let b = run(&["--format", "json", cmd, path.to_str().unwrap()]);
        assert_eq!(a.stdout, b.stdout, "{cmd}");
    }
}

#[test]
fn model_verify_single_horizon() {
    let path = data("single_horizon.json");
    let csv = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("tension.csv");
    let out = run(&["model-verify", path.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(std::fs::read_to_string(&csv).unwrap().lines().count() > 10);
}
