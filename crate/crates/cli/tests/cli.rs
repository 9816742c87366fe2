use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const EPS: &str = r#"{"n": 2, "dim": 1, "paths": [
    {"values": [[0.1], [1.0]], "weight": 1},
    {"values": [[-0.1], [-1.0]], "weight": 1}]}"#;
const LIMIT: &str = r#"{"n": 2, "dim": 1, "paths": [
    {"values": [[0.0], [1.0]], "weight": 0.5},
    {"values": [[0.0], [-1.0]], "weight": 0.5}]}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adapted-ot"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn put(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn distance_table_matches_golden_values() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (put(&dir, "eps.json", EPS), put(&dir, "lim.json", LIMIT));
    let o = run(&["--format", "csv", "distance", s(&a), s(&b)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "W,CW_fwd,CW_bwd,SCW,AW,ND,IW,ALDOUS,AW_ND_DELTA\n0.1,0.1,1.1,1.1,1.1,1.1,1.1,1.4,0\n"
    );
    // Unnormalized weights are reported, not silently accepted.
    assert!(stderr(&o).contains("normalized by 2"));
}

#[test]
fn same_file_gives_zeros() {
    let dir = TempDir::new().unwrap();
    let a = put(&dir, "eps.json", EPS);
    let o = run(&["distance", s(&a), s(&a)]);
    assert!(o.status.success());
    let text = stdout(&o);
    let values: Vec<&str> = text.lines().skip(1).map(|l| l.split_whitespace().last().unwrap()).collect();
    assert_eq!(values, vec!["0"; 9]);
}

#[test]
fn horizon_mismatch_exits_3() {
    let dir = TempDir::new().unwrap();
    let a = put(&dir, "eps.json", EPS);
    let b = put(&dir, "one.json", r#"{"n": 1, "dim": 1, "paths": [{"values": [[0]], "weight": 1}]}"#);
    let o = run(&["distance", s(&a), s(&b)]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("N = 2") && err.contains("N = 1"), "{err}");
}

#[test]
fn parse_error_exits_2() {
    let dir = TempDir::new().unwrap();
    let a = put(&dir, "bad.json", "{\"n\": 2,");
    let o = run(&["distance", s(&a), s(&a)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
}

#[test]
fn metric_flags_override_the_file() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (put(&dir, "eps.json", EPS), put(&dir, "lim.json", LIMIT));
    let o = run(&["-p", "2", "--format", "json", "distance", s(&a), s(&b)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["p"], 2);
    // W_2 between the two laws is again ε.
    assert_eq!(v["W"], 0.1);
    let bounded = run(&["--bounded", "--format", "json", "distance", s(&a), s(&b)]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&bounded)).unwrap();
    // The forced mismatch of the second coordinate now costs min(1, 2).
    assert_eq!(v["AW"], 0.6);
}

#[test]
fn distance_writes_lp_and_value_table() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (put(&dir, "eps.json", EPS), put(&dir, "lim.json", LIMIT));
    let lp = dir.path().join("aw.lp");
    let vt = dir.path().join("v.csv");
    let o = run(&["distance", s(&a), s(&b), "--dump-lp", s(&lp), "--value-table", s(&vt)]);
    assert!(o.status.success());
    let lp = fs::read_to_string(lp).unwrap();
    assert!(lp.contains("Minimize") && lp.trim_end().ends_with("End"));
    let vt = fs::read_to_string(vt).unwrap();
    assert!(vt.starts_with("t,x_node,y_node,V\n"));
    assert!(vt.ends_with("0,0,0,1.1\n"));
}

#[test]
fn stop_values() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (put(&dir, "eps.json", EPS), put(&dir, "lim.json", LIMIT));
    let panel = put(&dir, "panel.json", r#"{"family": "panel"}"#);
    let first_line = |o: &Output| stdout(o).lines().next().unwrap().to_string();

    let o = run(&["stop", s(&b), s(&panel)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(first_line(&o), "value   0.5");
    let o = run(&["stop", s(&a), s(&panel), "--oracle"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("value   0.25\noracle  0.25\ndelta   0\n"), "{text}");

    let constant = put(&dir, "c.json", r#"{"family": "constant", "params": {"c": 3.5}}"#);
    let o = run(&["stop", s(&a), s(&constant)]);
    assert_eq!(first_line(&o), "value   3.5");
}

#[test]
fn stop_reward_table_and_json() {
    let dir = TempDir::new().unwrap();
    let b = put(&dir, "lim.json", LIMIT);
    let table = put(
        &dir,
        "r.json",
        r#"{"convention": "1..N", "values": [
            {"prefix": [[0.0]], "value": 0.7},
            {"prefix": [[0.0], [1.0]], "value": 1.0},
            {"prefix": [[0.0], [-1.0]], "value": 0.0}]}"#,
    );
    let o = run(&["--format", "json", "stop", s(&b), s(&table)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["value"], 0.5);
    assert_eq!(v["convention"], "1..N");
    assert_eq!(v["rule"][0]["stop"], false);

    let missing = put(&dir, "m.json", r#"{"values": [{"prefix": [[0.0]], "value": 1}]}"#);
    assert_eq!(run(&["stop", s(&b), s(&missing)]).status.code(), Some(2));
}

#[test]
fn oracle_cap_exits_5() {
    let dir = TempDir::new().unwrap();
    let paths: Vec<String> = (0..21)
        .map(|k| format!(r#"{{"values": [[{k}], [0]], "weight": 1}}"#))
        .collect();
    let wide = put(&dir, "wide.json", &format!(r#"{{"n": 2, "dim": 1, "paths": [{}]}}"#, paths.join(",")));
    let panel = put(&dir, "panel.json", r#"{"family": "panel"}"#);
    assert!(run(&["stop", s(&wide), s(&panel)]).status.success());
    let o = run(&["stop", s(&wide), s(&panel), "--oracle"]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}

#[test]
fn converge_epsilon_reveal_is_weak_only() {
    let o = run(&["converge", "--family", "epsilon_reveal", "--steps", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(
        lines[0],
        "n,W,CW_fwd,CW_bwd,SCW,AW,ND,IW,ALDOUS,DV_panel,DV_lip1,DV_lip2,MOMENT_GAP"
    );
    assert!(lines[2].starts_with("1,0.1,0.1,1.1,1.1,1.1,1.1,1.1,1.4,0.25,"));
    assert!(stderr(&o).contains("classification: weak-only"));
}

#[test]
fn converge_vanishing_noise_is_adapted() {
    let o = run(&["converge", "--family", "vanishing_noise"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("classification: adapted"));
    assert_eq!(stdout(&o).lines().count(), 9);
}

#[test]
fn converge_zero_steps_is_header_only() {
    let o = run(&["converge", "--steps", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn converge_from_study_file_and_limit() {
    let dir = TempDir::new().unwrap();
    put(&dir, "m0.json", EPS);
    put(&dir, "m1.json", &EPS.replace("0.1", "0.01"));
    put(&dir, "lim.json", LIMIT);
    let study = put(
        &dir,
        "study.json",
        r#"{"family": "custom", "pattern": "m{n}.json", "limit": "lim.json", "steps": 2}"#,
    );
    let o = run(&["converge", s(&study)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.lines().nth(2).unwrap().starts_with("1,0.01,0.01,1.01,"), "{text}");

    let o = run(&["converge", "--family", "epsilon_reveal", "--limit"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["n"], 2);
    assert_eq!(v["paths"].as_array().unwrap().len(), 2);
}

#[test]
fn converge_json_report() {
    let o = run(&["--format", "json", "converge", "--steps", "3"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["family"], "epsilon_reveal");
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert_eq!(v["rows"][1]["values"][4], 1.1);
    assert_eq!(v["classification"], "weak-only");
}

#[test]
fn validate_reports() {
    let dir = TempDir::new().unwrap();
    let ok = put(&dir, "eps.json", EPS);
    let o = run(&["validate", s(&ok)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "OK\n");

    let bad = put(
        &dir,
        "bad.json",
        r#"{"n": 2, "dim": 1, "nodes": [
            {"id": 0, "parent": null, "value": null, "mass": 1.0},
            {"id": 1, "parent": 0, "value": [0.0], "mass": 0.5},
            {"id": 2, "parent": 0, "value": [1.0], "mass": 0.4},
            {"id": 3, "parent": 1, "value": [1.0], "mass": 0.5},
            {"id": 4, "parent": 2, "value": [1.0], "mass": 0.4}]}"#,
    );
    let o = run(&["validate", s(&bad)]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("node 0: mass 1 != children sum 0.9"));
    let o = run(&["--format", "json", "validate", s(&bad)]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["ok"], false);
    assert_eq!(v["violations"][0]["kind"], "mass_mismatch");

    let garbage = put(&dir, "g.json", "not json");
    assert_eq!(run(&["validate", s(&garbage)]).status.code(), Some(2));
}

#[test]
fn output_file_and_determinism() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("report.csv");
    let o = bin()
        .args(["converge", "--family", "binomial_perturb", "--steps", "3", "-o", s(&out)])
        .env("ADAPTED_OT_THREADS", "1")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let serial = fs::read(&out).unwrap();
    let parallel = bin()
        .args(["converge", "--family", "binomial_perturb", "--steps", "3"])
        .env("ADAPTED_OT_THREADS", "4")
        .output()
        .unwrap();
    assert_eq!(parallel.stdout, serial);
}
