use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lipnorm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lipnorm"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .output()
        .expect("run lipnorm")
}

fn report(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

#[test]
fn malformed_json_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), "{\n  \"shape\": [2, 1],\n  \"data\": [1.0,, 2]\n}").unwrap();
    let out = lipnorm(&["norm", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json") && err.contains("line 3"), "{err}");
}

#[test]
fn schema_violation_and_missing_file_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("short.json"), r#"{"shape": [2, 2], "data": [1.0]}"#).unwrap();
    assert_eq!(lipnorm(&["hs", "short.json"], dir.path()).status.code(), Some(2));
    assert_eq!(lipnorm(&["hs", "absent.json"], dir.path()).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2_and_help_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lipnorm(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(lipnorm(&["summing"], dir.path()).status.code(), Some(2));
    assert_eq!(lipnorm(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn scalar_product_has_unit_summing_norm() {
    let dir = tempfile::tempdir().unwrap();
    let gen = lipnorm(&["gen", "--kind", "scalar-product", "--n", "3"], dir.path());
    assert_eq!(gen.status.code(), Some(0));
    fs::write(dir.path().join("lambda.json"), &gen.stdout).unwrap();
    let r = report(&lipnorm(&["summing", "lambda.json", "--p", "1"], dir.path()));
    assert_eq!(r["tool"], "lipnorm");
    assert_eq!(r["command"], "summing");
    assert!((num(&r["result"]["certificate"]["constant"]) - 1.0).abs() < 1e-3);
    assert!(num(&r["result"]["report"]["certified_lower"]) >= 0.999);
}

#[test]
fn hs_matches_frobenius_norm_of_input() {
    let dir = tempfile::tempdir().unwrap();
    let gen = lipnorm(&["gen", "--dims", "2,3", "--m", "2", "--seed", "5"], dir.path());
    let op: Value = serde_json::from_slice(&gen.stdout).unwrap();
    let frob = op["data"].as_array().unwrap().iter().map(|x| num(x).powi(2)).sum::<f64>().sqrt();
    fs::write(dir.path().join("t.json"), &gen.stdout).unwrap();
    let r = report(&lipnorm(&["hs", "t.json"], dir.path()));
    assert!((num(&r["result"]["hs_norm"]) - frob).abs() <= 1e-12 * frob);
    assert!((num(&r["result"]["basis_lower"]) - frob).abs() <= 1e-9 * frob);
}

#[test]
fn json_out_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let gen = lipnorm(&["gen", "--dims", "2,2", "--seed", "1"], dir.path());
    fs::write(dir.path().join("t.json"), &gen.stdout).unwrap();
    let printed = lipnorm(&["norm", "t.json", "--seed", "4"], dir.path());
    let written = lipnorm(&["norm", "t.json", "--seed", "4", "--json-out", "r.json"], dir.path());
    assert_eq!(written.status.code(), Some(0));
    assert_eq!(fs::read(dir.path().join("r.json")).unwrap(), printed.stdout);
}

#[test]
fn restriction_bound_holds() {
    let dir = tempfile::tempdir().unwrap();
    let gen = lipnorm(&["gen", "--dims", "2,2,2", "--m", "2", "--seed", "9"], dir.path());
    fs::write(dir.path().join("t.json"), &gen.stdout).unwrap();
    let r = report(&lipnorm(&["restrict", "t.json", "--fix", "1:0.6,-0.8", "--p", "1", "--budget-rounds", "3"], dir.path()));
    assert_eq!(r["result"]["bound_holds"], true);
    let bad = lipnorm(&["restrict", "t.json", "--fix", "7:1,0"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn dnorm_bracket_is_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let gen = lipnorm(&["gen", "--kind", "mixed", "--dims", "2,2", "--m", "2", "--seed", "2"], dir.path());
    fs::write(dir.path().join("z.json"), &gen.stdout).unwrap();
    let r = report(&lipnorm(&["dnorm", "z.json", "--p", "2"], dir.path()));
    let lower = num(&r["result"]["lower"]["certified_lower"]);
    let upper = num(&r["result"]["upper"]["report"]["certified_upper"]);
    assert!(0.0 < lower && lower <= upper * (1.0 + 1e-9), "{lower} {upper}");
}

#[test]
fn verify_reports_all_properties() {
    let dir = tempfile::tempdir().unwrap();
    let r = report(&lipnorm(&["verify", "--trials", "1", "--seed", "3"], dir.path()));
    assert_eq!(r["result"]["all_passed"], true);
    assert!(r["result"]["properties"].as_array().unwrap().len() >= 20);
}
