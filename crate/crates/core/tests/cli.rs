//! End-to-end runs of the `cdlab` binary.

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn cdlab() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cdlab"));
    c.env_remove("CDLAB_DEFAULT_N");
    c
}

fn run_stdin(mut cmd: Command, input: &str) -> Output {
    let mut child = cmd.stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn write_request(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

const COUNTEREXAMPLE: &str = r#"{"command":"hypercontract","order":2,"N":32,
  "shift":{"prefix":[0.7211102550927979],"tail":{"num":[0,1],"den":[1,1],"offset":2}}}"#;

#[test]
fn failing_verdict_still_exits_zero() {
    let out = run_stdin(cdlab(), COUNTEREXAMPLE);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["verdict"], false);
    assert_eq!(v["defect"]["verdicts"], serde_json::json!([true, false]));
}

#[test]
fn schema_violation_exits_2_with_path() {
    let out = run_stdin(cdlab(), r#"{"command":"shields","a":{"preset":"hardy","bogus":1},"b":{"preset":"hardy"}}"#);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("a.bogus"));
    let out = run_stdin(cdlab(), "[1, 2");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn semantic_violation_exits_3() {
    let out = run_stdin(cdlab(), r#"{"command":"hypercontract","shift":{"prefix":[0.5,-0.1]},"order":1,"N":16}"#);
    assert_eq!(out.status.code(), Some(3));
    let out = run_stdin(cdlab(), r#"{"command":"hypercontract","shift":{"preset":"hardy"},"order":1,"N":5000}"#);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn numerical_failure_exits_4() {
    let out = run_stdin(cdlab(), r#"{"command":"ex-commutator","x":{"entries":[1.0]},"N":16}"#);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn io_failure_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = cdlab().arg(&missing).output().unwrap();
    assert_eq!(out.status.code(), Some(5));
    let req = write_request(dir.path(), "req.json", COUNTEREXAMPLE);
    let out = cdlab().arg(&req).arg("--out").arg(dir.path().join("no/such/dir/out.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn writes_report_and_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let req = write_request(
        dir.path(),
        "curv.json",
        r#"{"command":"curvature","kernel":{"preset":"szego","power":2},"radii":{"kind":"boundary_dyadic","k_min":3,"k_max":12}}"#,
    );
    let (out_path, csv_path) = (dir.path().join("r.json"), dir.path().join("r.csv"));
    let out = cdlab().arg(&req).arg("--out").arg(&out_path).arg("--csv").arg(&csv_path).arg("--quiet").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(report["closed_form_match"], true);
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("r,value,method\n"));
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn reduce_example() {
    let out = run_stdin(
        cdlab(),
        r#"{"command":"reduce","operator":{"N":16,"blocks":[[{"shift":{"preset":"hardy"}},"zero"],["zero",{"shift":{"preset":"hardy","scale":0.5}}]]}}"#,
    );
    let v = json(&out);
    assert_eq!(v["reducible"], true);
    assert_eq!(v["detector"], "unit-norm-block");
}

#[test]
fn env_default_n() {
    let mut cmd = cdlab();
    cmd.env("CDLAB_DEFAULT_N", "20");
    let out = run_stdin(cmd, r#"{"command":"hypercontract","shift":{"preset":"bergman"},"order":2}"#);
    assert_eq!(json(&out)["N"], 20);
    let mut cmd = cdlab();
    cmd.env("CDLAB_DEFAULT_N", "lots");
    let out = run_stdin(cmd, r#"{"command":"hypercontract","shift":{"preset":"bergman"},"order":2}"#);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let req = r#"{"command":"contraction","random_ex48":{"seed":3,"instances":40,"k_max":4},"N":16}"#;
    let dir = tempfile::tempdir().unwrap();
    let path = write_request(dir.path(), "ex48.json", req);
    let mut seen = Vec::new();
    for threads in ["1", "3", "1"] {
        let csv = dir.path().join(format!("t{threads}-{}.csv", seen.len()));
        let out = cdlab().arg(&path).arg("--threads").arg(threads).arg("--csv").arg(&csv).output().unwrap();
        assert_eq!(out.status.code(), Some(0));
        seen.push((out.stdout, std::fs::read(&csv).unwrap()));
    }
    assert!(seen.windows(2).all(|p| p[0] == p[1]));
    assert_eq!(serde_json::from_slice::<serde_json::Value>(&seen[0].0).unwrap()["disagreements"], 0);
}

#[test]
fn output_paths_inside_request() {
    let dir = tempfile::tempdir().unwrap();
    let (report, csv) = (dir.path().join("in.json"), dir.path().join("in.csv"));
    let req = serde_json::json!({
        "command": "shields",
        "a": {"preset": "hardy"},
        "b": {"preset": "bergman"},
        "horizon": 64,
        "output": {"report": report, "csv": csv},
    });
    let out = run_stdin(cdlab(), &req.to_string());
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["verdict"], "similar-consistent");
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("horizon,sup_ratio,inf_ratio\n"));
    let bad = r#"{"command":"shields","a":{"preset":"hardy"},"b":{"preset":"hardy"},"output":{"html":"x"}}"#;
    assert_eq!(run_stdin(cdlab(), bad).status.code(), Some(2));
}
