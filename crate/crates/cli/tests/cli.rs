use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use toeplitz_maxdet::SymMatrix;

fn fixture(name: &str) -> String {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.push("tests/fixtures");
    p.push(name);
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toeplitz-maxdet"))
        .args(args)
        .stdin(Stdio::null())
        .output()
        .unwrap()
}

fn run_stdin(args: &[&str], input: &str) -> Output {
    use std::io::Write;
    let mut child = Command::new(env!("CARGO_BIN_EXE_toeplitz-maxdet"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn json_lines(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn single(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let mut lines = json_lines(out);
    assert_eq!(lines.len(), 1);
    lines.remove(0)
}

fn matrix(v: &Value) -> SymMatrix {
    let rows: Vec<Vec<f64>> = serde_json::from_value(v.clone()).unwrap();
    SymMatrix::from_rows(&rows).unwrap()
}

#[test]
fn classify_lists_primary_and_relaxed_forms() {
    let v = single(&run_stdin(&["classify"], r#"{"n": 4, "data": {"1": 0.5, "3": -0.2}}"#));
    let classes: Vec<&str> = v["classes"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    assert_eq!(classes, ["P2(k=1,r=3)", "P3(k=1)"]);
    assert_eq!(v["relaxed"].as_array().unwrap().len(), 2);

    let v = single(&run(&["classify", &fixture("five_by_five.json")]));
    assert_eq!(v["classes"], serde_json::json!(["General"]));
}

#[test]
fn complete_five_by_five() {
    let v = single(&run(&["complete", "--verify", &fixture("five_by_five.json")]));
    let x = matrix(&v["completion"]);
    assert!((x.get(0, 2) - 0.3113).abs() < 5e-5);
    assert!((x.get(1, 3) - 0.4247).abs() < 5e-5);
    assert_eq!(v["toeplitz"], false);
    assert_eq!(v["method"], "newton");
    assert_eq!(v["verify"]["agrees"], true);

    // Free entries are 1-based.
    let first = &v["free_entries"][0];
    assert_eq!((first["i"].as_u64(), first["j"].as_u64()), (Some(1), Some(3)));

    // Re-derive the certificate from the printed completion.
    let inv = x.inverse().unwrap();
    let cert = [(0, 2), (1, 3), (2, 4)].iter().map(|&(i, j)| inv.get(i, j).abs()).fold(0.0, f64::max);
    let reported = v["certificate_residual"].as_f64().unwrap();
    assert!(cert <= 2.0 * reported.max(1e-16 * inv.max_abs()), "{cert} vs {reported}");
}

#[test]
fn output_is_deterministic() {
    let a = run(&["complete", &fixture("five_by_five.json")]);
    let b = run(&["complete", &fixture("five_by_five.json")]);
    assert_eq!(a.stdout, b.stdout);
    let a = run(&["demo", "--seed", "7"]);
    let b = run(&["demo", "--seed", "7"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn sd_probe_at_pi() {
    let v = single(&run(&["sd", &fixture("four_cycle_pi.json")]));
    assert_eq!(v["verdict"], "SdAtLeastTwo");
    assert_eq!(v["rank_x"], 2);
    assert_eq!(v["exposing_rank_bound"], 1);
}

#[test]
fn path_emits_points_then_limit() {
    let out = run(&["path", "--alpha0", "0.5", &fixture("four_cycle_pi.json")]);
    assert!(out.status.success());
    let lines = json_lines(&out);
    let (limit, points) = lines.split_last().unwrap();
    assert_eq!(limit["record"], "limit");
    assert_eq!(limit["free_positions"], serde_json::json!([[1, 3], [2, 4]]));
    assert!(points.iter().all(|p| p["record"] == "point"));
    let alphas: Vec<f64> = points.iter().map(|p| p["alpha"].as_f64().unwrap()).collect();
    assert_eq!(alphas[0], 0.5);
    assert!(alphas.windows(2).all(|w| w[1] < w[0]));

    // theta = pi: x(alpha) = (sqrt(alpha (alpha + 2)) - 1 - alpha) / 2.
    for p in points {
        let a = p["alpha"].as_f64().unwrap();
        let want = 0.5 * ((a * (a + 2.0)).sqrt() - 1.0 - a);
        assert!((p["free"][0].as_f64().unwrap() - want).abs() < 1e-9);
    }
}

#[test]
fn exit_codes() {
    let out = run(&["complete", &fixture("infeasible.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["kind"], "not_strictly_feasible");

    let out = run(&["sd", "--alpha0", "1e-9", &fixture("four_cycle_pi.json")]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json_lines(&out)[0]["verdict"], "Inconclusive");

    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["kind"], "usage");

    assert_eq!(run(&["--rho", "2", "demo"]).status.code(), Some(1));
    assert_eq!(run_stdin(&["complete"], "{not json").status.code(), Some(1));
    assert_eq!(run(&["complete", "/nonexistent/input.json"]).status.code(), Some(1));
    let out = run_stdin(&["classify"], r#"{"n": 4, "data": {"01": 0.5}}"#);
    assert_eq!(out.status.code(), Some(1));

    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn batch_keeps_input_order() {
    let serial = run(&["complete", &fixture("batch.jsonl")]);
    let parallel = run(&["complete", "--jobs", "4", &fixture("batch.jsonl")]);
    assert_eq!(serial.stdout, parallel.stdout);
    assert_eq!(parallel.status.code(), Some(2));

    let lines = json_lines(&parallel);
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0]["n"], 3);
    assert_eq!(lines[1]["kind"], "not_strictly_feasible");
    assert_eq!(lines[2]["n"], 5);
    assert_eq!(lines[3]["class"], "P1(k=2,r=2)");

    // Commands without batch support reject several inputs.
    assert_eq!(run(&["path", &fixture("batch.jsonl")]).status.code(), Some(1));
}

#[test]
fn golden_outputs() {
    let out = run(&["bezout", &fixture("bezout.json")]);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        include_str!("fixtures/bezout.golden.json")
    );
    let out = run(&["bezout", "--output", "text", &fixture("bezout.json")]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), include_str!("fixtures/bezout.golden.txt"));
}

#[test]
fn gs_invert_round_trip() {
    let v = single(&run_stdin(&["gs-invert"], r#"{"first_column": [2.0, -1.0]}"#));
    let inv = matrix(&v["inverse"]);
    let t = matrix(&v["toeplitz"]);
    assert!(inv.get(0, 0) == 2.0 && inv.get(0, 1) == -1.0);
    assert!((t.get(0, 0) - 2.0 / 3.0).abs() < 1e-15 && (t.get(0, 1) - 1.0 / 3.0).abs() < 1e-15);

    let out = run_stdin(&["gs-invert"], r#"{"first_column": [-1.0, 0.5]}"#);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn psd_complete_cycle_has_full_rank_limit() {
    let v = single(&run(&["psd-complete", &fixture("four_cycle_pi.json")]));
    assert_eq!(v["rank"], 2);
    assert_eq!(v["toeplitz"], true);
    assert_eq!(v["data_mismatch"], 0.0);
    let x = matrix(&v["completion"]);
    assert!((x.get(0, 2) + 0.5).abs() < 1e-6);
}

#[test]
fn demo_passes_and_renders_text() {
    let out = run(&["demo", "--output", "text"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("pass: true"));
    assert!(!text.contains("pass: false"));
    assert!(text.contains("  - detail:"));
}
