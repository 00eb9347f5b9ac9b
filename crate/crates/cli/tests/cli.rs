use std::path::{Path, PathBuf};
use std::process::Command;

use luequiv_cli::report::VerdictReport;
use serde_json::{json, Value};
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn luequiv(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_luequiv")).args(args).output().expect("binary runs");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

/// `((row, col), (re, im))`.
type Entry = ((usize, usize), (f64, f64));

fn state_doc(n: usize, entries: &[Entry]) -> Value {
    let d = n * n;
    let mut m = vec![vec![json!([0.0, 0.0]); d]; d];
    for &((i, j), (re, im)) in entries {
        m[i][j] = json!([re, im]);
    }
    json!({ "schema_version": 1, "local_dim": n, "matrix": m })
}

fn diagonal(n: usize, values: &[f64]) -> Value {
    let entries: Vec<_> = values.iter().enumerate().map(|(i, &x)| ((i, i), (x, 0.0))).collect();
    state_doc(n, &entries)
}

fn write(dir: &TempDir, name: &str, doc: &Value) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, serde_json::to_string(doc).unwrap()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn counterexample(dir: &TempDir) -> (PathBuf, PathBuf) {
    (
        write(dir, "a.json", &diagonal(2, &[0.5, 0.5, 0.0, 0.0])),
        write(dir, "b.json", &diagonal(2, &[0.5, 0.0, 0.5, 0.0])),
    )
}

fn mixed_state(dir: &TempDir) -> PathBuf {
    let doc = state_doc(
        2,
        &[
            ((0, 0), (0.4, 0.0)),
            ((1, 1), (0.3, 0.0)),
            ((2, 2), (0.2, 0.0)),
            ((3, 3), (0.1, 0.0)),
            ((0, 1), (0.05, 0.02)),
            ((1, 0), (0.05, -0.02)),
            ((1, 3), (0.0, -0.04)),
            ((3, 1), (0.0, 0.04)),
            ((0, 2), (0.0, 0.03)),
            ((2, 0), (0.0, -0.03)),
        ],
    );
    write(dir, "mixed.json", &doc)
}

#[test]
fn validate_accepts_maximally_mixed_state() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "mm.json", &diagonal(2, &[0.25; 4]));
    let run = luequiv(&["validate", s(&p)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
}

#[test]
fn validate_names_the_measured_trace() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "t2.json", &diagonal(2, &[0.5; 4]));
    let run = luequiv(&["validate", s(&p)]);
    assert_eq!(run.code, 7);
    assert!(run.stderr.contains("trace = 2"), "{}", run.stderr);
    let run = luequiv(&["--json", "validate", s(&p)]);
    let doc: Value = serde_json::from_str(&run.stdout).unwrap();
    assert_eq!(doc["valid"], json!(false));
    assert_eq!(doc["exit_code"], json!(7));
}

#[test]
fn validate_exit_codes_for_malformed_inputs() {
    let dir = TempDir::new().unwrap();
    let truncated = dir.path().join("truncated.json");
    std::fs::write(&truncated, r#"{"schema_version": 1, "local_dim": 2, "matrix": [[[0.5,"#).unwrap();
    assert_eq!(luequiv(&["validate", s(&truncated)]).code, 4);

    let mut future = diagonal(2, &[0.25; 4]);
    future["schema_version"] = json!(2);
    assert_eq!(luequiv(&["validate", s(&write(&dir, "v2.json", &future))]).code, 4);

    let ragged = json!({ "schema_version": 1, "local_dim": 1, "matrix": [[[1.0, 0.0]], []] });
    assert_eq!(luequiv(&["validate", s(&write(&dir, "ragged.json", &ragged))]).code, 4);

    let mut wrong_dim = diagonal(2, &[0.25; 4]);
    wrong_dim["local_dim"] = json!(3);
    let p = write(&dir, "dim.json", &wrong_dim);
    assert_eq!(luequiv(&["validate", s(&p)]).code, 5);

    let skew = state_doc(2, &[((0, 0), (1.0, 0.0)), ((0, 1), (0.3, 0.0))]);
    assert_eq!(luequiv(&["validate", s(&write(&dir, "skew.json", &skew))]).code, 6);

    let negative = diagonal(2, &[0.75, 0.5, -0.25, 0.0]);
    assert_eq!(luequiv(&["validate", s(&write(&dir, "neg.json", &negative))]).code, 8);

    let missing = dir.path().join("missing.json");
    assert_eq!(luequiv(&["validate", s(&missing)]).code, 3);
}

#[test]
fn no_validate_skips_trace_check() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "t2.json", &diagonal(2, &[0.5; 4]));
    assert_eq!(luequiv(&["--no-validate", "validate", s(&p)]).code, 0);
}

#[test]
fn fingerprint_of_bell_state() {
    let dir = TempDir::new().unwrap();
    let bell = state_doc(
        2,
        &[((0, 0), (0.5, 0.0)), ((0, 3), (0.5, 0.0)), ((3, 0), (0.5, 0.0)), ((3, 3), (0.5, 0.0))],
    );
    let p = write(&dir, "bell.json", &bell);
    let run = luequiv(&["--json", "fingerprint", s(&p)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let doc: Value = serde_json::from_str(&run.stdout).unwrap();
    for j in doc["signature"]["power_traces"].as_array().unwrap() {
        assert!((j.as_f64().unwrap() - 1.0).abs() < 1e-12);
    }
    let word = doc["signature"]["balanced_words"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["key"] == "L:(1,1)(1,1)")
        .expect("word present");
    assert!((word["value"][0].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!(word["value"][1].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn fingerprint_block_invariant_and_determinism() {
    let dir = TempDir::new().unwrap();
    let (a, _) = counterexample(&dir);
    let first = luequiv(&["--json", "fingerprint", s(&a)]);
    let second = luequiv(&["--json", "fingerprint", s(&a)]);
    assert_eq!(first.code, 0);
    assert_eq!(first.stdout, second.stdout);
    let doc: Value = serde_json::from_str(&first.stdout).unwrap();
    let entry = doc["signature"]["block_invariants"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["key"] == "L:{1,2}:(1)(2)")
        .expect("block invariant present");
    assert!((entry["value"][0].as_f64().unwrap() - 2.0).abs() < 1e-12);
    let text = luequiv(&["fingerprint", s(&a)]);
    assert!(text.stdout.contains("L:{1,2}:(1)(2) = 2+0i"), "{}", text.stdout);
}

#[test]
fn fingerprint_budget_exit_code() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "mm3.json", &diagonal(3, &[1.0 / 9.0; 9]));
    assert_eq!(luequiv(&["--tau-cap", "9", "fingerprint", s(&p)]).code, 10);
    assert_eq!(luequiv(&["fingerprint", s(&p)]).code, 0);
}

#[test]
fn compare_counterexample_names_witness() {
    let dir = TempDir::new().unwrap();
    let (a, b) = counterexample(&dir);
    let run = luequiv(&["--json", "compare", s(&a), s(&b)]);
    assert_eq!(run.code, 1, "{}", run.stderr);
    let report: VerdictReport = serde_json::from_str(&run.stdout).unwrap();
    assert_eq!(report.outcome, "NotEquivalent");
    assert!(report.certificate.is_none());
    let w = report.witness.expect("witness");
    assert_eq!(w.invariant, "L:{1,2}:(1)(2)");
    assert!((w.first.re - 2.0).abs() < 1e-12 && (w.second.re - 4.0).abs() < 1e-12);
    assert_eq!(report.inputs.len(), 2);
    assert_eq!(report.inputs[0].sha256.len(), 64);
}

#[test]
fn compare_state_with_itself() {
    let dir = TempDir::new().unwrap();
    let p = mixed_state(&dir);
    assert_eq!(luequiv(&["compare", s(&p), s(&p)]).code, 0);
}

#[test]
fn compare_dimension_mismatch() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", &diagonal(2, &[0.25; 4]));
    let b = write(&dir, "b.json", &diagonal(3, &[1.0 / 9.0; 9]));
    assert_eq!(luequiv(&["compare", s(&a), s(&b)]).code, 5);
}

#[test]
fn orbit_compare_certify_round_trip() {
    let dir = TempDir::new().unwrap();
    let p = mixed_state(&dir);
    let out1 = dir.path().join("o1.json");
    let out2 = dir.path().join("o2.json");
    let pair = dir.path().join("pair.json");
    let run = luequiv(&["--seed", "11", "orbit", s(&p), "--out", s(&out1), "--unitaries-out", s(&pair)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(luequiv(&["--seed", "11", "orbit", s(&p), "--out", s(&out2)]).code, 0);
    assert_eq!(std::fs::read(&out1).unwrap(), std::fs::read(&out2).unwrap());
    let pair_doc: Value = serde_json::from_slice(&std::fs::read(&pair).unwrap()).unwrap();
    assert_eq!(pair_doc["seed"], json!(11));

    let before: Value = serde_json::from_str(&luequiv(&["--json", "fingerprint", s(&p)]).stdout).unwrap();
    let after: Value = serde_json::from_str(&luequiv(&["--json", "fingerprint", s(&out1)]).stdout).unwrap();
    let pt = |d: &Value| -> Vec<f64> {
        d["signature"]["power_traces"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
    };
    for (x, y) in pt(&before).iter().zip(pt(&after)) {
        assert!((x - y).abs() <= 1e-9);
    }

    let run = luequiv(&["--json", "compare", s(&p), s(&out1)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let report: VerdictReport = serde_json::from_str(&run.stdout).unwrap();
    assert!(report.certificate.is_some());
    assert!(report.residuals.certificate.unwrap() <= 1e-8);
    let report_path = dir.path().join("report.json");
    std::fs::write(&report_path, &run.stdout).unwrap();

    let run = luequiv(&["--json", "certify", s(&report_path), s(&p), s(&out1)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let doc: Value = serde_json::from_str(&run.stdout).unwrap();
    assert!(doc["residual"].as_f64().unwrap() <= 1e-8);
    assert_eq!(doc["accepted"], json!(true));
}

#[test]
fn verdict_report_round_trips() {
    let dir = TempDir::new().unwrap();
    let p = mixed_state(&dir);
    let out = dir.path().join("o.json");
    luequiv(&["--seed", "5", "orbit", s(&p), "--out", s(&out)]);
    let (a, b) = counterexample(&dir);
    for (x, y) in [(&p, &out), (&a, &b)] {
        let text = luequiv(&["--json", "compare", s(x), s(y)]).stdout;
        let report: VerdictReport = serde_json::from_str(&text).unwrap();
        let again = serde_json::to_string_pretty(&report).unwrap() + "\n";
        assert_eq!(again, text);
        let reparsed: VerdictReport = serde_json::from_str(&again).unwrap();
        assert_eq!(reparsed, report);
        assert_eq!(report.certificate.is_some(), report.outcome == "Equivalent");
    }
}

#[test]
fn certify_rejects_report_without_certificate() {
    let dir = TempDir::new().unwrap();
    let (a, b) = counterexample(&dir);
    let report = dir.path().join("r.json");
    std::fs::write(&report, luequiv(&["--json", "compare", s(&a), s(&b)]).stdout).unwrap();
    assert_eq!(luequiv(&["certify", s(&report), s(&a), s(&b)]).code, 64);
}

#[test]
fn oracle_outcomes() {
    let dir = TempDir::new().unwrap();
    let (a, b) = counterexample(&dir);
    let run = luequiv(&["--json", "oracle", s(&a), s(&b)]);
    assert_eq!(run.code, 1);
    let doc: Value = serde_json::from_str(&run.stdout).unwrap();
    assert_eq!(doc["converged"], json!(false));

    let p = mixed_state(&dir);
    let out = dir.path().join("o.json");
    luequiv(&["--seed", "2", "orbit", s(&p), "--out", s(&out)]);
    assert_eq!(luequiv(&["oracle", s(&p), s(&out)]).code, 0);

    let run = luequiv(&["--json", "oracle", s(&p), s(&p)]);
    assert_eq!(run.code, 0);
    let doc: Value = serde_json::from_str(&run.stdout).unwrap();
    assert!(doc["best_distance"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(luequiv(&["compare", "only-one.json"]).code, 64);
    assert_eq!(luequiv(&["frobnicate"]).code, 64);
    let help = luequiv(&["--help"]);
    assert_eq!(help.code, 0);
    assert!(help.stdout.contains("Exit codes"));
}
