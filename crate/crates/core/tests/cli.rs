use std::process::{Command, Output};

use branchlab::report::RunReport;
use serde_json::json;

fn branchlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_branchlab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn run_writes_a_report_that_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = branchlab(&["run", "builtin:once_or_twice", "--rule", "indifference", "--at", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let text = std::fs::read_to_string(&out).unwrap();
    let r = RunReport::from_json(&text).unwrap();
    assert_eq!(r.schema_version, 1);
    assert!((r.queries[0].probability - 1.0 / 3.0).abs() < 1e-12);
    assert!((r.branch_weight_total() - 1.0).abs() < 1e-10);
    assert_eq!(r.to_json(), text);
}

#[test]
fn run_on_a_file_without_events() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("still.json");
    std::fs::write(&path, json!({"name": "still", "subsystems": [], "events": [], "observers": [{"id": "o"}]}).to_string()).unwrap();
    let out = dir.path().join("r.json");
    let o = branchlab(&["run", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r = RunReport::from_json(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(r.branches.len(), 1);
    assert_eq!(r.branches[0].weight, 1.0);
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"name": "bad", "subsystems": [], "events": [{"time": 1, "kind": "nope"}], "observers": []}"#).unwrap();
    let o = branchlab(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("events[0]"));
    assert_eq!(branchlab(&["run", "/no/such/file.json"]).status.code(), Some(2));
    assert_eq!(branchlab(&["run", "builtin:once", "--at", "99"]).status.code(), Some(2));
    assert_eq!(branchlab(&["measure", "builtin:once"]).status.code(), Some(2));
    let book = dir.path().join("book.json");
    std::fs::write(&book, r#"[{"id": "b", "offered_at": 40, "payoffs": [{"label": "x", "when": {"kind": "always"}, "amount": 1}]}]"#).unwrap();
    assert_eq!(branchlab(&["dutchbook", "builtin:once_or_twice", book.to_str().unwrap(), "--rule", "born"]).status.code(), Some(2));
}

#[test]
fn verify_is_byte_identical() {
    let a = branchlab(&["verify", "--suite", "appendix-c", "--trials", "1", "--seed", "0"]);
    let b = branchlab(&["verify", "--suite", "appendix-c", "--trials", "1", "--seed", "0"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let many = branchlab(&["verify", "--suite", "strong-esp", "--trials", "8", "--seed", "3"]);
    assert_eq!(many.stdout, branchlab(&["verify", "--suite", "strong-esp", "--trials", "8", "--seed", "3"]).stdout);
    assert!(stdout(&many).contains("strong-esp: 8/8 trials passed"));
}

#[test]
fn dutchbook_verdicts() {
    let o = branchlab(&["dutchbook", "builtin:appendix_a_book", "--rule", "indifference"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("sure loss: yes"));
    assert_eq!(s.matches("-5.000000").count(), 3, "{s}");
    let o = branchlab(&["dutchbook", "builtin:appendix_a_book", "--rule", "born"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("sure loss: no"));

    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, r#"{"bets": []}"#).unwrap();
    let o = branchlab(&["dutchbook", "builtin:appendix_a_book", empty.to_str().unwrap(), "--rule", "indifference"]);
    assert!(stdout(&o).contains("sure loss: no"));
}

#[test]
fn measure_reports_and_samples() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let o = branchlab(&["measure", "builtin:cosmo_convergent", "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("1.000000000000"), "{}", stdout(&o));
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("family,t,integrand\n"));
    assert_eq!(text.lines().count(), 201);

    let o = branchlab(&["measure", "builtin:cosmo_divergent"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("divergent"));

    let zero = dir.path().join("zero.json");
    std::fs::write(&zero, json!({"families": [{"name": "z", "form": {"exponential": {"A": 1.0, "gamma": 1.0, "omega": 1.0, "n0": 0.0}}}]}).to_string()).unwrap();
    let o = branchlab(&["measure", zero.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    assert!(stdout(&o).contains("z: 0.000000000000"));
}
