use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use fdexplain::lang::{DiagnosisKind, DiagnosisReport, ExplanationDocument};
use tempfile::NamedTempFile;

fn models() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn model(name: &str) -> String {
    models().join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    run_with_input(args, "")
}

fn run_with_input(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_fdexplain"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn script(text: &str) -> NamedTempFile {
    let mut file = NamedTempFile::new().unwrap();
    file.write_all(text.as_bytes()).unwrap();
    file
}

fn path(file: &NamedTempFile) -> String {
    file.path().to_string_lossy().into_owned()
}

#[test]
fn solve_prints_the_closure() {
    let o = run(&["solve", &model("conference.fd")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "AM: 1 2\nMA: 2 3\nMP: 2 3\nPM: 1 2\n");
}

#[test]
fn solve_buggy_model_empties_every_domain() {
    let o = run(&["solve", &model("conference_buggy.fd")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "AM:\nMA:\nMP:\nPM:\n");
}

#[test]
fn solve_trace_and_seed() {
    let o = run(&["solve", &model("conference.fd"), "--trace", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("step 1: "), "{out}");
    assert!(out.contains("removals"));
    assert!(out.ends_with("AM: 1 2\nMA: 2 3\nMP: 2 3\nPM: 1 2\n"));
}

#[test]
fn solve_errors_exit_with_2() {
    let o = run(&["solve", &model("missing.fd")]);
    assert_eq!(o.status.code(), Some(2));
    let bad = script("var X in 1..3\nX > Y\n");
    let o = run(&["solve", &path(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("2:5"), "{}", stderr(&o));
    assert!(stderr(&o).contains("unknown variable `Y`"), "{}", stderr(&o));
}

#[test]
fn explain_prints_the_worked_tree() {
    let o = run(&["explain", &model("conference_buggy.fd"), "--value", "AM=1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = ExplanationDocument::from_json(&stdout(&o)).unwrap();
    assert_eq!(doc.nodes.len(), 8);
    assert_eq!((doc.root_node().var.as_str(), doc.root_node().value), ("AM", 1));
    assert_eq!(doc.metadata.schedule_seed, None);
}

#[test]
fn explain_kept_value() {
    let o = run(&["explain", &model("conference.fd"), "--value", "AM=1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("kept"), "{}", stdout(&o));
}

#[test]
fn explain_bad_values_exit_with_2() {
    for value in ["AM=9", "ZZ=1", "AM", "AM=x"] {
        let o = run(&["explain", &model("conference_buggy.fd"), "--value", value]);
        assert_eq!(o.status.code(), Some(2), "{value}");
    }
}

#[test]
fn diagnose_with_the_worked_script() {
    let o = run(&[
        "diagnose",
        &model("conference_buggy.fd"),
        &model("conference.expect"),
        "--script",
        &model("conference.script"),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("Is (MA,3) expected to be kept? YES"), "{out}");
    assert!(out.contains("minimal symptom: (PM,2)"), "{out}");
    assert!(out.contains("erroneous rule: (PM,2) <- (MP,1)"), "{out}");
    assert!(out.contains("constraint: PM>MP"), "{out}");
}

#[test]
fn diagnose_json_report() {
    let named = script("YES,(MA,3)\nyes PM=2\nNO (MP,1)\n");
    let o = run(&[
        "diagnose",
        &model("conference_buggy.fd"),
        &model("conference.expect"),
        "--script",
        &path(&named),
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: DiagnosisReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report.kind, DiagnosisKind::Located);
    assert_eq!(report.faults[0].constraint, "PM>MP");
    assert_eq!(report.transcript.len(), 3);
}

#[test]
fn diagnose_without_symptom_exits_with_1() {
    let o = run(&[
        "diagnose",
        &model("conference.fd"),
        &model("conference.expect"),
        "--script",
        &model("conference.script"),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no symptom"));
}

#[test]
fn diagnose_script_errors_exit_with_2() {
    let cases = [
        "yes\n",                       // too short
        "maybe\n",                     // not an answer
        "yes (PM,2)\nyes\nno\n",       // names the wrong pair
        "yes (MA,\n",                  // malformed pair
    ];
    for text in cases {
        let s = script(text);
        let o = run(&[
            "diagnose",
            &model("conference_buggy.fd"),
            &model("conference.expect"),
            "--script",
            &path(&s),
        ]);
        assert_eq!(o.status.code(), Some(2), "{text:?}: {}", stderr(&o));
    }
}

#[test]
fn diagnose_interactively() {
    let o = run_with_input(
        &["diagnose", &model("conference_buggy.fd"), &model("conference.expect")],
        "yes\nperhaps\nyes\nno\n",
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("Is (MA,3) expected to be kept? [yes/no/unknown]"), "{out}");
    assert!(out.contains("expected YES, NO or UNKNOWN"), "{out}");
    assert!(out.contains("constraint: PM>MP"), "{out}");
    let o = run_with_input(
        &["diagnose", &model("conference_buggy.fd"), &model("conference.expect")],
        "yes\n",
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn diagnose_top_down_and_chosen_symptom() {
    let o = run(&[
        "diagnose",
        &model("conference_buggy.fd"),
        &model("conference.expect"),
        "--strategy",
        "topdown",
        "--symptom",
        "PM=2",
        "--script",
        &path(&script("no\n")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("constraint: PM>MP"), "{}", stdout(&o));
    let o = run(&[
        "diagnose",
        &model("conference_buggy.fd"),
        &model("conference.expect"),
        "--symptom",
        "MA=4",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not a symptom"));
}

#[test]
fn bad_expected_file_exits_with_2() {
    let bad = script("AM: 9\n");
    let o = run(&[
        "diagnose",
        &model("conference_buggy.fd"),
        &path(&bad),
        "--script",
        &model("conference.script"),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
