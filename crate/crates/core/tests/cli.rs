mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use meroval::evaluator::render_report;
use meroval::pipeline::evaluate;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn meroval(ws: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meroval"))
        .arg("--workspace")
        .arg(ws)
        .args(["--time-limit", "5", "--jobs", "4"])
        .args(args)
        .output()
        .expect("spawn meroval")
}

fn ok(ws: &Path, args: &[&str]) -> String {
    let out = meroval(ws, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn ingest_fixture(ws: &Path) {
    ok(ws, &["init"]);
    let f = |n| fixture(n).display().to_string();
    ok(
        ws,
        &[
            "ingest",
            "--data",
            &f("data.noun"),
            "--index",
            &f("index.noun"),
            "--ontology",
            &f("ontology.kif"),
            "--mapping",
            &f("mapping.txt"),
        ],
    );
}

fn row<'a>(report: &'a str, relation: &str) -> &'a str {
    report.lines().find(|l| l.starts_with(relation)).unwrap_or_else(|| panic!("no {relation} row in\n{report}"))
}

#[test]
fn empty_manifest_has_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");
    let data = dir.path().join("data.noun");
    let mapping = dir.path().join("mapping.txt");
    std::fs::write(&data, "00000100 03 n 01 thing 0 000 | top\n00000200 03 n 01 rock 0 001 @ 00000100 n 0000 | a rock\n").unwrap();
    std::fs::write(&mapping, "thing#1:n &%Entity=\nrock#1:n &%Object+\n").unwrap();
    ok(&ws, &["init"]);
    let f = |p: &Path| p.display().to_string();
    ok(&ws, &["ingest", "--data", &f(&data), "--ontology", &f(&fixture("ontology.kif")), "--mapping", &f(&mapping)]);
    assert!(ok(&ws, &["gen-cqs"]).ends_with("0 questions\n"));
    assert!(ok(&ws, &["precheck"]).ends_with("0 violations\n"));
}

#[test]
fn commands_fail_cleanly_without_a_workspace() {
    let dir = tempfile::tempdir().unwrap();
    let out = meroval(&dir.path().join("missing"), &["report"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    let ws = dir.path().join("ws");
    ok(&ws, &["init"]);
    assert!(!meroval(&ws, &["init"]).status.success());
    assert!(!meroval(&ws, &["evaluate"]).status.success());
}

#[test]
fn report_matches_direct_evaluation_and_tracks_patches() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");
    ingest_fixture(&ws);
    assert!(ok(&ws, &["precheck"]).ends_with("7 violations\n"));

    let w = common::world();
    let direct = evaluate(&w.graph, &w.pairs, &w.mapping, &w.ontology, &common::micro_runner(), 4).unwrap();
    let first = ok(&ws, &["evaluate"]);
    let report = ok(&ws, &["report"]);
    assert_eq!(report, render_report(&direct.metrics));
    assert!(first.contains(&report));

    let json: serde_json::Value = serde_json::from_str(&ok(&ws, &["report", "--json"])).unwrap();
    assert_eq!(json, serde_json::to_value(&direct.metrics).unwrap());

    assert!(!meroval(&ws, &["apply-heuristics", "--phase", "H2'"]).status.success());
    ok(&ws, &["apply-patch", fixture("member.patch").to_str().unwrap()]);
    assert!(ok(&ws, &["apply-heuristics", "--phase", "H2'"]).starts_with("H2': 1 synsets remapped"));
    ok(&ws, &["evaluate"]);
    let after = ok(&ws, &["report"]);
    assert_ne!(row(&after, "member"), row(&report, "member"));
    assert_eq!(row(&after, "part"), row(&report, "part"));
    assert!(ok(&ws, &["verify"]).starts_with("state "));
}
