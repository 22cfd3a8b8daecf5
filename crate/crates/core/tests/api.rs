mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use meroval::atp::{AtpBudget, ProverConfig};
use meroval::evaluator::{build_triage, PairStatus};
use meroval::service::api::{router, AppState};
use meroval::service::{JournalOp, RunSettings, Scope, ServiceError, Workspace};
use serde_json::{json, Value};
use tower::ServiceExt;

fn workspace(root: &Path) -> Workspace {
    let ws = Workspace::init(root.join("ws")).unwrap();
    ws.ingest(common::DATA, Some(common::INDEX), common::KIF, common::MAPPING).unwrap();
    ws
}

fn settings(portfolio: Vec<ProverConfig>, jobs: usize) -> RunSettings {
    RunSettings { portfolio, budget: common::budget(), jobs }
}

fn app(root: &Path) -> (Router, AppState) {
    let st = AppState::new(workspace(root), settings(vec![ProverConfig::builtin()], 4), common::MIN_DESCENDANTS);
    (router(st.clone()), st)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn run_job(app: &Router, scope: Option<Value>) -> Value {
    let (s, v) = call(app, "POST", "/jobs/evaluate", scope).await;
    assert_eq!(s, StatusCode::ACCEPTED, "{v}");
    let id = v["job"]["id"].as_str().unwrap().to_string();
    wait(app, &id).await
}

async fn wait(app: &Router, id: &str) -> Value {
    let start = Instant::now();
    loop {
        let (s, v) = call(app, "GET", &format!("/jobs/{id}"), None).await;
        assert_eq!(s, StatusCode::OK);
        if matches!(v["job"]["state"].as_str(), Some("done" | "failed")) {
            return v["job"].clone();
        }
        assert!(start.elapsed() < Duration::from_secs(120), "job {id} stuck: {v}");
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn unknown_job_is_404() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    assert_eq!(call(&app, "GET", "/jobs/nonexistent", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "POST", "/jobs/nonexistent/cancel", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/triage", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn evaluation_job_feeds_pairs_triage_and_cq_detail() {
    let dir = tempfile::tempdir().unwrap();
    let (app, st) = app(dir.path());
    let job = run_job(&app, None).await;
    assert_eq!(job["state"], "done", "{job}");
    let eid = job["evaluation"].as_str().unwrap();

    let (s, v) = call(&app, "GET", "/triage", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["versions"]["evaluation"], eid);
    let ev = st.ws.evaluation(eid).unwrap();
    let w = common::world();
    let want = build_triage(&ev.classifications, &w.mapping, &[PairStatus::Unvalidated, PairStatus::Unknown].into());
    assert_eq!(v["groups"], serde_json::to_value(&want).unwrap());
    let freq: Vec<u64> = v["groups"].as_array().unwrap().iter().map(|g| g["frequency"].as_u64().unwrap()).collect();
    assert!(freq.windows(2).all(|f| f[0] >= f[1]), "{freq:?}");

    let (_, all) = call(&app, "GET", "/pairs", None).await;
    assert_eq!(all["pairs"].as_array().unwrap().len(), 17);
    let (_, member) = call(&app, "GET", "/pairs?status=unvalidated&relation=member", None).await;
    let member = member["pairs"].as_array().unwrap();
    assert!(member.iter().all(|p| p["status"] == "unvalidated" && p["pair"]["relation"] == "member"));
    let fish = member.iter().find(|p| p["part"] == "trout#1:n").unwrap();
    let group = format!("{} / {} / member", fish["part_targets"].as_str().unwrap(), fish["whole_targets"].as_str().unwrap());
    let (_, grouped) =
        call(&app, "GET", &format!("/pairs?group={}", group.replace(' ', "%20").replace('+', "%2B").replace('/', "%2F")), None).await;
    assert_eq!(grouped["pairs"].as_array().unwrap().len(), 3);

    let (s, detail) = call(&app, "GET", &format!("/cqs/{}", fish["cq_id"].as_str().unwrap()), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_ne!(detail["precheck"], "ok");
    assert_eq!(detail["verdict"], Value::Null);
    let cq = ev.verdicts.keys().next().unwrap();
    let (_, detail) = call(&app, "GET", &format!("/cqs/{cq}"), None).await;
    assert_eq!(detail["entry"]["cq_id"], cq.as_str());
    assert!(detail["logs"].as_array().unwrap().iter().any(|l| l["text"].as_str().unwrap().contains("SZS status")));
    assert_eq!(call(&app, "GET", "/cqs/nope", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn mapping_edits_preview_and_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let (app, st) = app(dir.path());
    let before = st.ws.versions().unwrap();
    let body = json!({ "targets": ["+GroupOfAnimals"], "preview": true, "propagate": true });
    let (s, v) = call(&app, "POST", "/mappings/mammal_genus%231:n", Some(body)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["propagated"], 2);
    assert_eq!(v["mapping"], Value::Null);
    assert_eq!(st.ws.versions().unwrap(), before);

    let stale = json!({ "targets": ["+GroupOfAnimals"], "expected_version": "0".repeat(64) });
    let (s, v) = call(&app, "POST", "/mappings/family_hyaenidae%231:n", Some(stale)).await;
    assert_eq!(s, StatusCode::CONFLICT, "{v}");
    assert_eq!(st.ws.versions().unwrap(), before);

    let bad = json!({ "targets": ["+NoSuchClass"] });
    assert_eq!(call(&app, "POST", "/mappings/family_hyaenidae%231:n", Some(bad)).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let missing = json!({ "targets": ["+Canine"] });
    assert_eq!(call(&app, "POST", "/mappings/no_such%231:n", Some(missing)).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn hyaenidae_correction_shows_in_summary_delta() {
    let dir = tempfile::tempdir().unwrap();
    let (app, st) = app(dir.path());
    let first = run_job(&app, None).await["evaluation"].as_str().unwrap().to_string();
    let hyaena = |v: &Value| v["pairs"].as_array().unwrap().iter().find(|p| p["part"] == "hyaena#1:n").unwrap()["status"].clone();
    assert_eq!(hyaena(&call(&app, "GET", "/pairs", None).await.1), "unvalidated");

    st.ws.apply_patch(common::MEMBER_PATCH).unwrap();
    let current = st.ws.versions().unwrap().mapping.unwrap();
    let edit = json!({ "targets": ["+GroupOfAnimals"], "expected_version": current, "note": "family is a group" });
    let (s, v) = call(&app, "POST", "/mappings/family_hyaenidae%231:n", Some(edit)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["changed"], 1);
    assert_ne!(v["mapping"].as_str().unwrap(), current);

    let second = run_job(&app, Some(json!({ "relation": "member" }))).await["evaluation"].as_str().unwrap().to_string();
    assert_eq!(hyaena(&call(&app, "GET", "/pairs", None).await.1), "validated");
    let (s, v) = call(&app, "GET", &format!("/reports/summary?versions={first},{second}"), None).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let member = v["delta"].as_array().unwrap().iter().find(|d| d["relation"] == "member").unwrap().clone();
    assert!(member["validated"].as_i64().unwrap() >= 1, "{member}");
    assert!(member["f1_points"].as_i64().unwrap() > 0, "{member}");

    let ops: Vec<&'static str> = st
        .ws
        .journal()
        .unwrap()
        .iter()
        .map(|e| match e.op {
            JournalOp::Init => "init",
            JournalOp::Ingest { .. } => "ingest",
            JournalOp::Mapping { .. } => "mapping",
            JournalOp::Ontology { .. } => "ontology",
            JournalOp::Manifest { .. } => "manifest",
            JournalOp::Precheck { .. } => "precheck",
            JournalOp::Evaluation { .. } => "evaluation",
            JournalOp::Report { .. } => "report",
        })
        .filter(|o| *o != "manifest" && *o != "precheck")
        .collect();
    assert_eq!(ops, ["init", "ingest", "evaluation", "ontology", "mapping", "evaluation"]);
    st.ws.verify().unwrap();
    assert_eq!(call(&app, "GET", "/reports/summary?versions=missing", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn cancelled_job_fails_without_recording_an_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("slow.sh");
    std::fs::write(&script, "#!/bin/sh\nsleep 1\necho 'SZS status GaveUp'\n").unwrap();
    std::process::Command::new("chmod").arg("+x").arg(&script).status().unwrap();
    let slow = ProverConfig::external("slow", "1", &format!("{} {{problemFile}}", script.display())).unwrap();
    let st = AppState::new(workspace(dir.path()), settings(vec![slow], 1), common::MIN_DESCENDANTS);
    let app = router(st.clone());
    let before = st.ws.state().unwrap();

    let (_, v) = call(&app, "POST", "/jobs/evaluate", None).await;
    let id = v["job"]["id"].as_str().unwrap().to_string();
    tokio::time::sleep(Duration::from_millis(300)).await;
    let (s, v) = call(&app, "POST", &format!("/jobs/{id}/cancel"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["job"]["cancel_requested"], true);
    let job = wait(&app, &id).await;
    assert_eq!(job["state"], "failed", "{job}");
    assert!(job["error"].as_str().unwrap().contains("cancel"), "{job}");

    let after = st.ws.state().unwrap();
    assert_eq!(after.evaluation, before.evaluation);
    assert_eq!(after.evaluations, before.evaluations);
    st.ws.verify().unwrap();
    let on_disk: Value = serde_json::from_slice(&std::fs::read(st.ws.job_path(&id)).unwrap()).unwrap();
    assert_eq!(on_disk["state"], "failed");
}

#[test]
fn cancel_before_evaluate_leaves_state_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let ws = workspace(dir.path());
    let before = ws.state().unwrap();
    let runner = ws.runner(&RunSettings { budget: AtpBudget { seconds: 5, megabytes: 512 }, ..RunSettings::default() });
    runner.cancel.store(true, std::sync::atomic::Ordering::SeqCst);
    let err = ws.evaluate(&runner, 1, &Scope::default(), None).unwrap_err();
    assert!(matches!(err, ServiceError::Cancelled), "{err}");
    assert_eq!(ws.state().unwrap(), before);
    assert_eq!(runner.invocations(), 0);
}
