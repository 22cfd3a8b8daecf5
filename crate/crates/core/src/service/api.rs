//! HTTP API over a workspace. Reads work on immutable snapshots; mapping
//! edits are compare-and-set against the current mapping version.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use super::workspace::{count_changes, parse_targets, Scope, Versions, Workspace};
use super::{RunSettings, ServiceError};
use crate::atp::CqVerdict;
use crate::corpus::{compute_blcs, WnRelation};
use crate::cqgen::{ManifestEntry, Precheck};
use crate::evaluator::{build_triage, count_cqs, pair_view, CqCounts, MetricsRow, PairStatus, PairView, TriageGroup};
use crate::mapping::{edit_mapping, propagate_correction, targets_text};

#[derive(Clone)]
pub struct AppState {
    pub ws: Arc<Workspace>,
    pub settings: RunSettings,
    pub min_descendants: usize,
    jobs: Arc<Mutex<BTreeMap<String, Job>>>,
    next_job: Arc<AtomicU64>,
}

impl AppState {
    pub fn new(ws: Workspace, settings: RunSettings, min_descendants: usize) -> Self {
        AppState { ws: Arc::new(ws), settings, min_descendants, jobs: Arc::default(), next_job: Arc::new(AtomicU64::new(1)) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub scope: Scope,
    pub state: JobState,
    pub questions_done: usize,
    pub evaluation: Option<String>,
    pub error: Option<String>,
    pub cancel_requested: bool,
}

struct Job {
    record: JobRecord,
    cancel: Arc<AtomicBool>,
    progress: Arc<AtomicUsize>,
}

impl Job {
    fn snapshot(&self) -> JobRecord {
        let mut r = self.record.clone();
        if r.state == JobState::Running {
            r.questions_done = self.progress.load(Ordering::SeqCst);
        }
        r.cancel_requested = self.cancel.load(Ordering::SeqCst);
        r
    }
}

#[derive(Serialize)]
struct Envelope<T: Serialize> {
    versions: Versions,
    #[serde(flatten)]
    body: T,
}

type ApiResult<T> = Result<Json<Envelope<T>>, ServiceError>;

fn envelope<T: Serialize>(ws: &Workspace, body: T) -> ApiResult<T> {
    Ok(Json(Envelope { versions: ws.versions()?, body }))
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict { .. } | ServiceError::AlreadyInitialized(_) => StatusCode::CONFLICT,
            ServiceError::BadRequest(_)
            | ServiceError::Mapping(_)
            | ServiceError::Corpus(_)
            | ServiceError::Ontology(_)
            | ServiceError::Json(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/pairs", get(pairs))
        .route("/cqs/:id", get(cq))
        .route("/mappings/:synset", post(edit))
        .route("/jobs/evaluate", post(start_job))
        .route("/jobs/:id", get(job))
        .route("/jobs/:id/cancel", post(cancel_job))
        .route("/reports/summary", get(summary))
        .route("/triage", get(triage))
        .with_state(state)
}

pub async fn serve(state: AppState, addr: &str) -> Result<(), ServiceError> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}

fn split_list(s: &Option<String>) -> Vec<String> {
    s.as_deref().unwrap_or_default().split(',').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect()
}

fn parse_statuses(s: &Option<String>, default: &[PairStatus]) -> Result<BTreeSet<PairStatus>, ServiceError> {
    let v = split_list(s);
    if v.is_empty() {
        return Ok(default.iter().copied().collect());
    }
    v.iter().map(|x| x.parse().map_err(ServiceError::BadRequest)).collect()
}

#[derive(Deserialize)]
struct PairQuery {
    status: Option<String>,
    relation: Option<String>,
    group: Option<String>,
}

#[derive(Serialize)]
struct PairList {
    pairs: Vec<PairView>,
}

async fn pairs(State(st): State<AppState>, Query(q): Query<PairQuery>) -> ApiResult<PairList> {
    let (id, ev) = st.ws.latest_evaluation()?;
    let mapping = st.ws.evaluation_mapping(&id)?;
    let l = st.ws.load()?;
    let statuses = parse_statuses(&q.status, &[PairStatus::Validated, PairStatus::Unvalidated, PairStatus::Unknown])?;
    let relation: Option<WnRelation> =
        q.relation.as_deref().map(str::parse).transpose().map_err(|e| ServiceError::BadRequest(format!("{e}")))?;
    let views = ev
        .classifications
        .iter()
        .filter(|k| statuses.contains(&k.status) && relation.is_none_or(|r| k.pair.relation == r))
        .map(|k| pair_view(k, &l.graph, &mapping))
        .filter(|v| q.group.as_deref().is_none_or(|g| format!("{} / {} / {}", v.part_targets, v.whole_targets, v.pair.relation) == g))
        .collect();
    envelope(&st.ws, PairList { pairs: views })
}

#[derive(Serialize)]
struct ProverLog {
    prover: String,
    direction: String,
    text: String,
}

#[derive(Serialize)]
struct CqDetail {
    entry: ManifestEntry,
    precheck: Option<Precheck>,
    verdict: Option<CqVerdict>,
    logs: Vec<ProverLog>,
}

async fn cq(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<CqDetail> {
    let (_, ev) = st.ws.latest_evaluation()?;
    let entry = ev.manifest.iter().find(|m| m.cq_id == id).cloned().ok_or_else(|| ServiceError::NotFound(format!("cq {id}")))?;
    let verdict = ev.verdicts.get(&id).cloned();
    let logs = verdict
        .iter()
        .flat_map(|v| &v.per_prover)
        .map(|a| {
            let path = st.ws.root().join("runs").join(&entry.formula_hash[..16]).join(&a.prover).join(format!("{}.out", a.direction));
            ProverLog { prover: a.prover.clone(), direction: a.direction.to_string(), text: fs::read_to_string(path).unwrap_or_default() }
        })
        .collect();
    envelope(&st.ws, CqDetail { precheck: ev.prechecks.get(&id).cloned(), entry, verdict, logs })
}

#[derive(Deserialize)]
pub struct MappingEdit {
    pub targets: Vec<String>,
    #[serde(default)]
    pub expected_version: Option<String>,
    #[serde(default)]
    pub preview: bool,
    /// Treat the synset as a corrected basic level concept and rewrite its
    /// equally mapped hyponyms.
    #[serde(default)]
    pub propagate: bool,
    #[serde(default)]
    pub note: String,
}

#[derive(Serialize)]
struct EditResult {
    synset: String,
    targets: String,
    preview: bool,
    changed: usize,
    propagated: usize,
    /// New mapping version; absent for a preview.
    mapping: Option<String>,
}

async fn edit(State(st): State<AppState>, Path(synset): Path<String>, Json(body): Json<MappingEdit>) -> ApiResult<EditResult> {
    let ws = st.ws.clone();
    let min = st.min_descendants;
    let result = tokio::task::spawn_blocking(move || -> Result<EditResult, ServiceError> {
        let l = ws.load()?;
        let s = l.graph.resolve(&synset).map_err(|_| ServiceError::NotFound(format!("synset {synset}")))?;
        let targets = parse_targets(&body.targets)?;
        if targets.is_empty() {
            return Err(ServiceError::BadRequest("no targets".into()));
        }
        let (next, propagated) = if body.propagate {
            let blcs = compute_blcs(&l.graph, min);
            propagate_correction(&l.mapping, &l.graph, &blcs, &[(s, targets.clone())].into())?
        } else {
            let note = if body.note.is_empty() { "api edit" } else { body.note.as_str() };
            (edit_mapping(&l.mapping, &l.graph, &l.ontology.index, s, targets.clone(), note)?, 0)
        };
        let name = l.graph.name(s);
        let text = targets_text(next.targets(s).unwrap_or_default());
        if body.preview {
            if let Some(e) = &body.expected_version {
                if Some(e) != l.state.mapping.as_ref() {
                    return Err(ServiceError::Conflict { expected: e.clone(), current: l.state.mapping.unwrap_or_default() });
                }
            }
            let changed = count_changes(&l.mapping, &next);
            return Ok(EditResult { synset: name, targets: text, preview: true, changed, propagated, mapping: None });
        }
        let expected = body.expected_version.or(l.state.mapping.clone());
        let reason = if body.propagate { format!("propagated edit of {name}") } else { format!("edit of {name}") };
        let c = ws.commit_mapping(&next, expected.as_deref(), &reason)?;
        Ok(EditResult { synset: name, targets: text, preview: false, changed: c.changed, propagated, mapping: Some(c.mapping) })
    })
    .await
    .map_err(|e| ServiceError::BadRequest(e.to_string()))??;
    envelope(&st.ws, result)
}

#[derive(Serialize)]
struct JobBody {
    job: JobRecord,
}

async fn start_job(State(st): State<AppState>, body: Option<Json<Scope>>) -> Result<(StatusCode, Json<Envelope<JobBody>>), ServiceError> {
    let scope = body.map(|Json(s)| s).unwrap_or_default();
    {
        let l = st.ws.load()?;
        st.ws.scoped_pairs(&l, &scope)?;
    }
    let id = format!("job-{:04}", st.next_job.fetch_add(1, Ordering::SeqCst));
    let runner = st.ws.runner(&st.settings);
    let record = JobRecord {
        id: id.clone(),
        scope: scope.clone(),
        state: JobState::Queued,
        questions_done: 0,
        evaluation: None,
        error: None,
        cancel_requested: false,
    };
    let job = Job { record: record.clone(), cancel: runner.cancel.clone(), progress: runner.progress() };
    st.jobs.lock().expect("job table").insert(id.clone(), job);

    let (ws, jobs, n) = (st.ws.clone(), st.jobs.clone(), st.settings.jobs);
    tokio::task::spawn_blocking(move || {
        let set = |f: &dyn Fn(&mut JobRecord)| {
            if let Some(j) = jobs.lock().expect("job table").get_mut(&id) {
                f(&mut j.record);
            }
        };
        set(&|r| r.state = JobState::Running);
        let outcome = ws.evaluate(&runner, n, &scope, Some(&id));
        let done = runner.progress().load(Ordering::SeqCst);
        match outcome {
            Ok((eid, _)) => set(&|r| {
                r.state = JobState::Done;
                r.evaluation = Some(eid.clone());
                r.questions_done = done;
            }),
            Err(e) => set(&|r| {
                r.state = JobState::Failed;
                r.error = Some(e.to_string());
                r.questions_done = done;
            }),
        }
        if let Some(j) = jobs.lock().expect("job table").get(&id) {
            let snap = j.snapshot();
            if let Ok(json) = serde_json::to_vec_pretty(&snap) {
                let _ = fs::write(ws.job_path(&id), json);
            }
        }
    });
    Ok((StatusCode::ACCEPTED, envelope(&st.ws, JobBody { job: record })?))
}

fn job_record(st: &AppState, id: &str) -> Result<JobRecord, ServiceError> {
    if let Some(j) = st.jobs.lock().expect("job table").get(id) {
        return Ok(j.snapshot());
    }
    let bytes = fs::read(st.ws.job_path(id)).map_err(|_| ServiceError::NotFound(format!("job {id}")))?;
    Ok(serde_json::from_slice(&bytes)?)
}

async fn job(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<JobBody> {
    if id.contains(['/', '\\', '.']) {
        return Err(ServiceError::NotFound(format!("job {id}")));
    }
    let job = job_record(&st, &id)?;
    envelope(&st.ws, JobBody { job })
}

async fn cancel_job(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<JobBody> {
    {
        let table = st.jobs.lock().expect("job table");
        let j = table.get(&id).ok_or_else(|| ServiceError::NotFound(format!("job {id}")))?;
        if matches!(j.record.state, JobState::Queued | JobState::Running) {
            j.cancel.store(true, Ordering::SeqCst);
        }
    }
    let job = job_record(&st, &id)?;
    envelope(&st.ws, JobBody { job })
}

#[derive(Deserialize)]
struct SummaryQuery {
    versions: Option<String>,
}

#[derive(Serialize)]
struct SummaryItem {
    evaluation: String,
    ontology_version: String,
    mapping_version: String,
    rows: Vec<MetricsRow>,
    cqs: CqCounts,
}

#[derive(Serialize)]
struct RowDelta {
    relation: String,
    validated: i64,
    unvalidated: i64,
    unknown: i64,
    /// F1 change in hundredths.
    f1_points: i64,
}

#[derive(Serialize)]
struct Summary {
    items: Vec<SummaryItem>,
    /// Last item against the one before it.
    delta: Vec<RowDelta>,
}

fn points(x: f64) -> i64 {
    (x * 100.0).round() as i64
}

async fn summary(State(st): State<AppState>, Query(q): Query<SummaryQuery>) -> ApiResult<Summary> {
    let mut ids = split_list(&q.versions);
    if ids.is_empty() {
        ids = st.ws.state()?.evaluation.into_iter().collect();
    }
    let mut items = Vec::new();
    for id in ids {
        let ev = st.ws.evaluation(&id).map_err(|_| ServiceError::NotFound(format!("evaluation {id}")))?;
        items.push(SummaryItem {
            cqs: count_cqs(&ev.manifest, &ev.verdicts),
            evaluation: id,
            ontology_version: ev.ontology_version,
            mapping_version: ev.mapping_version,
            rows: ev.metrics,
        });
    }
    let delta = match items.as_slice() {
        [.., a, b] => a
            .rows
            .iter()
            .zip(&b.rows)
            .map(|(x, y)| RowDelta {
                relation: y.relation.clone(),
                validated: y.validated as i64 - x.validated as i64,
                unvalidated: y.unvalidated as i64 - x.unvalidated as i64,
                unknown: y.unknown as i64 - x.unknown as i64,
                f1_points: points(y.f1) - points(x.f1),
            })
            .collect(),
        _ => Vec::new(),
    };
    envelope(&st.ws, Summary { items, delta })
}

#[derive(Deserialize)]
struct TriageQuery {
    statuses: Option<String>,
}

#[derive(Serialize)]
struct TriageBody {
    groups: Vec<TriageGroup>,
}

async fn triage(State(st): State<AppState>, Query(q): Query<TriageQuery>) -> ApiResult<TriageBody> {
    let statuses = parse_statuses(&q.statuses, &[PairStatus::Unvalidated, PairStatus::Unknown])?;
    let (id, ev) = st.ws.latest_evaluation()?;
    let mapping = st.ws.evaluation_mapping(&id)?;
    envelope(&st.ws, TriageBody { groups: build_triage(&ev.classifications, &mapping, &statuses) })
}
