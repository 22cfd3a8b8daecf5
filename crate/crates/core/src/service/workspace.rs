//! On-disk workspace: content-addressed blobs, an append-only journal and the
//! current-version pointers derived from it.

use std::collections::BTreeSet;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ServiceError;
use crate::atp::{AtpBudget, ProverConfig, Runner, VerdictCache};
use crate::corpus::{compute_blcs, extract_meronymy_pairs, parse_database, MeronymyPair, SynsetGraph, SynsetId, WnRelation};
use crate::cqgen::{pair_key, ManifestEntry, Precheck};
use crate::evaluator::render_report;
use crate::mapping::{apply_heuristics, parse_mapping, propagate_correction, Mapping, Phase, Target};
use crate::ontology::{CorrectionPatch, Ontology};
use crate::pipeline::{self, Evaluation};

/// Default minimum hyponym count for a basic level concept.
pub const MIN_DESCENDANTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRef {
    pub data: String,
    pub index: Option<String>,
}

/// Pairs an evaluation is restricted to; empty means all.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scope {
    #[serde(default)]
    pub relation: Option<WnRelation>,
    /// Pair keys `relation:part:whole` or `part_name/whole_name`.
    #[serde(default)]
    pub pairs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum JournalOp {
    Init,
    Ingest { corpus: CorpusRef, ontology: String, mapping: String },
    Mapping { mapping: String, parent: String, reason: String, changed: usize },
    Ontology { ontology: String, parent: String, patch: String },
    Manifest { manifest: String, questions: usize },
    Precheck { manifest: String, violations: usize },
    Evaluation { evaluation: String, mapping: String, scope: Scope, job: Option<String> },
    Report { evaluation: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub seq: u64,
    pub at: u64,
    #[serde(flatten)]
    pub op: JournalOp,
}

/// Current pointers; every id is a blob hash.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct State {
    pub initialized: bool,
    pub corpus: Option<CorpusRef>,
    pub ontology: Option<String>,
    pub mapping: Option<String>,
    pub manifest: Option<String>,
    pub evaluation: Option<String>,
    /// Every evaluation snapshot, oldest first.
    pub evaluations: Vec<String>,
}

impl State {
    pub fn apply(&mut self, op: &JournalOp) {
        match op {
            JournalOp::Init => self.initialized = true,
            JournalOp::Ingest { corpus, ontology, mapping } => {
                self.corpus = Some(corpus.clone());
                self.ontology = Some(ontology.clone());
                self.mapping = Some(mapping.clone());
                self.manifest = None;
            }
            JournalOp::Mapping { mapping, .. } => {
                self.mapping = Some(mapping.clone());
                self.manifest = None;
            }
            JournalOp::Ontology { ontology, .. } => {
                self.ontology = Some(ontology.clone());
                self.manifest = None;
            }
            JournalOp::Manifest { manifest, .. } => self.manifest = Some(manifest.clone()),
            JournalOp::Evaluation { evaluation, .. } => {
                self.evaluation = Some(evaluation.clone());
                self.evaluations.push(evaluation.clone());
            }
            JournalOp::Precheck { .. } | JournalOp::Report { .. } => {}
        }
    }

    pub fn replay(entries: &[JournalEntry]) -> State {
        let mut s = State::default();
        for e in entries {
            s.apply(&e.op);
        }
        s
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("serializable")))
    }
}

/// Version ids attached to every service response.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Versions {
    pub state: String,
    pub ontology: Option<String>,
    pub mapping: Option<String>,
    pub evaluation: Option<String>,
}

/// Parsed resources of the current state.
pub struct Loaded {
    pub state: State,
    pub graph: SynsetGraph,
    pub pairs: Vec<MeronymyPair>,
    pub ontology: Ontology,
    pub mapping: Mapping,
}

/// Prover portfolio and limits for evaluation runs.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub portfolio: Vec<ProverConfig>,
    pub budget: AtpBudget,
    pub jobs: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings { portfolio: vec![ProverConfig::builtin()], budget: AtpBudget::default(), jobs: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Change {
    pub mapping: String,
    /// Entries whose targets differ from the parent mapping.
    pub changed: usize,
    /// Hyponyms rewritten by propagation.
    pub propagated: usize,
}

pub struct Workspace {
    root: PathBuf,
    writer: Mutex<()>,
    /// Held for the duration of an evaluation; it owns the verdict cache.
    evaluating: Mutex<()>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn blob_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Workspace {
    pub fn init(root: impl Into<PathBuf>) -> Result<Workspace, ServiceError> {
        let root = root.into();
        if root.join("journal.jsonl").exists() {
            return Err(ServiceError::AlreadyInitialized(root.display().to_string()));
        }
        for d in ["blobs", "cache", "runs", "jobs"] {
            fs::create_dir_all(root.join(d))?;
        }
        let ws = Workspace { root, writer: Mutex::new(()), evaluating: Mutex::new(()) };
        ws.append(JournalOp::Init)?;
        Ok(ws)
    }

    pub fn open(root: impl Into<PathBuf>) -> Result<Workspace, ServiceError> {
        let root = root.into();
        if !root.join("journal.jsonl").exists() {
            return Err(ServiceError::NotInitialized(root.display().to_string()));
        }
        Ok(Workspace { root, writer: Mutex::new(()), evaluating: Mutex::new(()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn put_blob(&self, bytes: &[u8]) -> Result<String, ServiceError> {
        let h = blob_hash(bytes);
        let path = self.root.join("blobs").join(&h);
        if !path.exists() {
            let tmp = path.with_extension("tmp");
            fs::write(&tmp, bytes)?;
            fs::rename(tmp, path)?;
        }
        Ok(h)
    }

    pub fn blob(&self, hash: &str) -> Result<Vec<u8>, ServiceError> {
        if hash.len() != 64 || !hash.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(ServiceError::NotFound(format!("blob {hash}")));
        }
        let bytes = fs::read(self.root.join("blobs").join(hash)).map_err(|_| ServiceError::NotFound(format!("blob {hash}")))?;
        if blob_hash(&bytes) != hash {
            return Err(ServiceError::Corrupt(format!("blob {hash} does not match its address")));
        }
        Ok(bytes)
    }

    fn blob_text(&self, hash: &str) -> Result<String, ServiceError> {
        String::from_utf8(self.blob(hash)?).map_err(|_| ServiceError::Corrupt(format!("blob {hash} is not UTF-8")))
    }

    fn put_json<T: Serialize>(&self, v: &T) -> Result<String, ServiceError> {
        self.put_blob(&serde_json::to_vec_pretty(v)?)
    }

    fn blob_json<T: for<'de> Deserialize<'de>>(&self, hash: &str) -> Result<T, ServiceError> {
        Ok(serde_json::from_slice(&self.blob(hash)?)?)
    }

    pub fn journal(&self) -> Result<Vec<JournalEntry>, ServiceError> {
        let text = fs::read_to_string(self.root.join("journal.jsonl"))?;
        text.lines().filter(|l| !l.trim().is_empty()).map(|l| Ok(serde_json::from_str(l)?)).collect()
    }

    pub fn state(&self) -> Result<State, ServiceError> {
        Ok(State::replay(&self.journal()?))
    }

    pub fn versions(&self) -> Result<Versions, ServiceError> {
        let s = self.state()?;
        Ok(Versions { state: s.hash(), ontology: s.ontology.clone(), mapping: s.mapping.clone(), evaluation: s.evaluation.clone() })
    }

    /// Replays the journal and compares with the recorded state pointer.
    pub fn verify(&self) -> Result<String, ServiceError> {
        let replayed = self.state()?.hash();
        let recorded = fs::read_to_string(self.root.join("STATE"))?;
        if recorded.trim() != replayed {
            return Err(ServiceError::Corrupt(format!("state pointer {} but journal replays to {replayed}", recorded.trim())));
        }
        Ok(replayed)
    }

    fn append(&self, op: JournalOp) -> Result<State, ServiceError> {
        let _w = self.writer.lock().expect("journal writer");
        self.append_locked(op)
    }

    fn append_locked(&self, op: JournalOp) -> Result<State, ServiceError> {
        let path = self.root.join("journal.jsonl");
        let seq = if path.exists() { self.journal()?.len() as u64 } else { 0 };
        let entry = JournalEntry { seq, at: now(), op };
        let mut f = OpenOptions::new().create(true).append(true).open(&path)?;
        writeln!(f, "{}", serde_json::to_string(&entry)?)?;
        f.sync_data()?;
        let state = self.state()?;
        fs::write(self.root.join("STATE"), state.hash())?;
        Ok(state)
    }

    pub fn ingest(&self, data: &str, index: Option<&str>, kif: &str, mapping: &str) -> Result<State, ServiceError> {
        let graph = parse_database(data, index)?;
        let ontology = Ontology::parse(kif)?;
        let mapping = parse_mapping(mapping, &graph)?;
        mapping.validate(&ontology.index, &graph)?;
        let corpus = CorpusRef { data: self.put_blob(data.as_bytes())?, index: index.map(|i| self.put_blob(i.as_bytes())).transpose()? };
        let ontology = self.put_blob(ontology.to_kif().as_bytes())?;
        let mapping = self.put_json(&mapping)?;
        self.append(JournalOp::Ingest { corpus, ontology, mapping })
    }

    pub fn load(&self) -> Result<Loaded, ServiceError> {
        self.load_state(self.state()?)
    }

    fn load_state(&self, state: State) -> Result<Loaded, ServiceError> {
        let missing = || ServiceError::BadRequest("nothing ingested yet".into());
        let corpus = state.corpus.as_ref().ok_or_else(missing)?;
        let data = self.blob_text(&corpus.data)?;
        let index = corpus.index.as_deref().map(|h| self.blob_text(h)).transpose()?;
        let graph = parse_database(&data, index.as_deref())?;
        let pairs = extract_meronymy_pairs(&graph);
        let ontology = Ontology::parse(&self.blob_text(state.ontology.as_deref().ok_or_else(missing)?)?)?;
        let mapping = self.blob_json(state.mapping.as_deref().ok_or_else(missing)?)?;
        Ok(Loaded { state, graph, pairs, ontology, mapping })
    }

    /// Compare-and-set of the mapping pointer.
    pub fn commit_mapping(&self, next: &Mapping, expected: Option<&str>, reason: &str) -> Result<Change, ServiceError> {
        let _w = self.writer.lock().expect("journal writer");
        let loaded = self.load()?;
        let parent = loaded.state.mapping.clone().unwrap_or_default();
        if let Some(e) = expected {
            if e != parent {
                return Err(ServiceError::Conflict { expected: e.to_string(), current: parent });
            }
        }
        let changed = count_changes(&loaded.mapping, next);
        let mapping = self.put_json(next)?;
        self.append_locked(JournalOp::Mapping { mapping: mapping.clone(), parent, reason: reason.to_string(), changed })?;
        Ok(Change { mapping, changed, propagated: 0 })
    }

    pub fn mapping_blob(&self, hash: &str) -> Result<Mapping, ServiceError> {
        self.blob_json(hash)
    }

    pub fn apply_heuristics(&self, phase: Phase) -> Result<Change, ServiceError> {
        let l = self.load()?;
        let (next, n) = apply_heuristics(&l.mapping, &l.graph, &l.ontology.index, phase)?;
        let c = self.commit_mapping(&next, l.state.mapping.as_deref(), &format!("heuristic {phase}"))?;
        Ok(Change { propagated: n, ..c })
    }

    /// Corrections in mapping syntax, one line per BLC.
    pub fn propagate_blc(&self, corrections: &str, min_descendants: usize) -> Result<Change, ServiceError> {
        let l = self.load()?;
        let corrected = parse_mapping(corrections, &l.graph)?.entries.into_iter().map(|(s, e)| (s, e.targets)).collect();
        let blcs = compute_blcs(&l.graph, min_descendants);
        let (next, n) = propagate_correction(&l.mapping, &l.graph, &blcs, &corrected)?;
        let c = self.commit_mapping(&next, l.state.mapping.as_deref(), "blc propagation")?;
        Ok(Change { propagated: n, ..c })
    }

    pub fn apply_patch(&self, src: &str) -> Result<(String, (usize, usize)), ServiceError> {
        let patch = CorrectionPatch::parse(src)?;
        let _w = self.writer.lock().expect("journal writer");
        let l = self.load()?;
        let next = l.ontology.apply_patch(&patch)?;
        l.mapping.validate(&next.index, &l.graph)?;
        let ontology = self.put_blob(next.to_kif().as_bytes())?;
        let patch_id = self.put_blob(src.as_bytes())?;
        let parent = l.state.ontology.clone().unwrap_or_default();
        self.append_locked(JournalOp::Ontology { ontology: ontology.clone(), parent, patch: patch_id })?;
        Ok((ontology, patch.count()))
    }

    pub fn gen_cqs(&self) -> Result<Vec<ManifestEntry>, ServiceError> {
        let l = self.load()?;
        let plan = pipeline::plan(&l.graph, &l.pairs, &l.mapping, &l.ontology)?;
        let manifest = self.put_json(&plan.manifest)?;
        self.append(JournalOp::Manifest { manifest, questions: plan.manifest.len() })?;
        Ok(plan.manifest)
    }

    /// Violations among the current manifest's questions.
    pub fn precheck(&self) -> Result<Vec<(ManifestEntry, Precheck)>, ServiceError> {
        let l = self.load()?;
        let plan = pipeline::plan(&l.graph, &l.pairs, &l.mapping, &l.ontology)?;
        let manifest = match &l.state.manifest {
            Some(m) => m.clone(),
            None => {
                let m = self.put_json(&plan.manifest)?;
                self.append(JournalOp::Manifest { manifest: m.clone(), questions: plan.manifest.len() })?;
                m
            }
        };
        let violations: Vec<(ManifestEntry, Precheck)> = plan
            .manifest
            .into_iter()
            .filter_map(|m| match plan.prechecks.get(&m.cq_id) {
                Some(p @ Precheck::Violation { .. }) => Some((m, p.clone())),
                _ => None,
            })
            .collect();
        self.append(JournalOp::Precheck { manifest, violations: violations.len() })?;
        Ok(violations)
    }

    pub fn runner(&self, settings: &RunSettings) -> Runner {
        let mut r = Runner::new(settings.portfolio.clone(), settings.budget, VerdictCache::on_disk(self.root.join("cache")));
        r.archive = Some(self.root.join("runs"));
        r
    }

    /// Pairs of the current corpus selected by `scope`.
    pub fn scoped_pairs(&self, l: &Loaded, scope: &Scope) -> Result<Vec<MeronymyPair>, ServiceError> {
        let mut wanted = BTreeSet::new();
        for key in &scope.pairs {
            let p = find_pair(l, key).ok_or_else(|| ServiceError::NotFound(format!("pair {key}")))?;
            wanted.insert(p);
        }
        Ok(l.pairs
            .iter()
            .filter(|p| scope.relation.is_none_or(|r| p.relation == r) && (wanted.is_empty() || wanted.contains(*p)))
            .copied()
            .collect())
    }

    /// Runs one evaluation; a cancelled run records nothing.
    pub fn evaluate(&self, runner: &Runner, jobs: usize, scope: &Scope, job: Option<&str>) -> Result<(String, Evaluation), ServiceError> {
        let _e = self.evaluating.lock().expect("evaluation lock");
        let l = self.load()?;
        let pairs = self.scoped_pairs(&l, scope)?;
        let ev = pipeline::evaluate(&l.graph, &pairs, &l.mapping, &l.ontology, runner, jobs)?;
        let id = self.put_json(&ev)?;
        let mapping = l.state.mapping.clone().unwrap_or_default();
        self.append(JournalOp::Evaluation { evaluation: id.clone(), mapping, scope: scope.clone(), job: job.map(String::from) })?;
        Ok((id, ev))
    }

    pub fn evaluation(&self, id: &str) -> Result<Evaluation, ServiceError> {
        self.blob_json(id)
    }

    pub fn latest_evaluation(&self) -> Result<(String, Evaluation), ServiceError> {
        let id = self.state()?.evaluation.ok_or_else(|| ServiceError::NotFound("no evaluation yet".into()))?;
        let ev = self.evaluation(&id)?;
        Ok((id, ev))
    }

    /// Mapping snapshot an evaluation ran against.
    pub fn evaluation_mapping(&self, id: &str) -> Result<Mapping, ServiceError> {
        let m = self
            .journal()?
            .into_iter()
            .find_map(|e| match e.op {
                JournalOp::Evaluation { evaluation, mapping, .. } if evaluation == id => Some(mapping),
                _ => None,
            })
            .ok_or_else(|| ServiceError::NotFound(format!("evaluation {id}")))?;
        self.mapping_blob(&m)
    }

    /// Text table of the latest evaluation.
    pub fn report(&self) -> Result<String, ServiceError> {
        let (id, ev) = self.latest_evaluation()?;
        self.append(JournalOp::Report { evaluation: id })?;
        Ok(render_report(&ev.metrics))
    }

    pub fn job_path(&self, id: &str) -> PathBuf {
        self.root.join("jobs").join(format!("{id}.json"))
    }
}

pub fn count_changes(before: &Mapping, after: &Mapping) -> usize {
    let keys: BTreeSet<SynsetId> = before.entries.keys().chain(after.entries.keys()).copied().collect();
    keys.into_iter().filter(|s| before.targets(*s) != after.targets(*s)).count()
}

/// Accepts `relation:part:whole` offsets or `part_name/whole_name`.
pub fn find_pair(l: &Loaded, key: &str) -> Option<MeronymyPair> {
    if let Some(p) = l.pairs.iter().find(|p| pair_key(p) == key) {
        return Some(*p);
    }
    let (a, b) = key.split_once('/')?;
    let (a, b) = (l.graph.resolve(a).ok()?, l.graph.resolve(b).ok()?);
    l.pairs.iter().find(|p| p.part == a && p.whole == b).copied()
}

/// Targets from `+Concept`, `=Concept`, `@Concept` or `&%Concept+` tokens.
pub fn parse_targets(tokens: &[String]) -> Result<Vec<Target>, ServiceError> {
    tokens
        .iter()
        .map(|t| {
            let t = t.trim();
            let t = match t.strip_prefix("&%") {
                Some(rest) if !rest.is_empty() => {
                    let (concept, suffix) = rest.split_at(rest.len() - 1);
                    format!("{suffix}{concept}")
                }
                _ => t.to_string(),
            };
            t.parse::<Target>().map_err(ServiceError::BadRequest)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_matches_pointer_and_blobs_are_addressed() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::init(dir.path()).unwrap();
        let h = ws.put_blob(b"abc").unwrap();
        assert_eq!(ws.blob(&h).unwrap(), b"abc");
        fs::write(dir.path().join("blobs").join(&h), b"abd").unwrap();
        assert!(matches!(ws.blob(&h), Err(ServiceError::Corrupt(_))));
        assert!(matches!(ws.blob("../journal.jsonl"), Err(ServiceError::NotFound(_))));
        assert!(ws.state().unwrap().initialized);
        ws.verify().unwrap();
        assert!(matches!(Workspace::init(dir.path()), Err(ServiceError::AlreadyInitialized(_))));
    }

    #[test]
    fn targets_in_both_spellings() {
        let ts = parse_targets(&["+Heart".into(), "&%Organ=".into()]).unwrap();
        assert_eq!(ts, vec![Target::sub("Heart"), Target::new("Organ", crate::mapping::MappingRelation::Equivalence)]);
        assert!(parse_targets(&["Heart".into()]).is_err());
    }
}
