//! Prover portfolio: the built-in saturation prover and external provers run
//! as subprocesses, with a content-addressed verdict cache.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cqgen::formula_hash;
use crate::logic::{saturate, to_cnf, tptp, Budget, Clause, Formula, LogicError, Skolemizer, Verdict, VerdictStatus};
use crate::ontology::Ontology;

#[derive(Debug, Error)]
pub enum AtpError {
    #[error("invalid prover configuration `{name}`: {message}")]
    Config { name: String, message: String },
    #[error("prover executable `{0}` not found")]
    MissingExecutable(String),
    #[error("no usable prover in the portfolio")]
    NoProvers,
    #[error("cancelled")]
    Cancelled,
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Conjecture,
    Negation,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Conjecture => "conjecture",
            Direction::Negation => "negation",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtpBudget {
    pub seconds: u64,
    pub megabytes: u64,
}

impl Default for AtpBudget {
    fn default() -> Self {
        AtpBudget { seconds: 600, megabytes: 2048 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProverConfig {
    pub name: String,
    pub version: String,
    /// `None` runs the built-in prover in-process.
    pub command: Option<String>,
    pub proved_markers: Vec<String>,
    pub refuted_markers: Vec<String>,
    pub timeout_markers: Vec<String>,
}

const PROBLEM: &str = "{problemFile}";

impl ProverConfig {
    pub fn builtin() -> Self {
        ProverConfig {
            name: "micro".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: None,
            proved_markers: vec!["SZS status Theorem".into()],
            refuted_markers: vec!["SZS status CounterSatisfiable".into()],
            timeout_markers: vec!["SZS status Timeout".into()],
        }
    }

    pub fn external(name: &str, version: &str, template: &str) -> Result<Self, AtpError> {
        let cfg = ProverConfig { name: name.into(), version: version.into(), command: Some(template.into()), ..Self::builtin() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn vampire() -> Self {
        Self::external(
            "vampire",
            "4.2.2",
            "vampire --proof tptp --output_axiom_names on --mode casc -t {seconds} -m {megabytes} {problemFile}",
        )
        .expect("valid template")
    }

    pub fn eprover() -> Self {
        Self::external("eprover", "2.1", "eprover --auto --proof-object -s --cpu-limit={seconds} --memory-limit={megabytes} {problemFile}")
            .expect("valid template")
    }

    /// `name=template`, or one of the names `micro`, `vampire`, `eprover`.
    pub fn from_spec(spec: &str) -> Result<Self, AtpError> {
        match spec.split_once('=') {
            Some((name, template)) => Self::external(name, "custom", template),
            None => match spec {
                "micro" => Ok(Self::builtin()),
                "vampire" => Ok(Self::vampire()),
                "eprover" | "e" => Ok(Self::eprover()),
                other => Err(AtpError::Config { name: other.into(), message: "unknown prover; use name=template".into() }),
            },
        }
    }

    pub fn validate(&self) -> Result<(), AtpError> {
        let bad = |m: &str| Err(AtpError::Config { name: self.name.clone(), message: m.into() });
        if let Some(t) = &self.command {
            if !t.contains(PROBLEM) {
                return bad("command template lacks {problemFile}");
            }
            if t.split_whitespace().next().is_none() {
                return bad("empty command template");
            }
        }
        if self.proved_markers.iter().chain(&self.refuted_markers).chain(&self.timeout_markers).any(|m| m.is_empty())
            || self.proved_markers.is_empty()
        {
            return bad("markers must be non-empty");
        }
        Ok(())
    }

    /// Command line with placeholders filled in.
    pub fn argv(&self, problem_file: &Path, budget: AtpBudget) -> Vec<String> {
        self.command
            .as_deref()
            .unwrap_or_default()
            .split_whitespace()
            .map(|tok| {
                tok.replace(PROBLEM, &problem_file.display().to_string())
                    .replace("{seconds}", &budget.seconds.to_string())
                    .replace("{megabytes}", &budget.megabytes.to_string())
            })
            .collect()
    }

    fn fingerprint(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    /// Verdict from raw output. Without any marker the attempt gave up.
    pub fn classify_output(&self, output: &str) -> VerdictStatus {
        let has = |ms: &[String]| ms.iter().any(|m| output.contains(m.as_str()));
        if has(&self.proved_markers) {
            VerdictStatus::Proved
        } else if has(&self.refuted_markers) {
            VerdictStatus::Refuted
        } else if has(&self.timeout_markers) {
            VerdictStatus::Timeout
        } else {
            VerdictStatus::GaveUp
        }
    }
}

/// SZS-style report used by the built-in prover, in-process and from the CLI.
pub fn szs_output(v: &Verdict, problem: &str) -> String {
    let status = match v.status {
        VerdictStatus::Proved => "Theorem",
        VerdictStatus::Refuted => "CounterSatisfiable",
        VerdictStatus::GaveUp => "GaveUp",
        VerdictStatus::Timeout => "Timeout",
    };
    let mut out = format!("% SZS status {status} for {problem}\n");
    out.push_str(&format!("% generated {} kept {}\n", v.stats.generated, v.stats.kept));
    if !v.proof.is_empty() {
        out.push_str(&format!("% SZS output start Refutation for {problem}\n"));
        for l in &v.proof {
            out.push_str(l);
            out.push('\n');
        }
        out.push_str(&format!("% SZS output end Refutation for {problem}\n"));
    }
    if let Some(d) = &v.diagnostic {
        out.push_str(&format!("% {d}\n"));
    }
    out
}

fn builtin_budget(b: AtpBudget) -> Budget {
    Budget { max_seconds: b.seconds as f64, ..Budget::default() }
}

/// Clausifies a TPTP problem and runs the saturation prover on it.
pub fn prove_tptp(problem: &str, budget: Budget) -> Result<Verdict, AtpError> {
    let p = tptp::parse(problem)?;
    let mut sk = Skolemizer::new();
    let mut clauses = Vec::new();
    for s in p.axioms() {
        clauses.extend(to_cnf(&s.formula, &s.name, &mut sk)?);
    }
    if let Some(c) = p.conjecture() {
        clauses.extend(to_cnf(&Formula::not(c.formula.clone()), &c.name, &mut sk)?);
    }
    Ok(saturate(&clauses, budget))
}

fn wait_with_timeout(mut child: std::process::Child, limit: Duration) -> Result<(String, bool, Option<i32>), AtpError> {
    let mut stdout = child.stdout.take().expect("piped");
    let mut stderr = child.stderr.take().expect("piped");
    let out_t = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let err_t = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        s
    });
    let start = Instant::now();
    let mut timed_out = false;
    let status = loop {
        if let Some(st) = child.try_wait()? {
            break st;
        }
        if start.elapsed() >= limit {
            #[cfg(unix)]
            let _ = Command::new("kill").args(["-KILL", "--"]).arg(format!("-{}", child.id())).status();
            let _ = child.kill();
            timed_out = true;
            break child.wait()?;
        }
        std::thread::sleep(Duration::from_millis(5));
    };
    let mut text = out_t.join().unwrap_or_default();
    text.push_str(&err_t.join().unwrap_or_default());
    Ok((text, timed_out, status.code()))
}

/// Runs one prover on one problem; raw output goes to `archive` when given.
pub fn run_prover(config: &ProverConfig, problem: &str, budget: AtpBudget, archive: Option<&Path>) -> Result<Verdict, AtpError> {
    config.validate()?;
    if budget.seconds == 0 || budget.megabytes == 0 {
        return Err(AtpError::Config { name: config.name.clone(), message: "budgets must be positive".into() });
    }
    let (verdict, raw) = match &config.command {
        None => {
            let v = prove_tptp(problem, builtin_budget(budget))?;
            let raw = szs_output(&v, "problem");
            (v, raw)
        }
        Some(_) => {
            let dir = match archive {
                Some(p) => p.parent().map(Path::to_path_buf).unwrap_or_else(std::env::temp_dir),
                None => std::env::temp_dir(),
            };
            fs::create_dir_all(&dir)?;
            let stem = archive.and_then(|p| p.file_stem()).map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| {
                static SEQ: AtomicUsize = AtomicUsize::new(0);
                format!("meroval-{}-{}", std::process::id(), SEQ.fetch_add(1, Ordering::Relaxed))
            });
            let file = dir.join(format!("{stem}.p"));
            fs::write(&file, problem)?;
            let argv = config.argv(&file, budget);
            let started = Instant::now();
            let mut cmd = Command::new(&argv[0]);
            cmd.args(&argv[1..]).stdin(Stdio::null()).stdout(Stdio::piped()).stderr(Stdio::piped());
            #[cfg(unix)]
            std::os::unix::process::CommandExt::process_group(&mut cmd, 0);
            let child = cmd.spawn();
            let child = match child {
                Ok(c) => c,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(AtpError::MissingExecutable(argv[0].clone())),
                Err(e) => return Err(e.into()),
            };
            let (text, timed_out, code) = wait_with_timeout(child, Duration::from_secs(budget.seconds))?;
            if archive.is_none() {
                let _ = fs::remove_file(&file);
            }
            let mut v = Verdict::new(if timed_out { VerdictStatus::Timeout } else { config.classify_output(&text) });
            v.stats.elapsed_ms = started.elapsed().as_millis() as u64;
            if v.status == VerdictStatus::GaveUp && code != Some(0) {
                v.diagnostic = Some(format!("exit status {code:?} without a status marker"));
            } else if timed_out {
                v.diagnostic = Some(format!("killed after {} s", budget.seconds));
            }
            (v, text)
        }
    };
    if let Some(path) = archive {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, raw)?;
    }
    Ok(verdict)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CqOutcome {
    Passing,
    NonPassing,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub prover: String,
    pub direction: Direction,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CqVerdict {
    pub cq_id: String,
    pub status: CqOutcome,
    pub per_prover: Vec<Attempt>,
    pub ontology_version: String,
    pub mapping_version: String,
}

impl CqVerdict {
    pub fn any_timeout(&self) -> bool {
        self.per_prover.iter().any(|a| a.verdict.status == VerdictStatus::Timeout)
    }
}

/// Passing iff some attempt proved the conjecture; non-passing iff none did
/// and some proved the negation; unresolved otherwise.
pub fn combine(attempts: &[Attempt]) -> CqOutcome {
    let proved = |d: Direction| attempts.iter().any(|a| a.direction == d && a.verdict.status == VerdictStatus::Proved);
    if proved(Direction::Conjecture) {
        CqOutcome::Passing
    } else if proved(Direction::Negation) {
        CqOutcome::NonPassing
    } else {
        CqOutcome::Unresolved
    }
}

/// Verdicts keyed by content hashes, in memory and optionally on disk.
#[derive(Debug, Default)]
pub struct VerdictCache {
    dir: Option<PathBuf>,
    mem: RwLock<HashMap<String, Verdict>>,
}

impl VerdictCache {
    pub fn in_memory() -> Self {
        VerdictCache::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Self {
        VerdictCache { dir: Some(dir.into()), mem: RwLock::default() }
    }

    pub fn key(formula_hash: &str, ontology_hash: &str, config: &ProverConfig, budget: AtpBudget, direction: Direction) -> String {
        let mut h = Sha256::new();
        for part in [
            formula_hash,
            ontology_hash,
            &config.fingerprint(),
            &budget.seconds.to_string(),
            &budget.megabytes.to_string(),
            &direction.to_string(),
        ] {
            h.update(part.as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())
    }

    pub fn get(&self, key: &str) -> Option<Verdict> {
        if let Some(v) = self.mem.read().expect("cache lock").get(key) {
            return Some(v.clone());
        }
        let path = self.dir.as_ref()?.join(format!("{key}.json"));
        let v: Verdict = serde_json::from_slice(&fs::read(path).ok()?).ok()?;
        self.mem.write().expect("cache lock").insert(key.to_string(), v.clone());
        Some(v)
    }

    pub fn put(&self, key: &str, v: &Verdict) -> Result<(), AtpError> {
        if let Some(dir) = &self.dir {
            fs::create_dir_all(dir)?;
            let tmp = dir.join(format!("{key}.json.tmp"));
            fs::write(&tmp, serde_json::to_vec(v).expect("serializable"))?;
            fs::rename(tmp, dir.join(format!("{key}.json")))?;
        }
        self.mem.write().expect("cache lock").insert(key.to_string(), v.clone());
        Ok(())
    }
}

type AxiomClauses = Arc<(Vec<Clause>, Skolemizer)>;

/// Portfolio runner shared by evaluation jobs.
pub struct Runner {
    pub portfolio: Vec<ProverConfig>,
    pub budget: AtpBudget,
    pub cache: VerdictCache,
    /// Root of the `runs/<cq-hash>/<prover>/<direction>.out` archive.
    pub archive: Option<PathBuf>,
    pub cancel: Arc<AtomicBool>,
    invocations: AtomicUsize,
    completed: Arc<AtomicUsize>,
    clauses: Mutex<HashMap<String, AxiomClauses>>,
}

impl Runner {
    pub fn new(portfolio: Vec<ProverConfig>, budget: AtpBudget, cache: VerdictCache) -> Self {
        Runner {
            portfolio,
            budget,
            cache,
            archive: None,
            cancel: Arc::new(AtomicBool::new(false)),
            invocations: AtomicUsize::new(0),
            completed: Arc::new(AtomicUsize::new(0)),
            clauses: Mutex::new(HashMap::new()),
        }
    }

    /// Number of prover runs, excluding cache hits.
    pub fn invocations(&self) -> usize {
        self.invocations.load(Ordering::SeqCst)
    }

    /// Shared counter of questions classified so far.
    pub fn progress(&self) -> Arc<AtomicUsize> {
        self.completed.clone()
    }

    fn axiom_clauses(&self, ontology: &Ontology, hash: &str) -> Result<AxiomClauses, AtpError> {
        if let Some(c) = self.clauses.lock().expect("clause lock").get(hash) {
            return Ok(c.clone());
        }
        let mut sk = Skolemizer::new();
        let mut cs = Vec::new();
        for (name, f) in ontology.logical_axioms() {
            cs.extend(to_cnf(&f, &name, &mut sk)?);
        }
        let entry = Arc::new((cs, sk));
        self.clauses.lock().expect("clause lock").insert(hash.to_string(), entry.clone());
        Ok(entry)
    }

    fn attempt(
        &self,
        config: &ProverConfig,
        goal: &Formula,
        direction: Direction,
        ontology: &Ontology,
        onto_hash: &str,
        fhash: &str,
    ) -> Result<Verdict, AtpError> {
        let key = VerdictCache::key(fhash, onto_hash, config, self.budget, direction);
        if let Some(v) = self.cache.get(&key) {
            return Ok(v);
        }
        if self.cancel.load(Ordering::SeqCst) {
            return Err(AtpError::Cancelled);
        }
        self.invocations.fetch_add(1, Ordering::SeqCst);
        let archive = self.archive.as_ref().map(|root| root.join(&fhash[..16]).join(&config.name).join(format!("{direction}.out")));
        let v = match &config.command {
            None => {
                let ax = self.axiom_clauses(ontology, onto_hash)?;
                let mut sk = ax.1.clone();
                let mut cs = ax.0.clone();
                cs.extend(to_cnf(&Formula::not(goal.clone()), "negated_conjecture", &mut sk)?);
                let v = saturate(&cs, builtin_budget(self.budget));
                if let Some(path) = &archive {
                    fs::create_dir_all(path.parent().expect("has parent"))?;
                    fs::write(path, szs_output(&v, fhash))?;
                }
                v
            }
            Some(_) => {
                let problem = ontology.problem(Some(("goal", goal.clone()))).to_tptp();
                run_prover(config, &problem, self.budget, archive.as_deref())?
            }
        };
        self.cache.put(&key, &v)?;
        Ok(v)
    }

    /// Conjecture first across the portfolio, the negation only when no
    /// prover found a proof. The first proof ends each direction.
    pub fn classify(&self, cq_id: &str, formula: &Formula, ontology: &Ontology, mapping_version: &str) -> Result<CqVerdict, AtpError> {
        if self.portfolio.is_empty() {
            return Err(AtpError::NoProvers);
        }
        let onto_hash = ontology.content_hash();
        let negated = Formula::not(formula.clone());
        let mut attempts = Vec::new();
        let mut usable = false;
        let mut missing = None;
        for (direction, goal) in [(Direction::Conjecture, formula), (Direction::Negation, &negated)] {
            let fhash = formula_hash(formula);
            for config in &self.portfolio {
                match self.attempt(config, goal, direction, ontology, &onto_hash, &fhash) {
                    Ok(v) => {
                        usable = true;
                        let proved = v.status == VerdictStatus::Proved;
                        attempts.push(Attempt { prover: config.name.clone(), direction, verdict: v });
                        if proved {
                            break;
                        }
                    }
                    Err(AtpError::MissingExecutable(e)) => missing = Some(e),
                    Err(e) => return Err(e),
                }
            }
            if attempts.iter().any(|a| a.verdict.status == VerdictStatus::Proved) {
                break;
            }
        }
        if !usable {
            return Err(missing.map(AtpError::MissingExecutable).unwrap_or(AtpError::NoProvers));
        }
        Ok(CqVerdict {
            cq_id: cq_id.to_string(),
            status: combine(&attempts),
            per_prover: attempts,
            ontology_version: onto_hash,
            mapping_version: mapping_version.to_string(),
        })
    }

    /// Classifies many questions on a pool of `jobs` workers; results keep
    /// the input order. Questions with the same formula are proved once.
    pub fn classify_all(
        &self,
        cqs: &[(String, Formula)],
        ontology: &Ontology,
        mapping_version: &str,
        jobs: usize,
    ) -> Result<Vec<CqVerdict>, AtpError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| AtpError::Config { name: "pool".into(), message: e.to_string() })?;
        let mut first: HashMap<String, usize> = HashMap::new();
        let mut unique = Vec::new();
        let slots: Vec<usize> = cqs
            .iter()
            .map(|(id, f)| {
                *first.entry(formula_hash(f)).or_insert_with(|| {
                    unique.push((id, f));
                    unique.len() - 1
                })
            })
            .collect();
        let verdicts: Vec<CqVerdict> = pool.install(|| {
            use rayon::prelude::*;
            unique
                .par_iter()
                .map(|(id, f)| {
                    let v = self.classify(id, f, ontology, mapping_version);
                    self.completed.fetch_add(1, Ordering::SeqCst);
                    v
                })
                .collect::<Result<_, _>>()
        })?;
        Ok(cqs.iter().zip(slots).map(|((id, _), i)| CqVerdict { cq_id: id.clone(), ..verdicts[i].clone() }).collect())
    }
}
