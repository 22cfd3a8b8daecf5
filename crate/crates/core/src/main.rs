use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use meroval::atp::{prove_tptp, szs_output, AtpBudget, ProverConfig};
use meroval::logic::Budget;
use meroval::mapping::Phase;
use meroval::service::api::{serve, AppState};
use meroval::service::workspace::MIN_DESCENDANTS;
use meroval::service::{RunSettings, Scope, ServiceError, Workspace};

#[derive(Parser)]
#[command(name = "meroval", version, about = "Validate WordNet meronymy against an upper ontology")]
struct Cli {
    /// Workspace root.
    #[arg(long, global = true, env = "MEROVAL_WORKSPACE", default_value = "meroval-ws")]
    workspace: PathBuf,
    /// Prover as `name=command template` with `{problemFile}`, `{seconds}`,
    /// `{megabytes}` placeholders, or one of micro, vampire, eprover.
    /// Repeat for a portfolio.
    #[arg(long = "prover", global = true)]
    provers: Vec<String>,
    /// Seconds per prover attempt.
    #[arg(long, global = true, default_value_t = 600)]
    time_limit: u64,
    /// Megabytes per prover attempt.
    #[arg(long, global = true, default_value_t = 2048)]
    mem_limit: u64,
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create an empty workspace.
    Init,
    /// Load a noun database, an ontology and a mapping.
    Ingest {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        ontology: PathBuf,
        #[arg(long)]
        mapping: PathBuf,
    },
    /// Generate the competency question manifest.
    GenCqs,
    /// List questions that violate relation domains.
    Precheck,
    /// Classify every pair with the prover portfolio.
    Evaluate {
        #[arg(long)]
        relation: Option<String>,
        /// `part_name/whole_name` or `relation:part:whole`; repeatable.
        #[arg(long = "pair")]
        pairs: Vec<String>,
    },
    /// Print the metric table of the latest evaluation.
    Report {
        #[arg(long)]
        json: bool,
    },
    ApplyHeuristics {
        #[arg(long)]
        phase: Phase,
    },
    ApplyPatch {
        file: PathBuf,
    },
    /// Apply BLC corrections and propagate them to equally mapped hyponyms.
    PropagateBlc {
        file: PathBuf,
        #[arg(long, default_value_t = MIN_DESCENDANTS)]
        min_descendants: usize,
    },
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long, default_value_t = MIN_DESCENDANTS)]
        min_descendants: usize,
    },
    /// Run the built-in prover on a TPTP problem and print an SZS report.
    Prove {
        file: PathBuf,
        #[arg(long, default_value_t = 200_000)]
        max_clauses: usize,
    },
    /// Check that the journal replays to the recorded state.
    Verify,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error(transparent)]
    Atp(#[from] meroval::atp::AtpError),
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn read(p: &PathBuf) -> Result<String, CliError> {
    fs::read_to_string(p).map_err(|source| CliError::Read { path: p.display().to_string(), source })
}

fn settings(cli: &Cli) -> Result<RunSettings, CliError> {
    let portfolio = if cli.provers.is_empty() {
        vec![ProverConfig::builtin()]
    } else {
        cli.provers.iter().map(|s| ProverConfig::from_spec(s)).collect::<Result<_, _>>()?
    };
    Ok(RunSettings { portfolio, budget: AtpBudget { seconds: cli.time_limit, megabytes: cli.mem_limit }, jobs: cli.jobs })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let open = || Workspace::open(&cli.workspace);
    match &cli.command {
        Command::Init => {
            Workspace::init(&cli.workspace)?;
            println!("initialized {}", cli.workspace.display());
        }
        Command::Ingest { data, index, ontology, mapping } => {
            let index = index.as_ref().map(read).transpose()?;
            let s = open()?.ingest(&read(data)?, index.as_deref(), &read(ontology)?, &read(mapping)?)?;
            println!("ontology {}\nmapping {}", s.ontology.unwrap_or_default(), s.mapping.unwrap_or_default());
        }
        Command::GenCqs => {
            let m = open()?.gen_cqs()?;
            for e in &m {
                println!("{}\t{}\t{:?}\t{}", e.cq_id, e.pair_text, e.qp, e.kif);
            }
            println!("{} questions", m.len());
        }
        Command::Precheck => {
            let v = open()?.precheck()?;
            for (e, p) in &v {
                println!("{}\t{}\t{}", e.cq_id, e.pair_text, serde_json::to_string(p)?);
            }
            println!("{} violations", v.len());
        }
        Command::Evaluate { relation, pairs } => {
            let ws = open()?;
            let relation = relation.as_deref().map(str::parse).transpose().map_err(|e| ServiceError::BadRequest(format!("{e}")))?;
            let scope = Scope { relation, pairs: pairs.clone() };
            let st = settings(&cli)?;
            let runner = ws.runner(&st);
            let (id, ev) = ws.evaluate(&runner, st.jobs, &scope, None)?;
            println!("evaluation {id}\nprover runs {}\n{}", runner.invocations(), meroval::evaluator::render_report(&ev.metrics));
        }
        Command::Report { json } => {
            let ws = open()?;
            if *json {
                let (_, ev) = ws.latest_evaluation()?;
                println!("{}", serde_json::to_string_pretty(&ev.metrics)?);
            } else {
                print!("{}", ws.report()?);
            }
        }
        Command::ApplyHeuristics { phase } => {
            let c = open()?.apply_heuristics(*phase)?;
            println!("{phase}: {} synsets remapped\nmapping {}", c.propagated, c.mapping);
        }
        Command::ApplyPatch { file } => {
            let (id, (replaced, added)) = open()?.apply_patch(&read(file)?)?;
            println!("{replaced} edits to existing statements, {added} axioms added\nontology {id}");
        }
        Command::PropagateBlc { file, min_descendants } => {
            let c = open()?.propagate_blc(&read(file)?, *min_descendants)?;
            println!("{} hyponyms rewritten, {} entries changed\nmapping {}", c.propagated, c.changed, c.mapping);
        }
        Command::Serve { addr, min_descendants } => {
            let state = AppState::new(open()?, settings(&cli)?, *min_descendants);
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Service(e.into()))?;
            rt.block_on(serve(state, addr))?;
        }
        Command::Prove { file, max_clauses } => {
            let problem = read(file)?;
            let budget = Budget { max_seconds: cli.time_limit as f64, max_clauses: *max_clauses, ..Budget::default() };
            let v = prove_tptp(&problem, budget)?;
            print!("{}", szs_output(&v, &file.display().to_string()));
        }
        Command::Verify => {
            println!("state {}", open()?.verify()?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
