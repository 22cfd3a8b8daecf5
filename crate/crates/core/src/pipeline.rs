//! One evaluation run: questions, prechecks, prover verdicts, pair
//! classifications and the metric table for a mapping/ontology snapshot.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atp::{AtpError, CqVerdict, Runner};
use crate::corpus::{MeronymyPair, SynsetGraph};
use crate::cqgen::{domain_precheck, generate, manifest_entry, CqError, Generated, ManifestEntry, Precheck};
use crate::evaluator::{classify_pairs, compute_metrics, EvalError, MetricsRow, PairClassification, PairRecord};
use crate::logic::Formula;
use crate::mapping::Mapping;
use crate::ontology::Ontology;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Cq(#[from] CqError),
    #[error(transparent)]
    Atp(#[from] AtpError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub ontology_version: String,
    pub mapping_version: String,
    pub manifest: Vec<ManifestEntry>,
    pub prechecks: BTreeMap<String, Precheck>,
    pub verdicts: BTreeMap<String, CqVerdict>,
    pub classifications: Vec<PairClassification>,
    pub metrics: Vec<MetricsRow>,
}

/// Questions that survive the precheck, in manifest order.
pub struct Plan {
    pub manifest: Vec<ManifestEntry>,
    pub prechecks: BTreeMap<String, Precheck>,
    pub dispatch: Vec<(String, Formula)>,
    records: BTreeMap<MeronymyPair, PairRecord>,
}

pub fn plan(graph: &SynsetGraph, pairs: &[MeronymyPair], mapping: &Mapping, ontology: &Ontology) -> Result<Plan, PipelineError> {
    let onto_ver = ontology.content_hash();
    let map_ver = mapping.version_hash();
    let mut out = Plan { manifest: Vec::new(), prechecks: BTreeMap::new(), dispatch: Vec::new(), records: BTreeMap::new() };
    for g in generate(pairs, mapping, &ontology.index) {
        match g {
            Generated::Unmapped(p) | Generated::IllFormed(p, _) => {
                out.records.insert(p, PairRecord::NoQuestion);
            }
            Generated::Question(cq) => {
                let pre = domain_precheck(&cq, &ontology.index)?;
                out.manifest.push(manifest_entry(&cq, graph, &onto_ver, &map_ver));
                out.prechecks.insert(cq.id.clone(), pre.clone());
                if pre == Precheck::Ok {
                    out.dispatch.push((cq.id.clone(), cq.formula.clone()));
                } else {
                    out.records.insert(cq.pair, PairRecord::Violation { cq_id: cq.id.clone(), precheck: pre });
                }
            }
        }
    }
    Ok(out)
}

pub fn evaluate(
    graph: &SynsetGraph,
    pairs: &[MeronymyPair],
    mapping: &Mapping,
    ontology: &Ontology,
    runner: &Runner,
    jobs: usize,
) -> Result<Evaluation, PipelineError> {
    let mut plan = plan(graph, pairs, mapping, ontology)?;
    let map_ver = mapping.version_hash();
    let results = runner.classify_all(&plan.dispatch, ontology, &map_ver, jobs)?;
    let by_id: BTreeMap<&str, &ManifestEntry> = plan.manifest.iter().map(|m| (m.cq_id.as_str(), m)).collect();
    let mut verdicts = BTreeMap::new();
    for v in results {
        let pair = by_id[v.cq_id.as_str()].pair;
        plan.records.insert(pair, PairRecord::Verdict(v.clone()));
        verdicts.insert(v.cq_id.clone(), v);
    }
    let classifications = classify_pairs(pairs, &plan.records)?;
    let metrics = compute_metrics(&classifications);
    Ok(Evaluation {
        ontology_version: ontology.content_hash(),
        mapping_version: map_ver,
        manifest: plan.manifest,
        prechecks: plan.prechecks,
        verdicts,
        classifications,
        metrics,
    })
}
