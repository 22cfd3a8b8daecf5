#![allow(dead_code)]

use std::collections::BTreeMap;

use meroval::atp::{AtpBudget, ProverConfig, Runner, VerdictCache};
use meroval::corpus::{compute_blcs, extract_meronymy_pairs, parse_database, BlcAssignment, MeronymyPair, SynsetGraph, SynsetId};
use meroval::mapping::{apply_heuristics, parse_mapping, propagate_correction, Mapping, Phase, Target};
use meroval::ontology::{CorrectionPatch, Ontology};

pub const DATA: &str = include_str!("../../fixtures/data.noun");
pub const INDEX: &str = include_str!("../../fixtures/index.noun");
pub const KIF: &str = include_str!("../../fixtures/ontology.kif");
pub const MAPPING: &str = include_str!("../../fixtures/mapping.txt");
pub const BLC_CORRECTIONS: &str = include_str!("../../fixtures/blc-corrections.txt");
pub const SUBSTANCE_PATCH: &str = include_str!("../../fixtures/substance.patch");
pub const MEMBER_PATCH: &str = include_str!("../../fixtures/member.patch");
pub const PART_PATCH: &str = include_str!("../../fixtures/part.patch");

pub const MIN_DESCENDANTS: usize = 3;

pub struct World {
    pub graph: SynsetGraph,
    pub pairs: Vec<MeronymyPair>,
    pub mapping: Mapping,
    pub ontology: Ontology,
    pub blcs: Vec<BlcAssignment>,
}

pub fn world() -> World {
    let graph = parse_database(DATA, Some(INDEX)).expect("fixture data");
    let pairs = extract_meronymy_pairs(&graph);
    let mapping = parse_mapping(MAPPING, &graph).expect("fixture mapping");
    let ontology = Ontology::parse(KIF).expect("fixture ontology");
    let blcs = compute_blcs(&graph, MIN_DESCENDANTS);
    World { graph, pairs, mapping, ontology, blcs }
}

pub fn patch(src: &str) -> CorrectionPatch {
    CorrectionPatch::parse(src).expect("fixture patch")
}

pub fn blc_corrections(w: &World) -> BTreeMap<SynsetId, Vec<Target>> {
    let m = parse_mapping(BLC_CORRECTIONS, &w.graph).expect("blc corrections");
    m.entries.into_iter().map(|(s, e)| (s, e.targets)).collect()
}

pub struct Snapshot {
    pub name: &'static str,
    pub mapping: Mapping,
    pub ontology: Ontology,
}

/// Initial state followed by the three correction phases.
pub fn phases(w: &World) -> Vec<Snapshot> {
    let m0 = w.mapping.clone();
    let o0 = w.ontology.clone();
    let (m1, _) = propagate_correction(&m0, &w.graph, &w.blcs, &blc_corrections(w)).expect("propagation");
    let (m2, _) = apply_heuristics(&m1, &w.graph, &o0.index, Phase::H1).expect("H1");
    let (m2, _) = apply_heuristics(&m2, &w.graph, &o0.index, Phase::H2).expect("H2");
    let mut o3 = o0.clone();
    for src in [SUBSTANCE_PATCH, MEMBER_PATCH, PART_PATCH] {
        o3 = o3.apply_patch(&patch(src)).expect("patch applies");
    }
    let (m3, _) = apply_heuristics(&m2, &w.graph, &o3.index, Phase::H2Prime).expect("H2'");
    vec![
        Snapshot { name: "initial", mapping: m0, ontology: o0.clone() },
        Snapshot { name: "structural", mapping: m1, ontology: o0.clone() },
        Snapshot { name: "opportunistic", mapping: m2, ontology: o0 },
        Snapshot { name: "ontology", mapping: m3, ontology: o3 },
    ]
}

pub fn budget() -> AtpBudget {
    AtpBudget { seconds: 5, megabytes: 512 }
}

pub fn micro_runner() -> Runner {
    Runner::new(vec![ProverConfig::builtin()], budget(), VerdictCache::in_memory())
}
