mod common;

use std::collections::BTreeSet;

use meroval::atp::{AtpBudget, ProverConfig, Runner, VerdictCache};
use meroval::cqgen::formula_hash;
use meroval::pipeline::plan;

#[test]
fn subprocess_route_agrees_with_in_process() {
    let w = common::world();
    let budget = AtpBudget { seconds: 2, megabytes: 512 };
    let template = format!("{} prove {{problemFile}} --time-limit {{seconds}}", env!("CARGO_BIN_EXE_meroval"));
    let sub = ProverConfig::external("sub", "1", &template).unwrap();
    let inproc = Runner::new(vec![ProverConfig::builtin()], budget, VerdictCache::in_memory());
    let outproc = Runner::new(vec![sub], budget, VerdictCache::in_memory());

    let mut seen = BTreeSet::new();
    let mut compared = 0;
    for snap in common::phases(&w) {
        let p = plan(&w.graph, &w.pairs, &snap.mapping, &snap.ontology).unwrap();
        let fresh: Vec<_> = p.dispatch.into_iter().filter(|(_, f)| seen.insert((formula_hash(f), snap.ontology.content_hash()))).collect();
        let a = inproc.classify_all(&fresh, &snap.ontology, "m", 4).unwrap();
        let b = outproc.classify_all(&fresh, &snap.ontology, "m", 4).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.status, y.status, "{} in {}", x.cq_id, snap.name);
            let dirs = |v: &meroval::atp::CqVerdict| v.per_prover.iter().map(|t| (t.direction, t.verdict.status)).collect::<Vec<_>>();
            assert_eq!(dirs(x), dirs(y), "{} in {}", x.cq_id, snap.name);
        }
        compared += fresh.len();
    }
    assert!(compared > 20, "{compared}");
    assert!(outproc.invocations() > 0);
}
