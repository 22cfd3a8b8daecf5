mod common;

use std::collections::{BTreeMap, BTreeSet};

use meroval::corpus::{compute_blcs, parse_database, SynsetId, WnRelation};
use meroval::evaluator::{build_triage, PairStatus};
use meroval::mapping::{parse_mapping, propagate_correction, Provenance, Target};
use meroval::pipeline::evaluate;
use proptest::prelude::*;

#[test]
fn fixture_parses_and_resolves() {
    let w = common::world();
    assert_eq!(w.graph.len(), 33);
    for s in w.graph.synsets() {
        for t in s.hypernyms.iter().chain(s.meronyms.values().flatten()).chain(s.holonyms.values().flatten()) {
            assert!(w.graph.get(*t).is_ok(), "{} points at {t}", w.graph.name(s.id));
        }
    }
    let by_rel: BTreeMap<WnRelation, usize> = w.pairs.iter().fold(BTreeMap::new(), |mut m, p| {
        *m.entry(p.relation).or_default() += 1;
        m
    });
    assert_eq!(by_rel, [(WnRelation::Substance, 3), (WnRelation::Member, 10), (WnRelation::Part, 4)].into());
    assert_ne!(w.graph.resolve("heart#1:n").unwrap(), w.graph.resolve("heart#2:n").unwrap());
    w.mapping.validate(&w.ontology.index, &w.graph).unwrap();
    assert!(w.mapping.get(w.graph.resolve("heart#1:n").unwrap()).is_none());
    let blc = w.blcs.iter().find(|b| w.graph.name(b.synset) == "genus_ovis#1:n").unwrap();
    assert_eq!(w.graph.name(blc.blc), "mammal_genus#1:n");
}

#[test]
fn phases_leave_the_base_untouched() {
    let w = common::world();
    let snaps = common::phases(&w);
    assert_eq!(snaps[0].mapping, w.mapping);
    assert_eq!(snaps[2].ontology.content_hash(), w.ontology.content_hash());
    assert_ne!(snaps[3].ontology.content_hash(), w.ontology.content_hash());
    let dicot = w.graph.resolve("dicot_genus#1:n").unwrap();
    assert_eq!(snaps[2].mapping.targets(dicot).unwrap(), &[Target::sub("Group")]);
    assert_eq!(snaps[3].mapping.targets(dicot).unwrap(), &[Target::sub("GroupOfPlants")]);
}

fn dag_text(parents: &[Vec<usize>]) -> String {
    let off = |i: usize| 100 + i * 10;
    let mut out = String::new();
    for (i, ps) in parents.iter().enumerate() {
        let ptrs: Vec<String> = ps.iter().map(|p| format!("@ {:08} n 0000", off(*p))).collect();
        out.push_str(&format!("{:08} 03 n 01 w{i} 0 {:03} {} | node\n", off(i), ps.len(), ptrs.join(" ")));
    }
    out
}

fn dag() -> impl Strategy<Value = Vec<Vec<usize>>> {
    (2usize..25).prop_flat_map(|n| {
        (0..n)
            .map(|i| {
                if i == 0 {
                    Just(Vec::new()).boxed()
                } else {
                    prop::collection::btree_set(0..i, 0..=2.min(i)).prop_map(|s| s.into_iter().collect()).boxed()
                }
            })
            .collect::<Vec<_>>()
    })
}

proptest! {
    #[test]
    #[allow(clippy::needless_range_loop)]
    fn closure_matches_transitive_reachability(parents in dag()) {
        let g = parse_database(&dag_text(&parents), None).unwrap();
        let n = parents.len();
        // reach[a][b]: b is a strict ancestor of a
        let mut reach = vec![vec![false; n]; n];
        for (a, ps) in parents.iter().enumerate() {
            for &p in ps {
                reach[a][p] = true;
            }
        }
        for k in 0..n {
            for a in 0..n {
                for b in 0..n {
                    if reach[a][k] && reach[k][b] {
                        reach[a][b] = true;
                    }
                }
            }
        }
        let id = |i: usize| SynsetId::noun((100 + i * 10) as u32);
        for b in 0..n {
            let want: BTreeSet<SynsetId> = (0..n).filter(|&a| reach[a][b]).map(id).collect();
            prop_assert_eq!(g.hyponym_closure(id(b)), want);
            for a in 0..n {
                prop_assert_eq!(g.is_hyponym_of(id(a), id(b)).unwrap(), reach[a][b]);
            }
        }
    }
}

const FIVE: &str = "\
00000100 03 n 01 root 0 000 | top
00000200 03 n 01 genus 0 001 @ 00000100 n 0000 | a genus
00000301 03 n 01 h_one 0 001 @ 00000200 n 0000 | member
00000302 03 n 01 h_two 0 001 @ 00000200 n 0000 | member
00000303 03 n 01 h_three 0 001 @ 00000200 n 0000 | member
00000304 03 n 01 h_four 0 001 @ 00000200 n 0000 | member
00000305 03 n 01 h_five 0 001 @ 00000200 n 0000 | member
00000306 03 n 01 h_other 0 001 @ 00000200 n 0000 | member
";

#[test]
fn propagation_rewrites_exactly_the_equal_hyponyms() {
    let g = parse_database(FIVE, None).unwrap();
    let mut src = String::from("root#1:n &%Entity=\ngenus#1:n &%Mammal+\nh_other#1:n &%Canine+\n");
    for h in ["one", "two", "three", "four", "five"] {
        src.push_str(&format!("h_{h}#1:n &%Mammal+\n"));
    }
    let m = parse_mapping(&src, &g).unwrap();
    let blcs = compute_blcs(&g, 3);
    let genus = g.resolve("genus#1:n").unwrap();
    let fix = [(genus, vec![Target::sub("GroupOfAnimals")])].into();
    let (out, n) = propagate_correction(&m, &g, &blcs, &fix).unwrap();
    assert_eq!(n, 5);
    for h in ["one", "two", "three", "four", "five"] {
        let e = out.get(g.resolve(&format!("h_{h}#1:n")).unwrap()).unwrap();
        assert_eq!(e.targets, vec![Target::sub("GroupOfAnimals")]);
        assert_eq!(e.provenance, Provenance::BlcPropagated);
    }
    assert_eq!(out.targets(g.resolve("h_other#1:n").unwrap()).unwrap(), &[Target::sub("Canine")]);
    assert_eq!(out.targets(genus).unwrap(), &[Target::sub("GroupOfAnimals")]);
}

#[test]
fn fish_genus_members_form_the_largest_unvalidated_group() {
    let w = common::world();
    let ev = evaluate(&w.graph, &w.pairs, &w.mapping, &w.ontology, &common::micro_runner(), 2).unwrap();
    let groups = build_triage(&ev.classifications, &w.mapping, &[PairStatus::Unvalidated].into());
    let top = &groups[0];
    assert_eq!(top.frequency, 3);
    let parts: BTreeSet<String> = top.pairs.iter().map(|p| w.graph.name(p.part)).collect();
    assert_eq!(parts, ["pike#1:n", "salmon#1:n", "trout#1:n"].map(String::from).into());
    assert!(groups.windows(2).all(|g| g[0].frequency >= g[1].frequency));
}
