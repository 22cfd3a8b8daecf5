//! Pair classification, metric tables, triage groups and diagnoses.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atp::{CqOutcome, CqVerdict};
use crate::corpus::{MeronymyPair, SynsetGraph, WnRelation};
use crate::cqgen::{ManifestEntry, Precheck};
use crate::mapping::{targets_text, Mapping, Target};
use crate::ontology::{ConceptKind, StructuralIndex};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("pair {0} has neither a precheck violation nor a verdict")]
    MissingRecord(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairStatus {
    Validated,
    Unvalidated,
    Unknown,
}

impl std::str::FromStr for PairStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "validated" => Ok(PairStatus::Validated),
            "unvalidated" => Ok(PairStatus::Unvalidated),
            "unknown" => Ok(PairStatus::Unknown),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

impl fmt::Display for PairStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairStatus::Validated => "validated",
            PairStatus::Unvalidated => "unvalidated",
            PairStatus::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Cause {
    PassingCq,
    NonPassingCq,
    DomainViolation,
    UnresolvedCq,
    UnmappedSynset,
}

impl Cause {
    pub fn status(self) -> PairStatus {
        match self {
            Cause::PassingCq => PairStatus::Validated,
            Cause::NonPassingCq | Cause::DomainViolation => PairStatus::Unvalidated,
            Cause::UnresolvedCq | Cause::UnmappedSynset => PairStatus::Unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairClassification {
    pub pair: MeronymyPair,
    pub status: PairStatus,
    pub cause: Cause,
    pub cq_id: Option<String>,
    pub violation: Option<Precheck>,
}

/// Per-pair evidence gathered by the pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PairRecord {
    /// No question exists: a synset is unmapped or its targets are unusable.
    NoQuestion,
    Violation {
        cq_id: String,
        precheck: Precheck,
    },
    Verdict(CqVerdict),
}

pub fn classify_pairs(pairs: &[MeronymyPair], records: &BTreeMap<MeronymyPair, PairRecord>) -> Result<Vec<PairClassification>, EvalError> {
    pairs
        .iter()
        .map(|p| {
            let (cause, cq_id, violation) = match records.get(p) {
                None => return Err(EvalError::MissingRecord(format!("{}:{}:{}", p.relation, p.part, p.whole))),
                Some(PairRecord::NoQuestion) => (Cause::UnmappedSynset, None, None),
                Some(PairRecord::Violation { cq_id, precheck }) => (Cause::DomainViolation, Some(cq_id.clone()), Some(precheck.clone())),
                Some(PairRecord::Verdict(v)) => (
                    match v.status {
                        CqOutcome::Passing => Cause::PassingCq,
                        CqOutcome::NonPassing => Cause::NonPassingCq,
                        CqOutcome::Unresolved => Cause::UnresolvedCq,
                    },
                    Some(v.cq_id.clone()),
                    None,
                ),
            };
            Ok(PairClassification { pair: *p, status: cause.status(), cause, cq_id, violation })
        })
        .collect()
}

/// `num/den` rounded half-up to hundredths, exactly.
pub fn hundredths(num: u64, den: u64) -> u64 {
    if den == 0 {
        return 0;
    }
    (200 * num + den) / (2 * den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub relation: String,
    pub total: u64,
    pub validated: u64,
    pub unvalidated: u64,
    pub unvalidated_via_atp: u64,
    pub unknown: u64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

impl MetricsRow {
    /// Recall V/Total, precision V/(V+U), F1 their harmonic mean, which for
    /// these definitions equals 2V/(Total+V+U).
    pub fn from_counts(relation: &str, total: u64, validated: u64, unvalidated: u64, via_atp: u64, unknown: u64) -> Self {
        let v = validated;
        MetricsRow {
            relation: relation.to_string(),
            total,
            validated,
            unvalidated,
            unvalidated_via_atp: via_atp,
            unknown,
            recall: hundredths(v, total) as f64 / 100.0,
            precision: hundredths(v, v + unvalidated) as f64 / 100.0,
            f1: hundredths(2 * v, total + v + unvalidated) as f64 / 100.0,
        }
    }

    pub fn cells(&self) -> [String; 3] {
        [format!("{:.2}", self.recall), format!("{:.2}", self.precision), format!("{:.2}", self.f1)]
    }
}

/// Rows for substance, member and part, then the total row.
pub fn compute_metrics(classifications: &[PairClassification]) -> Vec<MetricsRow> {
    let mut rows = Vec::new();
    let mut sums = [0u64; 5];
    for r in WnRelation::ALL {
        let mut c = [0u64; 5];
        for k in classifications.iter().filter(|k| k.pair.relation == r) {
            c[0] += 1;
            match k.status {
                PairStatus::Validated => c[1] += 1,
                PairStatus::Unvalidated => {
                    c[2] += 1;
                    if k.cause == Cause::NonPassingCq {
                        c[3] += 1;
                    }
                }
                PairStatus::Unknown => c[4] += 1,
            }
        }
        for i in 0..5 {
            sums[i] += c[i];
        }
        rows.push(MetricsRow::from_counts(r.as_str(), c[0], c[1], c[2], c[3], c[4]));
    }
    rows.push(MetricsRow::from_counts("total", sums[0], sums[1], sums[2], sums[3], sums[4]));
    rows
}

fn thousands(n: u64) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, c) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Aligned text table in the layout of the published evaluation tables.
pub fn render_report(rows: &[MetricsRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>8} {:>7} {:>8} {:>6} {:>8} {:>7} {:>9} {:>5}",
        "relation", "Total", "V", "U", "(ATP)", "?", "Recall", "Precision", "F1"
    );
    for r in rows {
        let [rc, pr, f1] = r.cells();
        let _ = writeln!(
            out,
            "{:<10} {:>8} {:>7} {:>8} {:>6} {:>8} {:>7} {:>9} {:>5}",
            r.relation,
            thousands(r.total),
            thousands(r.validated),
            thousands(r.unvalidated),
            format!("({})", thousands(r.unvalidated_via_atp)),
            thousands(r.unknown),
            rc,
            pr,
            f1
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TriageSignature {
    pub part_targets: String,
    pub whole_targets: String,
    pub relation: WnRelation,
}

impl fmt::Display for TriageSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} / {} / {}", self.part_targets, self.whole_targets, self.relation)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriageGroup {
    pub signature: TriageSignature,
    pub pairs: Vec<MeronymyPair>,
    pub frequency: usize,
}

fn side(mapping: &Mapping, s: crate::corpus::SynsetId) -> String {
    mapping.targets(s).map(targets_text).unwrap_or_else(|| "-".into())
}

/// Groups failing pairs by mapping signature, most frequent first.
pub fn build_triage(classifications: &[PairClassification], mapping: &Mapping, statuses: &BTreeSet<PairStatus>) -> Vec<TriageGroup> {
    let mut groups: BTreeMap<TriageSignature, Vec<MeronymyPair>> = BTreeMap::new();
    for k in classifications.iter().filter(|k| statuses.contains(&k.status)) {
        let sig = TriageSignature {
            part_targets: side(mapping, k.pair.part),
            whole_targets: side(mapping, k.pair.whole),
            relation: k.pair.relation,
        };
        groups.entry(sig).or_default().push(k.pair);
    }
    let mut out: Vec<TriageGroup> = groups
        .into_iter()
        .map(|(signature, mut pairs)| {
            pairs.sort();
            TriageGroup { frequency: pairs.len(), signature, pairs }
        })
        .collect();
    out.sort_by(|a, b| b.frequency.cmp(&a.frequency).then_with(|| a.signature.to_string().cmp(&b.signature.to_string())));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CqCounts {
    pub total: usize,
    pub passing: usize,
    pub non_passing: usize,
    pub unresolved: usize,
}

/// Counts distinct question formulas; pairs sharing a formula count once.
pub fn count_cqs(manifest: &[ManifestEntry], verdicts: &BTreeMap<String, CqVerdict>) -> CqCounts {
    let mut by_formula: BTreeMap<&str, Option<CqOutcome>> = BTreeMap::new();
    for m in manifest {
        let outcome = verdicts.get(&m.cq_id).map(|v| v.status);
        let slot = by_formula.entry(m.formula_hash.as_str()).or_insert(None);
        if slot.is_none() {
            *slot = outcome;
        }
    }
    let mut c = CqCounts { total: by_formula.len(), ..CqCounts::default() };
    for o in by_formula.values().flatten() {
        match o {
            CqOutcome::Passing => c.passing += 1,
            CqOutcome::NonPassing => c.non_passing += 1,
            CqOutcome::Unresolved => c.unresolved += 1,
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DiagnosisLabel {
    LackOfKnowledge,
    Metonymy,
    OntologicalDecision,
    ResourceLimit,
    UnknownCause,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub label: DiagnosisLabel,
    pub evidence: String,
}

/// Class pairs whose separation the ontology makes by design.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagnosisRules {
    pub axes: Vec<(String, String)>,
}

impl Default for DiagnosisRules {
    fn default() -> Self {
        DiagnosisRules { axes: vec![("Human".into(), "GroupOfAnimals".into()), ("Human".into(), "Animal".into())] }
    }
}

fn under(index: &StructuralIndex, ts: &[Target], class: &str) -> Option<String> {
    ts.iter().find(|t| index.is_subclass(&t.concept, class).unwrap_or(false)).map(|t| t.concept.clone())
}

pub fn diagnose(
    k: &PairClassification,
    verdict: Option<&CqVerdict>,
    mapping: &Mapping,
    index: &StructuralIndex,
    rules: &DiagnosisRules,
) -> Diagnosis {
    let d = |label, evidence: String| Diagnosis { label, evidence };
    if let Some(v) = verdict.filter(|v| v.any_timeout()) {
        let who: Vec<String> = v
            .per_prover
            .iter()
            .filter(|a| a.verdict.status == crate::logic::VerdictStatus::Timeout)
            .map(|a| format!("{} ({})", a.prover, a.direction))
            .collect();
        return d(DiagnosisLabel::ResourceLimit, format!("timeout: {}", who.join(", ")));
    }
    let part = mapping.targets(k.pair.part).unwrap_or(&[]);
    let whole = mapping.targets(k.pair.whole).unwrap_or(&[]);
    if k.status == PairStatus::Unvalidated {
        for (a, b) in &rules.axes {
            if let (Some(x), Some(y)) = (under(index, part, a), under(index, whole, b)) {
                return d(DiagnosisLabel::OntologicalDecision, format!("{x} is kept apart from {y} by design ({a}/{b})"));
            }
        }
    }
    let relation = crate::cqgen::select_relation(k.pair.relation);
    for (arg, ts) in [(1usize, part), (2, whole)] {
        let required = index.signatures.get(relation.as_str()).and_then(|s| s.get(&arg));
        let object_typed = required.is_some_and(|c| index.is_subclass(c, "Object").unwrap_or(false));
        for t in ts {
            let kind = index.classify(&t.concept).map(|c| c.kind);
            if object_typed && matches!(kind, Ok(ConceptKind::ClassOfAttributes) | Ok(ConceptKind::Attribute)) {
                return d(
                    DiagnosisLabel::Metonymy,
                    format!("attribute concept {} fills argument {arg} of {relation}, typed {}", t.concept, required.expect("checked")),
                );
            }
        }
    }
    match k.status {
        PairStatus::Unknown => d(DiagnosisLabel::LackOfKnowledge, "neither the question nor its negation follows".into()),
        _ => d(DiagnosisLabel::UnknownCause, format!("{:?}", k.cause)),
    }
}

/// Row per pair for listings: names, targets, status.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairView {
    pub pair: MeronymyPair,
    pub part: String,
    pub whole: String,
    pub part_targets: String,
    pub whole_targets: String,
    pub status: PairStatus,
    pub cause: Cause,
    pub cq_id: Option<String>,
}

pub fn pair_view(k: &PairClassification, graph: &SynsetGraph, mapping: &Mapping) -> PairView {
    PairView {
        pair: k.pair,
        part: graph.name(k.pair.part),
        whole: graph.name(k.pair.whole),
        part_targets: side(mapping, k.pair.part),
        whole_targets: side(mapping, k.pair.whole),
        status: k.status,
        cause: k.cause,
        cq_id: k.cq_id.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SynsetId;

    #[test]
    fn published_rows() {
        let r = MetricsRow::from_counts("substance", 797, 80, 660, 1, 57);
        // 80/740 = 0.108 rounds up
        assert_eq!(r.cells(), ["0.10", "0.11", "0.10"].map(String::from));
        let r = MetricsRow::from_counts("part", 9097, 1255, 1444, 72, 6398);
        assert_eq!(r.cells()[1], "0.46");
        let r = MetricsRow::from_counts("x", 10, 0, 5, 0, 5);
        assert_eq!(r.cells(), ["0.00", "0.00", "0.00"].map(String::from));
        let r = MetricsRow::from_counts("x", 0, 0, 0, 0, 0);
        assert_eq!(r.cells(), ["0.00", "0.00", "0.00"].map(String::from));
    }

    #[test]
    fn half_up_is_exact() {
        assert_eq!(hundredths(1, 8), 13); // 0.125
        assert_eq!(hundredths(1, 200), 1); // 0.005
        assert_eq!(hundredths(1255, 2699), 46);
    }

    fn pair(i: u32, r: WnRelation) -> MeronymyPair {
        MeronymyPair { relation: r, part: SynsetId::noun(i), whole: SynsetId::noun(1000 + i) }
    }

    #[test]
    fn missing_record_is_an_error() {
        let p = pair(1, WnRelation::Part);
        assert!(classify_pairs(&[p], &BTreeMap::new()).is_err());
        let recs = BTreeMap::from([(p, PairRecord::NoQuestion)]);
        let k = classify_pairs(&[p], &recs).unwrap();
        assert_eq!(k[0].status, PairStatus::Unknown);
    }

    #[test]
    fn triage_order() {
        let mut ks = Vec::new();
        let mut text = String::new();
        for i in 0..7 {
            let p = pair(i, WnRelation::Member);
            let (a, b) = if i < 5 { ("Fish", "GroupOfAnimals") } else { ("Plant", "Group") };
            text.push_str(&format!("{:08}\t{a}\tsubsumption\n{:08}\t{b}\tsubsumption\n", p.part.offset, p.whole.offset));
            ks.push(PairClassification { pair: p, status: PairStatus::Unknown, cause: Cause::UnresolvedCq, cq_id: None, violation: None });
        }
        let mut m = Mapping::default();
        for line in text.lines() {
            let cols: Vec<&str> = line.split('\t').collect();
            let s = SynsetId::noun(cols[0].parse().unwrap());
            let e = crate::mapping::MappingEntry {
                synset: s,
                targets: vec![Target::sub(cols[1])],
                provenance: crate::mapping::Provenance::Original,
                history: vec![],
            };
            m.entries.insert(s, e);
        }
        let g = build_triage(&ks, &m, &BTreeSet::from([PairStatus::Unknown]));
        assert_eq!(g.iter().map(|g| g.frequency).collect::<Vec<_>>(), vec![5, 2]);
        assert!(build_triage(&ks, &m, &BTreeSet::new()).is_empty());
        let mut rev = ks.clone();
        rev.reverse();
        assert_eq!(build_triage(&rev, &m, &BTreeSet::from([PairStatus::Unknown])), g);
    }

    #[test]
    fn report_layout() {
        let rows = vec![MetricsRow::from_counts("member", 12293, 19, 11963, 24, 311)];
        let r = render_report(&rows);
        assert!(r.contains("12,293"), "{r}");
        assert!(r.contains("(24)"));
    }
}
