//! Synset to SUMO concept mapping, BLC propagation and group heuristics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{BlcAssignment, CorpusError, SynsetGraph, SynsetId};
use crate::ontology::StructuralIndex;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MappingError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown mapping suffix `{suffix}`")]
    UnknownSuffix { line: usize, suffix: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("concept `{0}` is not in the ontology")]
    UnresolvableConcept(String),
    #[error("{0} has more than one equivalence target")]
    MultipleEquivalences(String),
    #[error("{0} is not a basic level concept")]
    NotBlc(String),
    #[error("synset {0} has no mapping")]
    Unmapped(String),
    #[error("heuristic {phase} needs class `{class}`, which the ontology lacks")]
    MissingClass { phase: Phase, class: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MappingRelation {
    Equivalence,
    Subsumption,
    Instance,
}

impl MappingRelation {
    pub fn suffix(self) -> char {
        match self {
            MappingRelation::Equivalence => '=',
            MappingRelation::Subsumption => '+',
            MappingRelation::Instance => '@',
        }
    }

    pub fn from_suffix(c: char) -> Option<Self> {
        match c {
            '=' => Some(MappingRelation::Equivalence),
            '+' => Some(MappingRelation::Subsumption),
            '@' => Some(MappingRelation::Instance),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MappingRelation::Equivalence => "equivalence",
            MappingRelation::Subsumption => "subsumption",
            MappingRelation::Instance => "instance",
        }
    }
}

impl FromStr for MappingRelation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "equivalence" | "=" => Ok(MappingRelation::Equivalence),
            "subsumption" | "+" => Ok(MappingRelation::Subsumption),
            "instance" | "@" => Ok(MappingRelation::Instance),
            other => Err(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Target {
    pub concept: String,
    pub relation: MappingRelation,
}

impl Target {
    pub fn new(concept: impl Into<String>, relation: MappingRelation) -> Self {
        Target { concept: concept.into(), relation }
    }

    pub fn sub(concept: impl Into<String>) -> Self {
        Target::new(concept, MappingRelation::Subsumption)
    }
}

/// `+Heart`, `=Lamb`, `@Earth`.
impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.relation.suffix(), self.concept)
    }
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut chars = s.chars();
        let r = chars.next().and_then(MappingRelation::from_suffix).ok_or_else(|| format!("bad target `{s}`"))?;
        let concept: String = chars.collect();
        if concept.is_empty() {
            return Err(format!("bad target `{s}`"));
        }
        Ok(Target::new(concept, r))
    }
}

pub fn targets_text(ts: &[Target]) -> String {
    ts.iter().map(Target::to_string).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Original,
    BlcPropagated,
    Heuristic,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub targets: Vec<Target>,
    pub provenance: Provenance,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingEntry {
    pub synset: SynsetId,
    /// Sorted and deduplicated.
    pub targets: Vec<Target>,
    pub provenance: Provenance,
    /// Every value the entry has held, oldest first; the last one is current.
    pub history: Vec<HistoryRecord>,
}

impl MappingEntry {
    fn new(synset: SynsetId, targets: Vec<Target>) -> Self {
        let targets = normalize(targets);
        MappingEntry {
            synset,
            history: vec![HistoryRecord { targets: targets.clone(), provenance: Provenance::Original, note: String::new() }],
            targets,
            provenance: Provenance::Original,
        }
    }

    fn record(&mut self, targets: Vec<Target>, provenance: Provenance, note: &str) {
        let targets = normalize(targets);
        self.history.push(HistoryRecord { targets: targets.clone(), provenance, note: note.to_string() });
        self.targets = targets;
        self.provenance = provenance;
    }

    /// Value before any heuristic rewrites; heuristics test their premise on it.
    fn premise_targets(&self) -> &[Target] {
        self.history.iter().rev().find(|h| h.provenance != Provenance::Heuristic).map(|h| h.targets.as_slice()).unwrap_or(&self.targets)
    }

    /// Replays the history; equals `targets` for a consistent entry.
    pub fn replay(&self) -> Option<&[Target]> {
        self.history.last().map(|h| h.targets.as_slice())
    }
}

fn normalize(mut ts: Vec<Target>) -> Vec<Target> {
    ts.sort();
    ts.dedup();
    ts
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mapping {
    #[serde(with = "entry_list")]
    pub entries: BTreeMap<SynsetId, MappingEntry>,
}

/// Entries as a JSON list; each entry carries its own synset.
mod entry_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<SynsetId, MappingEntry>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.values())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<SynsetId, MappingEntry>, D::Error> {
        let v: Vec<MappingEntry> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|e| (e.synset, e)).collect())
    }
}

impl Mapping {
    pub fn get(&self, s: SynsetId) -> Option<&MappingEntry> {
        self.entries.get(&s)
    }

    pub fn targets(&self, s: SynsetId) -> Option<&[Target]> {
        self.entries.get(&s).map(|e| e.targets.as_slice())
    }

    /// Hash over effective targets only; history and provenance do not count.
    pub fn version_hash(&self) -> String {
        let mut h = Sha256::new();
        for (s, e) in &self.entries {
            h.update(format!("{s}\t{}\n", targets_text(&e.targets)).as_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Canonical tab-separated form, one target per line.
    pub fn to_tsv(&self, graph: &SynsetGraph) -> String {
        let mut out = String::new();
        for (s, e) in &self.entries {
            for t in &e.targets {
                out.push_str(&format!("{}\t{}\t{}\n", graph.name(*s), t.concept, t.relation.as_str()));
            }
        }
        out
    }

    /// Checks targets against the ontology: concepts exist, at most one
    /// equivalence per synset.
    pub fn validate(&self, index: &StructuralIndex, graph: &SynsetGraph) -> Result<(), MappingError> {
        for e in self.entries.values() {
            check_targets(&e.targets, index, &graph.name(e.synset))?;
        }
        Ok(())
    }
}

fn concept_known(index: &StructuralIndex, c: &str) -> bool {
    index.is_known_class(c) || index.is_relation(c) || index.instance_of.contains_key(c)
}

fn check_targets(ts: &[Target], index: &StructuralIndex, who: &str) -> Result<(), MappingError> {
    if ts.iter().filter(|t| t.relation == MappingRelation::Equivalence).count() > 1 {
        return Err(MappingError::MultipleEquivalences(who.to_string()));
    }
    for t in ts {
        if !concept_known(index, &t.concept) {
            return Err(MappingError::UnresolvableConcept(t.concept.clone()));
        }
    }
    Ok(())
}

/// Reads either the official form (a line whose first token names the
/// synset, by offset or `lemma#k:n`, carrying trailing `&%Concept{=,+,@}`
/// tokens) or the tab-separated form `synset<TAB>concept<TAB>relation`.
pub fn parse_mapping(src: &str, graph: &SynsetGraph) -> Result<Mapping, MappingError> {
    let mut acc: BTreeMap<SynsetId, Vec<Target>> = BTreeMap::new();
    for (i, line) in src.lines().enumerate() {
        let n = i + 1;
        if line.starts_with("  ") || line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if line.contains('\t') {
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(MappingError::Parse { line: n, message: "expected synset, concept and relation".into() });
            }
            let s = graph.resolve(cols[0])?;
            let r: MappingRelation = cols[2].parse().map_err(|suffix| MappingError::UnknownSuffix { line: n, suffix })?;
            acc.entry(s).or_default().push(Target::new(cols[1], r));
            continue;
        }
        let first = line.split_whitespace().next().unwrap_or_default();
        let s = if first.len() == 8 && first.bytes().all(|b| b.is_ascii_digit()) {
            graph.resolve(&format!("{first}-n"))?
        } else {
            graph.resolve(first)?
        };
        let mut found = false;
        for tok in line.split_whitespace().filter(|t| t.starts_with("&%")) {
            let body = &tok[2..];
            let suffix = body.chars().last().unwrap_or(' ');
            let r =
                MappingRelation::from_suffix(suffix).ok_or_else(|| MappingError::UnknownSuffix { line: n, suffix: suffix.to_string() })?;
            let concept = &body[..body.len() - suffix.len_utf8()];
            if concept.is_empty() {
                return Err(MappingError::Parse { line: n, message: format!("empty concept in `{tok}`") });
            }
            acc.entry(s).or_default().push(Target::new(concept, r));
            found = true;
        }
        if !found {
            return Err(MappingError::Parse { line: n, message: "no `&%` mapping token".into() });
        }
    }
    Ok(Mapping { entries: acc.into_iter().map(|(s, ts)| (s, MappingEntry::new(s, ts))).collect() })
}

/// Rewrites each corrected BLC and every hyponym whose targets equal the
/// BLC's targets before the correction. Returns the number of hyponym
/// rewrites.
pub fn propagate_correction(
    mapping: &Mapping,
    graph: &SynsetGraph,
    blcs: &[BlcAssignment],
    corrected: &BTreeMap<SynsetId, Vec<Target>>,
) -> Result<(Mapping, usize), MappingError> {
    let blc_set: BTreeSet<SynsetId> = blcs.iter().map(|b| b.blc).collect();
    let mut out = mapping.clone();
    let mut count = 0;
    for (&b, new) in corrected {
        if !blc_set.contains(&b) {
            return Err(MappingError::NotBlc(graph.name(b)));
        }
        let original = mapping.targets(b).ok_or_else(|| MappingError::Unmapped(graph.name(b)))?.to_vec();
        let new = normalize(new.clone());
        let note = format!("blc {}", graph.name(b));
        for h in graph.hyponym_closure(b) {
            let Some(e) = mapping.get(h) else { continue };
            if e.targets == original && out.entries[&h].targets != new {
                out.entries.get_mut(&h).expect("present").record(new.clone(), Provenance::BlcPropagated, &note);
                count += 1;
            }
        }
        let e = out.entries.get_mut(&b).expect("present");
        if e.targets != new {
            e.record(new, Provenance::Manual, "blc correction");
        }
    }
    Ok((out, count))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    H1,
    H2,
    #[serde(rename = "H2'")]
    H2Prime,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::H1 => "H1",
            Phase::H2 => "H2",
            Phase::H2Prime => "H2'",
        })
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "H1" => Ok(Phase::H1),
            "H2" => Ok(Phase::H2),
            "H2'" | "H2p" | "H2prime" => Ok(Phase::H2Prime),
            other => Err(format!("unknown heuristic phase `{other}`")),
        }
    }
}

impl Phase {
    /// (premise class, replacement class)
    pub fn classes(self) -> (&'static str, &'static str) {
        match self {
            Phase::H1 => ("Animal", "GroupOfAnimals"),
            Phase::H2 => ("Plant", "Group"),
            Phase::H2Prime => ("Plant", "GroupOfPlants"),
        }
    }
}

pub const GROUP_SYNSET: &str = "group#1:n";

/// Group heuristics: a hyponym of `group#1:n` mapped to a subclass of the
/// premise class is remapped by subsumption to the replacement class.
pub fn apply_heuristics(
    mapping: &Mapping,
    graph: &SynsetGraph,
    index: &StructuralIndex,
    phase: Phase,
) -> Result<(Mapping, usize), MappingError> {
    let (premise, replacement) = phase.classes();
    for c in [premise, replacement] {
        if !index.is_known_class(c) {
            return Err(MappingError::MissingClass { phase, class: c.to_string() });
        }
    }
    let group = graph.resolve(GROUP_SYNSET)?;
    let new = vec![Target::sub(replacement)];
    let mut out = mapping.clone();
    let mut count = 0;
    for (s, e) in &mapping.entries {
        if e.targets == new || !graph.is_hyponym_of(*s, group)? {
            continue;
        }
        let hit = e.premise_targets().iter().any(|t| index.is_subclass(&t.concept, premise).unwrap_or(false));
        if hit {
            out.entries.get_mut(s).expect("present").record(new.clone(), Provenance::Heuristic, &phase.to_string());
            count += 1;
        }
    }
    Ok((out, count))
}

/// Manual edit; the previous value stays in the history.
pub fn edit_mapping(
    mapping: &Mapping,
    graph: &SynsetGraph,
    index: &StructuralIndex,
    synset: SynsetId,
    targets: Vec<Target>,
    note: &str,
) -> Result<Mapping, MappingError> {
    graph.get(synset)?;
    if targets.is_empty() {
        return Err(MappingError::Parse { line: 0, message: "a mapping needs at least one target".into() });
    }
    check_targets(&targets, index, &graph.name(synset))?;
    let mut out = mapping.clone();
    match out.entries.get_mut(&synset) {
        Some(e) => e.record(targets, Provenance::Manual, note),
        None => {
            let mut e = MappingEntry::new(synset, targets);
            e.provenance = Provenance::Manual;
            e.history[0].provenance = Provenance::Manual;
            e.history[0].note = note.to_string();
            out.entries.insert(synset, e);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_database;
    use crate::ontology::Ontology;

    const DATA: &str = "\
00000010 03 n 01 group 0 002 ~ 00000020 n 0000 ~ 00000030 n 0000 | any number of entities
00000020 03 n 01 fish_genus 0 001 @ 00000010 n 0000 | any of various genus of fish
00000030 03 n 01 dicot_genus 0 001 @ 00000010 n 0000 | genus of flowering plants
00000040 03 n 01 trout 0 000 | a fish
";

    const KIF: &str = "\
(subclass Organism Object)
(subclass Animal Organism)
(subclass Fish Animal)
(subclass Plant Organism)
(subclass FloweringPlant Plant)
(subclass Collection Object)
(subclass Group Collection)
(subclass GroupOfAnimals Group)
";

    fn setup() -> (SynsetGraph, StructuralIndex) {
        (parse_database(DATA, None).unwrap(), Ontology::parse(KIF).unwrap().index)
    }

    #[test]
    fn parses_both_forms() {
        let (g, _) = setup();
        let m =
            parse_mapping("00000020 03 n 01 fish_genus 0 000 | fish &%Fish=\ndicot_genus#1:n &%FloweringPlant+ &%Group+\n", &g).unwrap();
        assert_eq!(m.targets(SynsetId::noun(20)).unwrap(), &[Target::new("Fish", MappingRelation::Equivalence)]);
        assert_eq!(m.targets(SynsetId::noun(30)).unwrap().len(), 2);
        let tsv = m.to_tsv(&g);
        assert_eq!(parse_mapping(&tsv, &g).unwrap().version_hash(), m.version_hash());
    }

    #[test]
    fn parse_errors() {
        let (g, _) = setup();
        assert!(matches!(parse_mapping("trout#1:n &%Fish?\n", &g), Err(MappingError::UnknownSuffix { .. })));
        assert!(matches!(parse_mapping("trout#1:n Fish\n", &g), Err(MappingError::Parse { line: 1, .. })));
        assert!(matches!(parse_mapping("nothing#1:n &%Fish=\n", &g), Err(MappingError::Corpus(_))));
    }

    #[test]
    fn heuristics_are_idempotent() {
        let (g, idx) = setup();
        let m = parse_mapping("fish_genus#1:n &%Fish=\ndicot_genus#1:n &%FloweringPlant+\ntrout#1:n &%Fish+\n", &g).unwrap();
        let (m1, n1) = apply_heuristics(&m, &g, &idx, Phase::H1).unwrap();
        assert_eq!(n1, 1);
        assert_eq!(m1.targets(SynsetId::noun(20)).unwrap(), &[Target::sub("GroupOfAnimals")]);
        let (m2, n2) = apply_heuristics(&m1, &g, &idx, Phase::H1).unwrap();
        assert_eq!(n2, 0);
        assert_eq!(m1, m2);
        let (m3, n3) = apply_heuristics(&m2, &g, &idx, Phase::H2).unwrap();
        assert_eq!(n3, 1);
        assert_eq!(m3.targets(SynsetId::noun(30)).unwrap(), &[Target::sub("Group")]);
        assert!(matches!(apply_heuristics(&m3, &g, &idx, Phase::H2Prime), Err(MappingError::MissingClass { .. })));
    }

    #[test]
    fn edits_keep_history() {
        let (g, idx) = setup();
        let m = parse_mapping("trout#1:n &%Fish+\n", &g).unwrap();
        let t = SynsetId::noun(40);
        let m1 = edit_mapping(&m, &g, &idx, t, vec![Target::sub("Fish")], "no-op").unwrap();
        assert_eq!(m1.get(t).unwrap().history.len(), 2);
        assert_eq!(m1.version_hash(), m.version_hash());
        let m2 = edit_mapping(&m1, &g, &idx, t, vec![Target::sub("Animal")], "broader").unwrap();
        assert_ne!(m2.version_hash(), m.version_hash());
        assert_eq!(m2.get(t).unwrap().replay().unwrap(), m2.targets(t).unwrap());
        assert!(matches!(edit_mapping(&m, &g, &idx, t, vec![Target::sub("Unicorn")], ""), Err(MappingError::UnresolvableConcept(_))));
    }

    #[test]
    fn json_round_trip_keeps_history() {
        let (g, idx) = setup();
        let m = parse_mapping("trout#1:n &%Fish+\nfish_genus#1:n &%Fish=\n", &g).unwrap();
        let m = edit_mapping(&m, &g, &idx, SynsetId::noun(40), vec![Target::sub("Animal")], "broader").unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<Mapping>(&json).unwrap(), m);
    }
}
