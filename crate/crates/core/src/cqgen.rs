//! Competency question generation and domain prechecks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{MeronymyPair, SynsetGraph, WnRelation};
use crate::logic::tptp::{self, Role, Statement};
use crate::logic::{kif_pretty, kif_surface, Formula, Term};
use crate::mapping::{Mapping, MappingRelation, Target};
use crate::ontology::{ConceptKind, OntologyError, StructuralIndex};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CqError {
    #[error("synset {0} is unmapped")]
    Unmapped(String),
    #[error("ill-formed question: {concept} is a relation")]
    IllFormed { concept: String },
    #[error("conflicting instance targets {0} and {1}")]
    ConflictingInstances(String, String),
    #[error("no signature declared for `{0}`")]
    MissingSignature(String),
    #[error("unsupported meronymy relation `{0}`")]
    Unsupported(String),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SumoRelation {
    #[serde(rename = "properPart")]
    ProperPart,
    #[serde(rename = "member")]
    Member,
    #[serde(rename = "material")]
    Material,
}

impl SumoRelation {
    pub fn as_str(self) -> &'static str {
        match self {
            SumoRelation::ProperPart => "properPart",
            SumoRelation::Member => "member",
            SumoRelation::Material => "material",
        }
    }
}

impl fmt::Display for SumoRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn select_relation(r: WnRelation) -> SumoRelation {
    match r {
        WnRelation::Part => SumoRelation::ProperPart,
        WnRelation::Member => SumoRelation::Member,
        WnRelation::Substance => SumoRelation::Material,
    }
}

/// String-level variant for external input.
pub fn select_relation_named(name: &str) -> Result<SumoRelation, CqError> {
    WnRelation::from_str(name).map(select_relation).map_err(|_| CqError::Unsupported(name.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QpId {
    QP1,
    QP2,
    QP3,
    QP4,
}

impl fmt::Display for QpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Equivalence on one side only when every target of that side is an
/// equivalence; subsumption and instance collapse together.
pub fn select_qp(part: &[Target], whole: &[Target]) -> QpId {
    let eq = |ts: &[Target]| !ts.is_empty() && ts.iter().all(|t| t.relation == MappingRelation::Equivalence);
    match (eq(part), eq(whole)) {
        (false, false) => QpId::QP1,
        (true, false) => QpId::QP2,
        (false, true) => QpId::QP3,
        (true, true) => QpId::QP4,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CqStatus {
    Fresh,
    ViolatesDomain,
    Dispatched,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompetencyQuestion {
    pub id: String,
    pub pair: MeronymyPair,
    pub qp: QpId,
    pub relation: SumoRelation,
    pub part_targets: Vec<Target>,
    pub whole_targets: Vec<Target>,
    pub formula: Formula,
    pub status: CqStatus,
}

impl CompetencyQuestion {
    pub fn kif(&self) -> String {
        kif_surface(&self.formula)
    }

    pub fn kif_pretty(&self) -> String {
        kif_pretty(&self.formula)
    }

    /// Content hash of the formula; shared by pairs yielding the same question.
    pub fn formula_hash(&self) -> String {
        formula_hash(&self.formula)
    }

    pub fn tptp_conjecture(&self) -> String {
        Statement { name: self.id.replace('-', "_"), role: Role::Conjecture, formula: self.formula.clone() }.to_tptp()
    }
}

pub fn formula_hash(f: &Formula) -> String {
    hex::encode(Sha256::digest(kif_surface(f).as_bytes()))
}

pub fn pair_key(p: &MeronymyPair) -> String {
    format!("{}:{}:{}", p.relation, p.part, p.whole)
}

/// Per-side plan: the term standing for the side and its atoms.
struct SidePlan {
    term: Term,
    bound: Option<String>,
    atoms: Vec<Formula>,
}

fn plan_side(var: &str, targets: &[Target], index: &StructuralIndex, witness: &mut usize) -> Result<SidePlan, CqError> {
    let mut constant: Option<&str> = None;
    for t in targets.iter().filter(|t| t.relation == MappingRelation::Instance) {
        match constant {
            Some(c) if c != t.concept => return Err(CqError::ConflictingInstances(c.to_string(), t.concept.clone())),
            _ => constant = Some(&t.concept),
        }
    }
    let term = match constant {
        Some(c) => Term::constant(c),
        None => Term::var(var),
    };
    let mut atoms = Vec::new();
    for t in targets.iter().filter(|t| t.relation != MappingRelation::Instance) {
        let kind = index.classify(&t.concept)?.kind;
        atoms.push(match kind {
            ConceptKind::Relation => return Err(CqError::IllFormed { concept: t.concept.clone() }),
            ConceptKind::Class => Formula::atom("instance", vec![term.clone(), Term::constant(&t.concept)]),
            ConceptKind::Attribute => Formula::atom("attribute", vec![term.clone(), Term::constant(&t.concept)]),
            ConceptKind::ClassOfAttributes => {
                *witness += 1;
                let w = format!("W{witness}");
                Formula::exists(
                    vec![w.clone()],
                    Formula::And(vec![
                        Formula::atom("attribute", vec![term.clone(), Term::var(&w)]),
                        Formula::atom("instance", vec![Term::var(&w), Term::constant(&t.concept)]),
                    ]),
                )
            }
        });
    }
    for t in targets.iter().filter(|t| t.relation == MappingRelation::Instance) {
        if index.is_relation(&t.concept) {
            return Err(CqError::IllFormed { concept: t.concept.clone() });
        }
    }
    Ok(SidePlan { term, bound: constant.is_none().then(|| var.to_string()), atoms })
}

fn conj(mut fs: Vec<Formula>) -> Formula {
    if fs.len() == 1 {
        fs.pop().expect("one element")
    } else {
        Formula::And(fs)
    }
}

fn quantify(q: fn(Vec<String>, Formula) -> Formula, vars: &[&Option<String>], body: Formula) -> Formula {
    q(vars.iter().filter_map(|v| (*v).clone()).collect(), body)
}

pub fn instantiate_qp(
    pair: &MeronymyPair,
    part: &[Target],
    whole: &[Target],
    index: &StructuralIndex,
) -> Result<CompetencyQuestion, CqError> {
    let relation = select_relation(pair.relation);
    let qp = select_qp(part, whole);
    let mut witness = 0;
    let a = plan_side("X", part, index, &mut witness)?;
    let b = plan_side("Y", whole, index, &mut witness)?;
    let r = Formula::atom(relation.as_str(), vec![a.term.clone(), b.term.clone()]);
    let qp2 = || {
        Formula::implies(
            conj(a.atoms.clone()),
            quantify(Formula::exists, &[&b.bound], Formula::And(b.atoms.iter().cloned().chain([r.clone()]).collect())),
        )
    };
    let qp2 = || quantify(Formula::forall, &[&a.bound], qp2());
    let qp3 = || {
        let inner = quantify(Formula::exists, &[&a.bound], Formula::And(a.atoms.iter().cloned().chain([r.clone()]).collect()));
        quantify(Formula::forall, &[&b.bound], Formula::implies(conj(b.atoms.clone()), inner))
    };
    let formula = match qp {
        QpId::QP1 => {
            let body: Vec<Formula> = a.atoms.iter().chain(b.atoms.iter()).cloned().chain([r.clone()]).collect();
            quantify(Formula::exists, &[&a.bound, &b.bound], Formula::And(body))
        }
        QpId::QP2 => qp2(),
        QpId::QP3 => qp3(),
        QpId::QP4 => Formula::And(vec![qp2(), qp3()]),
    };
    let key = pair_key(pair);
    let text = kif_surface(&formula);
    let digest = hex::encode(Sha256::digest(format!("{key}\n{text}").as_bytes()));
    Ok(CompetencyQuestion {
        id: format!("cq-{}", &digest[..12]),
        pair: *pair,
        qp,
        relation,
        part_targets: part.to_vec(),
        whole_targets: whole.to_vec(),
        formula,
        status: CqStatus::Fresh,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "kebab-case")]
pub enum Precheck {
    Ok,
    Violation { arg: usize, mapped_class: String, required_class: String },
}

fn mapped_classes(targets: &[Target], index: &StructuralIndex) -> Vec<String> {
    let mut out = Vec::new();
    for t in targets {
        match t.relation {
            MappingRelation::Instance => {
                if let Some(cs) = index.instance_of.get(&t.concept) {
                    out.extend(cs.iter().cloned());
                }
            }
            _ => {
                if matches!(index.classify(&t.concept), Ok(c) if c.kind == ConceptKind::Class) {
                    out.push(t.concept.clone());
                }
            }
        }
    }
    out
}

/// Violation iff, for some argument, every class mapped to it is disjoint
/// from the class the relation requires there.
pub fn domain_precheck(cq: &CompetencyQuestion, index: &StructuralIndex) -> Result<Precheck, CqError> {
    let rel = cq.relation.as_str();
    let sig = index.signatures.get(rel).ok_or_else(|| CqError::MissingSignature(rel.to_string()))?;
    for (arg, targets) in [(1usize, &cq.part_targets), (2, &cq.whole_targets)] {
        let Some(required) = sig.get(&arg) else { continue };
        let mapped = mapped_classes(targets, index);
        if mapped.is_empty() {
            continue;
        }
        let mut all = true;
        for c in &mapped {
            if !index.are_disjoint(c, required)? {
                all = false;
                break;
            }
        }
        if all {
            return Ok(Precheck::Violation { arg, mapped_class: mapped[0].clone(), required_class: required.clone() });
        }
    }
    Ok(Precheck::Ok)
}

/// Outcome of generation for one pair.
#[derive(Debug, Clone, PartialEq)]
pub enum Generated {
    Question(CompetencyQuestion),
    Unmapped(MeronymyPair),
    IllFormed(MeronymyPair, String),
}

pub fn generate(pairs: &[MeronymyPair], mapping: &Mapping, index: &StructuralIndex) -> Vec<Generated> {
    pairs
        .iter()
        .map(|p| match (mapping.targets(p.part), mapping.targets(p.whole)) {
            (Some(a), Some(b)) => match instantiate_qp(p, a, b, index) {
                Ok(cq) => Generated::Question(cq),
                Err(e) => Generated::IllFormed(*p, e.to_string()),
            },
            _ => Generated::Unmapped(*p),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub cq_id: String,
    pub pair: MeronymyPair,
    pub pair_text: String,
    pub qp: QpId,
    pub relation: SumoRelation,
    pub formula_hash: String,
    pub kif: String,
    pub ontology_version: String,
    pub mapping_version: String,
}

pub fn manifest_entry(cq: &CompetencyQuestion, graph: &SynsetGraph, ontology_version: &str, mapping_version: &str) -> ManifestEntry {
    ManifestEntry {
        cq_id: cq.id.clone(),
        pair: cq.pair,
        pair_text: graph.pair_text(&cq.pair),
        qp: cq.qp,
        relation: cq.relation,
        formula_hash: cq.formula_hash(),
        kif: cq.kif(),
        ontology_version: ontology_version.to_string(),
        mapping_version: mapping_version.to_string(),
    }
}

/// Conjecture-only TPTP text for a question, as a standalone file.
pub fn conjecture_file(cq: &CompetencyQuestion) -> String {
    tptp::Problem { statements: vec![Statement { name: "goal".into(), role: Role::Conjecture, formula: cq.formula.clone() }] }.to_tptp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SynsetId;
    use crate::ontology::Ontology;

    const KIF: &str = "\
(subclass Relation Entity)
(subclass BinaryPredicate Relation)
(instance properPart BinaryPredicate)
(instance member BinaryPredicate)
(instance attribute BinaryPredicate)
(subclass Object Entity)
(subclass Collection Object)
(subclass SelfConnectedObject Object)
(disjoint Collection SelfConnectedObject)
(subclass BodyPart SelfConnectedObject)
(subclass Heart BodyPart)
(subclass Canine SelfConnectedObject)
(subclass Group Collection)
(subclass FamilyGroup Group)
(subclass Attribute Entity)
(subclass BiologicalAttribute Attribute)
(instance Solid Attribute)
(instance Earth SelfConnectedObject)
(domain member 1 SelfConnectedObject)
(domain member 2 Collection)
(domain properPart 1 Object)
(domain properPart 2 Object)
";

    fn idx() -> StructuralIndex {
        Ontology::parse(KIF).unwrap().index
    }

    fn pair(r: WnRelation) -> MeronymyPair {
        MeronymyPair { relation: r, part: SynsetId::noun(1), whole: SynsetId::noun(2) }
    }

    #[test]
    fn golden_qp1() {
        let cq = instantiate_qp(&pair(WnRelation::Part), &[Target::sub("BodyPart")], &[Target::sub("Heart")], &idx()).unwrap();
        assert_eq!(cq.qp, QpId::QP1);
        assert_eq!(cq.kif(), "(exists (?X ?Y) (and ($instance ?X BodyPart) ($instance ?Y Heart) (properPart ?X ?Y)))");
    }

    #[test]
    fn class_of_attributes_recipe() {
        let cq = instantiate_qp(&pair(WnRelation::Member), &[Target::sub("BiologicalAttribute")], &[Target::sub("FamilyGroup")], &idx())
            .unwrap();
        assert_eq!(
            cq.kif(),
            "(exists (?X ?Y) (and (exists (?W1) (and (attribute ?X ?W1) ($instance ?W1 BiologicalAttribute))) ($instance ?Y FamilyGroup) (member ?X ?Y)))"
        );
    }

    #[test]
    fn qp_shapes() {
        let i = idx();
        let eq = |c: &str| Target::new(c, MappingRelation::Equivalence);
        let p = pair(WnRelation::Member);
        let qp2 = instantiate_qp(&p, &[eq("Canine")], &[Target::sub("Group")], &i).unwrap();
        assert_eq!(qp2.kif(), "(forall (?X) (=> ($instance ?X Canine) (exists (?Y) (and ($instance ?Y Group) (member ?X ?Y)))))");
        let qp3 = instantiate_qp(&p, &[Target::sub("Canine")], &[eq("Group")], &i).unwrap();
        assert_eq!(qp3.kif(), "(forall (?Y) (=> ($instance ?Y Group) (exists (?X) (and ($instance ?X Canine) (member ?X ?Y)))))");
        let qp4 = instantiate_qp(&p, &[eq("Canine")], &[eq("Group")], &i).unwrap();
        assert_eq!(qp4.qp, QpId::QP4);
        assert_eq!(qp4.kif(), format!("(and {} {})", qp2.kif(), qp3.kif()));
    }

    #[test]
    fn instance_and_attribute_targets() {
        let i = idx();
        let cq = instantiate_qp(
            &pair(WnRelation::Part),
            &[Target::sub("BodyPart"), Target::sub("Solid")],
            &[Target::new("Earth", MappingRelation::Instance)],
            &i,
        )
        .unwrap();
        assert_eq!(cq.kif(), "(exists (?X) (and ($instance ?X BodyPart) (attribute ?X Solid) (properPart ?X Earth)))");
        let bad = instantiate_qp(&pair(WnRelation::Part), &[Target::sub("member")], &[Target::sub("Heart")], &i);
        assert!(matches!(bad, Err(CqError::IllFormed { .. })));
    }

    #[test]
    fn selection() {
        assert_eq!(select_relation(WnRelation::Part), SumoRelation::ProperPart);
        assert_eq!(select_relation(WnRelation::Member), SumoRelation::Member);
        assert_eq!(select_relation(WnRelation::Substance), SumoRelation::Material);
        assert!(select_relation_named("antonym").is_err());
    }

    #[test]
    fn precheck() {
        let i = idx();
        let p = pair(WnRelation::Member);
        let cq = instantiate_qp(&p, &[Target::sub("Canine")], &[Target::sub("Canine")], &i).unwrap();
        assert_eq!(
            domain_precheck(&cq, &i).unwrap(),
            Precheck::Violation { arg: 2, mapped_class: "Canine".into(), required_class: "Collection".into() }
        );
        let cq = instantiate_qp(&p, &[Target::sub("Canine")], &[Target::sub("Collection")], &i).unwrap();
        assert_eq!(domain_precheck(&cq, &i).unwrap(), Precheck::Ok);
        let sub = MeronymyPair { relation: WnRelation::Substance, ..p };
        let cq = instantiate_qp(&sub, &[Target::sub("Canine")], &[Target::sub("Canine")], &i).unwrap();
        assert!(matches!(domain_precheck(&cq, &i), Err(CqError::MissingSignature(_))));
    }
}
