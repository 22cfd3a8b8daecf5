//! SUO-KIF ontology snapshots: structural index, first-order axioms and
//! correction patches.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::kif::{self, KifError, Labeled, Pos, SExpr};
use crate::logic::tptp::{Problem, Role, Statement};
use crate::logic::{Formula, Term};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OntologyError {
    #[error(transparent)]
    Kif(#[from] KifError),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("no axiom with id `{0}`")]
    MissingAxiom(String),
    #[error("duplicate axiom id `{0}`")]
    DuplicateId(String),
    #[error("subclass cycle through `{0}`")]
    Cycle(String),
    #[error("signature of `{relation}` names unknown class `{class}`")]
    SignatureClass { relation: String, class: String },
    #[error("axiom `{id}` cannot be expressed with unary class predicates")]
    UnaryView { id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConceptKind {
    Relation,
    Class,
    Attribute,
    ClassOfAttributes,
}

impl fmt::Display for ConceptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConceptKind::Relation => "relation",
            ConceptKind::Class => "class",
            ConceptKind::Attribute => "attribute",
            ConceptKind::ClassOfAttributes => "class-of-attributes",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SumoConcept {
    pub name: String,
    pub kind: ConceptKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxiomOrigin {
    Base,
    Patched,
    Added,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axiom {
    pub id: String,
    pub source: SExpr,
    /// `None` for non-logical statements (documentation, meta facts about relations).
    pub formula: Option<Formula>,
    pub origin: AxiomOrigin,
}

const BUILTIN: [(&str, usize); 5] = [("instance", 2), ("subclass", 2), ("subrelation", 2), ("disjoint", 2), ("domain", 3)];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StructuralIndex {
    pub parents: BTreeMap<String, BTreeSet<String>>,
    pub instance_of: BTreeMap<String, BTreeSet<String>>,
    /// Stored in both orientations.
    pub disjoint: BTreeSet<(String, String)>,
    pub signatures: BTreeMap<String, BTreeMap<usize, String>>,
    pub arity: BTreeMap<String, usize>,
    pub relations: BTreeSet<String>,
    pub classes: BTreeSet<String>,
}

impl StructuralIndex {
    fn add_class(&mut self, c: &str) {
        self.classes.insert(c.to_string());
    }

    fn add_subclass(&mut self, a: &str, b: &str) {
        self.add_class(a);
        self.add_class(b);
        self.parents.entry(a.to_string()).or_default().insert(b.to_string());
    }

    fn add_disjoint(&mut self, a: &str, b: &str) {
        self.add_class(a);
        self.add_class(b);
        self.disjoint.insert((a.to_string(), b.to_string()));
        self.disjoint.insert((b.to_string(), a.to_string()));
    }

    fn require_class(&self, c: &str) -> Result<(), OntologyError> {
        if self.classes.contains(c) {
            Ok(())
        } else {
            Err(OntologyError::UnknownClass(c.to_string()))
        }
    }

    pub fn is_known_class(&self, c: &str) -> bool {
        self.classes.contains(c)
    }

    /// `c` together with all its superclasses.
    pub fn ancestors(&self, c: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![c.to_string()];
        while let Some(x) = stack.pop() {
            if seen.insert(x.clone()) {
                if let Some(ps) = self.parents.get(&x) {
                    stack.extend(ps.iter().cloned());
                }
            }
        }
        seen
    }

    /// Reflexive-transitive closure of the declared subclass edges.
    pub fn is_subclass(&self, a: &str, b: &str) -> Result<bool, OntologyError> {
        self.require_class(a)?;
        self.require_class(b)?;
        Ok(self.ancestors(a).contains(b))
    }

    /// Holds when some declared disjoint pair (A, B) has `a ⊑ A` and `b ⊑ B`.
    pub fn are_disjoint(&self, a: &str, b: &str) -> Result<bool, OntologyError> {
        self.require_class(a)?;
        self.require_class(b)?;
        let up_b = self.ancestors(b);
        Ok(self.ancestors(a).iter().any(|x| up_b.iter().any(|y| self.disjoint.contains(&(x.clone(), y.clone())))))
    }

    /// Classes of an individual, closed upwards.
    pub fn classes_of_individual(&self, c: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        if let Some(cs) = self.instance_of.get(c) {
            for k in cs {
                out.extend(self.ancestors(k));
            }
        }
        out
    }

    pub fn is_relation(&self, name: &str) -> bool {
        self.relations.contains(name)
    }

    pub fn classify(&self, name: &str) -> Result<SumoConcept, OntologyError> {
        let kind = if self.relations.contains(name) {
            ConceptKind::Relation
        } else if self.classes_of_individual(name).contains("Attribute") {
            ConceptKind::Attribute
        } else if self.classes.contains(name) && self.ancestors(name).contains("Attribute") {
            ConceptKind::ClassOfAttributes
        } else if self.classes.contains(name) {
            ConceptKind::Class
        } else if self.instance_of.contains_key(name) {
            // individuals mapped by instance (`@`) are treated as class-like targets elsewhere
            return Err(OntologyError::UnknownConcept(format!("{name} (individual)")));
        } else {
            return Err(OntologyError::UnknownConcept(name.to_string()));
        };
        Ok(SumoConcept { name: name.to_string(), kind })
    }

    pub fn is_individual(&self, name: &str) -> bool {
        self.instance_of.contains_key(name) && !self.relations.contains(name)
    }

    fn check_acyclic(&self) -> Result<(), OntologyError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Open,
            Done,
        }
        fn visit(n: &str, idx: &StructuralIndex, marks: &mut BTreeMap<String, Mark>) -> Result<(), OntologyError> {
            match marks.get(n) {
                Some(Mark::Done) => return Ok(()),
                Some(Mark::Open) => return Err(OntologyError::Cycle(n.to_string())),
                None => {}
            }
            marks.insert(n.to_string(), Mark::Open);
            if let Some(ps) = idx.parents.get(n) {
                for p in ps {
                    visit(p, idx, marks)?;
                }
            }
            marks.insert(n.to_string(), Mark::Done);
            Ok(())
        }
        let mut marks = BTreeMap::new();
        for c in &self.classes {
            visit(c, self, &mut marks)?;
        }
        Ok(())
    }
}

fn arity_from_metaclass(class: &str) -> Option<usize> {
    if class.contains("Binary") {
        Some(2)
    } else if class.contains("Ternary") {
        Some(3)
    } else if class.contains("Quaternary") {
        Some(4)
    } else {
        None
    }
}

fn sym(e: &SExpr) -> Result<&str, OntologyError> {
    e.as_atom().ok_or_else(|| OntologyError::Kif(KifError::Malformed { pos: e.pos(), message: format!("expected a symbol, found {e}") }))
}

fn args_of(e: &SExpr) -> &[SExpr] {
    e.as_list().map(|l| &l[1..]).unwrap_or(&[])
}

fn var_name(s: &str) -> Option<&str> {
    s.strip_prefix('?')
}

struct Translator<'a> {
    index: &'a StructuralIndex,
}

impl Translator<'_> {
    fn term(&self, e: &SExpr) -> Result<Term, KifError> {
        match e {
            SExpr::Atom(a, pos) => {
                if a.starts_with('@') {
                    Err(KifError::Unsupported { pos: *pos, what: format!("row variable {a}") })
                } else if a.starts_with('"') {
                    Err(KifError::Unsupported { pos: *pos, what: "string argument".into() })
                } else if let Some(v) = var_name(a) {
                    Ok(Term::var(v))
                } else {
                    Ok(Term::constant(a.clone()))
                }
            }
            SExpr::List(_, pos) => Err(KifError::Unsupported { pos: *pos, what: format!("higher-order argument {e}") }),
        }
    }

    fn vars(&self, e: &SExpr) -> Result<Vec<String>, KifError> {
        let list = e.as_list().ok_or(KifError::Malformed { pos: e.pos(), message: "expected a variable list".into() })?;
        list.iter()
            .map(|v| {
                v.as_atom()
                    .and_then(var_name)
                    .map(str::to_string)
                    .ok_or(KifError::Malformed { pos: v.pos(), message: format!("expected a variable, found {v}") })
            })
            .collect()
    }

    fn formula(&self, e: &SExpr) -> Result<Formula, KifError> {
        let pos = e.pos();
        let items = match e {
            SExpr::List(items, _) if !items.is_empty() => items,
            _ => return Err(KifError::Malformed { pos, message: format!("expected a formula, found {e}") }),
        };
        let head = items[0].as_atom().ok_or(KifError::Unsupported { pos, what: "non-symbol head".into() })?;
        let rest = &items[1..];
        let need = |n: usize| {
            if rest.len() == n {
                Ok(())
            } else {
                Err(KifError::Arity { pos, symbol: head.to_string(), expected: n, found: rest.len() })
            }
        };
        match head {
            "and" => Ok(Formula::And(rest.iter().map(|r| self.formula(r)).collect::<Result<_, _>>()?)),
            "or" => Ok(Formula::Or(rest.iter().map(|r| self.formula(r)).collect::<Result<_, _>>()?)),
            "not" => {
                need(1)?;
                Ok(Formula::not(self.formula(&rest[0])?))
            }
            "=>" => {
                need(2)?;
                Ok(Formula::implies(self.formula(&rest[0])?, self.formula(&rest[1])?))
            }
            "<=>" => {
                need(2)?;
                Ok(Formula::iff(self.formula(&rest[0])?, self.formula(&rest[1])?))
            }
            "forall" | "exists" => {
                need(2)?;
                let vs = self.vars(&rest[0])?;
                let body = self.formula(&rest[1])?;
                Ok(if head == "forall" { Formula::forall(vs, body) } else { Formula::exists(vs, body) })
            }
            _ => {
                let known = BUILTIN.iter().find(|(n, _)| *n == head).map(|(_, a)| *a).or_else(|| {
                    if self.index.relations.contains(head) {
                        Some(self.index.arity.get(head).copied().unwrap_or(rest.len()))
                    } else {
                        None
                    }
                });
                let expected = known.ok_or(KifError::UnknownHead { pos, head: head.to_string() })?;
                need(expected)?;
                let args = rest.iter().map(|a| self.term(a)).collect::<Result<Vec<_>, _>>()?;
                Ok(Formula::atom(head, args))
            }
        }
    }
}

fn inst(x: Term, c: &str) -> Formula {
    Formula::atom("instance", vec![x, Term::constant(c)])
}

fn x() -> Term {
    Term::var("X")
}

/// Builds the index from structural statements. Rules are translated later.
fn index_statements(exprs: &[&SExpr]) -> Result<StructuralIndex, OntologyError> {
    let mut idx = StructuralIndex::default();
    for (n, a) in BUILTIN {
        idx.relations.insert(n.to_string());
        idx.arity.insert(n.to_string(), a);
    }
    idx.relations.insert("partition".into());
    idx.relations.insert("documentation".into());
    // first pass: taxonomy and instance facts
    for e in exprs {
        let args = args_of(e);
        match e.head() {
            Some("subclass") if args.len() == 2 => idx.add_subclass(sym(&args[0])?, sym(&args[1])?),
            Some("instance") if args.len() == 2 => {
                let (c, k) = (sym(&args[0])?, sym(&args[1])?);
                idx.add_class(k);
                idx.instance_of.entry(c.to_string()).or_default().insert(k.to_string());
            }
            Some("disjoint") if args.len() == 2 => idx.add_disjoint(sym(&args[0])?, sym(&args[1])?),
            Some("partition") if args.len() >= 3 => {
                let whole = sym(&args[0])?;
                let parts: Vec<&str> = args[1..].iter().map(sym).collect::<Result<_, _>>()?;
                for p in &parts {
                    idx.add_subclass(p, whole);
                }
                for (i, a) in parts.iter().enumerate() {
                    for b in &parts[i + 1..] {
                        idx.add_disjoint(a, b);
                    }
                }
            }
            _ => {}
        }
    }
    // second pass: relations, arities, signatures
    let rel_meta: Vec<(String, String)> = idx
        .instance_of
        .iter()
        .flat_map(|(c, ks)| ks.iter().map(move |k| (c.clone(), k.clone())))
        .filter(|(_, k)| idx.ancestors(k).contains("Relation"))
        .collect();
    for (r, k) in rel_meta {
        idx.relations.insert(r.clone());
        if let Some(a) = arity_from_metaclass(&k) {
            idx.arity.entry(r).or_insert(a);
        }
    }
    for e in exprs {
        let args = args_of(e);
        match e.head() {
            Some("domain") if args.len() == 3 => {
                let r = sym(&args[0])?;
                let i: usize = sym(&args[1])?.parse().map_err(|_| {
                    OntologyError::Kif(KifError::Malformed { pos: args[1].pos(), message: "argument index must be a number".into() })
                })?;
                let c = sym(&args[2])?;
                idx.relations.insert(r.to_string());
                let a = idx.arity.entry(r.to_string()).or_insert(i);
                *a = (*a).max(i);
                idx.signatures.entry(r.to_string()).or_default().insert(i, c.to_string());
            }
            Some("subrelation") if args.len() == 2 => {
                for r in [sym(&args[0])?, sym(&args[1])?] {
                    idx.relations.insert(r.to_string());
                }
            }
            _ => {}
        }
    }
    for (r, sig) in &idx.signatures {
        for c in sig.values() {
            if !idx.classes.contains(c) {
                return Err(OntologyError::SignatureClass { relation: r.clone(), class: c.clone() });
            }
        }
    }
    idx.check_acyclic()?;
    Ok(idx)
}

fn reject_row_vars(e: &SExpr) -> Result<(), KifError> {
    match e {
        SExpr::Atom(a, pos) if a.starts_with('@') => Err(KifError::Unsupported { pos: *pos, what: format!("row variable {a}") }),
        SExpr::Atom(..) => Ok(()),
        SExpr::List(items, _) => items.iter().try_for_each(reject_row_vars),
    }
}

fn translate(e: &SExpr, idx: &StructuralIndex) -> Result<Option<Formula>, OntologyError> {
    reject_row_vars(e)?;
    let tr = Translator { index: idx };
    let args = args_of(e);
    let pos = e.pos();
    let f = match e.head() {
        Some("documentation") => return Ok(None),
        Some("subclass") => {
            let (a, b) = (sym(&args[0])?, sym(&args[1])?);
            Formula::And(vec![
                Formula::atom("subclass", vec![Term::constant(a), Term::constant(b)]),
                Formula::forall(vec!["X".into()], Formula::implies(inst(x(), a), inst(x(), b))),
            ])
        }
        Some("instance") if args.len() == 2 => {
            let c = sym(&args[0])?;
            if idx.relations.contains(c) {
                return Ok(None);
            }
            tr.formula(e)?
        }
        Some("disjoint") => {
            let (a, b) = (sym(&args[0])?, sym(&args[1])?);
            Formula::And(vec![
                Formula::atom("disjoint", vec![Term::constant(a), Term::constant(b)]),
                Formula::forall(vec!["X".into()], Formula::not(Formula::And(vec![inst(x(), a), inst(x(), b)]))),
            ])
        }
        Some("partition") => {
            if args.len() < 3 {
                return Err(KifError::Arity { pos, symbol: "partition".into(), expected: 3, found: args.len() }.into());
            }
            let whole = sym(&args[0])?;
            let parts: Vec<&str> = args[1..].iter().map(sym).collect::<Result<_, _>>()?;
            let mut conj = Vec::new();
            for p in &parts {
                conj.push(Formula::atom("subclass", vec![Term::constant(*p), Term::constant(whole)]));
                conj.push(Formula::forall(vec!["X".into()], Formula::implies(inst(x(), p), inst(x(), whole))));
            }
            for (i, a) in parts.iter().enumerate() {
                for b in &parts[i + 1..] {
                    conj.push(Formula::atom("disjoint", vec![Term::constant(*a), Term::constant(*b)]));
                    conj.push(Formula::forall(vec!["X".into()], Formula::not(Formula::And(vec![inst(x(), a), inst(x(), b)]))));
                }
            }
            conj.push(Formula::forall(
                vec!["X".into()],
                Formula::implies(inst(x(), whole), Formula::Or(parts.iter().map(|p| inst(x(), p)).collect())),
            ));
            Formula::And(conj)
        }
        Some("domain") => {
            let r = sym(&args[0])?;
            let i: usize = sym(&args[1])?.parse().unwrap_or(1);
            let c = sym(&args[2])?;
            let n = idx.arity.get(r).copied().unwrap_or(i);
            let vars: Vec<String> = (1..=n).map(|k| format!("A{k}")).collect();
            let atom = Formula::atom(r, vars.iter().map(Term::var).collect());
            Formula::forall(vars.clone(), Formula::implies(atom, inst(Term::var(vars[i - 1].clone()), c)))
        }
        Some("subrelation") => {
            let (r, s) = (sym(&args[0])?, sym(&args[1])?);
            let n = idx.arity.get(r).or_else(|| idx.arity.get(s)).copied().unwrap_or(2);
            let vars: Vec<String> = (1..=n).map(|k| format!("A{k}")).collect();
            let ts: Vec<Term> = vars.iter().map(Term::var).collect();
            Formula::forall(vars, Formula::implies(Formula::atom(r, ts.clone()), Formula::atom(s, ts)))
        }
        _ => tr.formula(e)?,
    };
    f.signature().map_err(|err| KifError::Malformed { pos, message: err.to_string() })?;
    Ok(Some(f.close_universally()))
}

/// Bridge axioms relating the reified taxonomy predicates.
pub fn bridge_axioms() -> Vec<(String, Formula)> {
    fn pair(p: &str, a: &str, b: &str) -> Formula {
        Formula::atom(p, vec![Term::var(a), Term::var(b)])
    }
    let sub = |a, b| pair("subclass", a, b);
    let ins = |a, b| pair("instance", a, b);
    let dis = |a, b| pair("disjoint", a, b);
    let vs = |names: &[&str]| names.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    vec![
        (
            "bridge-subclass-transitive".into(),
            Formula::forall(vs(&["A", "B", "C"]), Formula::implies(Formula::And(vec![sub("A", "B"), sub("B", "C")]), sub("A", "C"))),
        ),
        (
            "bridge-instance-propagation".into(),
            Formula::forall(vs(&["X", "A", "B"]), Formula::implies(Formula::And(vec![ins("X", "A"), sub("A", "B")]), ins("X", "B"))),
        ),
        ("bridge-disjoint-symmetric".into(), Formula::forall(vs(&["A", "B"]), Formula::implies(dis("A", "B"), dis("B", "A")))),
        (
            "bridge-disjoint-exclusion".into(),
            Formula::forall(
                vs(&["X", "A", "B"]),
                Formula::implies(Formula::And(vec![dis("A", "B"), ins("X", "A")]), Formula::not(ins("X", "B"))),
            ),
        ),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ontology {
    pub axioms: Vec<Axiom>,
    pub index: StructuralIndex,
    /// Monotonic counter; a patched snapshot gets `base.version + 1`.
    pub version: u64,
}

impl Ontology {
    pub fn parse(src: &str) -> Result<Ontology, OntologyError> {
        let labeled = kif::parse(src)?;
        let entries: Vec<(String, SExpr, AxiomOrigin)> = labeled
            .into_iter()
            .enumerate()
            .map(|(i, Labeled { label, expr })| (label.unwrap_or_else(|| format!("ax{}", i + 1)), expr, AxiomOrigin::Base))
            .collect();
        Self::build(entries, 0)
    }

    fn build(entries: Vec<(String, SExpr, AxiomOrigin)>, version: u64) -> Result<Ontology, OntologyError> {
        let mut seen = BTreeSet::new();
        for (id, _, _) in &entries {
            if !seen.insert(id.clone()) {
                return Err(OntologyError::DuplicateId(id.clone()));
            }
        }
        let exprs: Vec<&SExpr> = entries.iter().map(|(_, e, _)| e).collect();
        let index = index_statements(&exprs)?;
        let axioms = entries
            .into_iter()
            .map(|(id, source, origin)| {
                let formula = translate(&source, &index)?;
                Ok(Axiom { id, source, formula, origin })
            })
            .collect::<Result<Vec<_>, OntologyError>>()?;
        Ok(Ontology { axioms, index, version })
    }

    pub fn axiom(&self, id: &str) -> Option<&Axiom> {
        self.axioms.iter().find(|a| a.id == id)
    }

    /// Content address: SHA-256 over the sorted canonical axiom texts.
    pub fn content_hash(&self) -> String {
        let mut texts: Vec<String> = self.axioms.iter().map(|a| a.source.to_string()).collect();
        texts.sort();
        let mut h = Sha256::new();
        for t in texts {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// KIF source of the snapshot, labels included.
    pub fn to_kif(&self) -> String {
        let mut out = String::new();
        for a in &self.axioms {
            out.push_str(&format!(";@id {}\n{}\n", a.id, a.source));
        }
        out
    }

    /// Bridge axioms followed by every logical axiom in source order.
    pub fn logical_axioms(&self) -> Vec<(String, Formula)> {
        let mut out = bridge_axioms();
        out.extend(self.axioms.iter().filter_map(|a| a.formula.clone().map(|f| (a.id.clone(), f))));
        out
    }

    pub fn problem(&self, conjecture: Option<(&str, Formula)>) -> Problem {
        let mut statements: Vec<Statement> =
            self.logical_axioms().into_iter().map(|(name, formula)| Statement { name, role: Role::Axiom, formula }).collect();
        if let Some((name, formula)) = conjecture {
            statements.push(Statement { name: name.to_string(), role: Role::Conjecture, formula });
        }
        Problem { statements }
    }

    /// TPTP rendering of the axioms; byte-stable for a given snapshot.
    pub fn emit_tptp(&self) -> String {
        self.problem(None).to_tptp()
    }

    pub fn apply_patch(&self, patch: &CorrectionPatch) -> Result<Ontology, OntologyError> {
        let mut entries: Vec<(String, SExpr, AxiomOrigin)> =
            self.axioms.iter().map(|a| (a.id.clone(), a.source.clone(), a.origin)).collect();
        for edit in &patch.edits {
            match edit {
                PatchEdit::ReplaceAxiom { id, kif } => {
                    let slot = entries.iter_mut().find(|(i, _, _)| i == id).ok_or_else(|| OntologyError::MissingAxiom(id.clone()))?;
                    if slot.1 != *kif {
                        slot.1 = kif.clone();
                        if slot.2 == AxiomOrigin::Base {
                            slot.2 = AxiomOrigin::Patched;
                        }
                    }
                }
                PatchEdit::AddAxiom { id, kif } => match entries.iter_mut().find(|(i, _, _)| i == id) {
                    Some(slot) => slot.1 = kif.clone(),
                    None => entries.push((id.clone(), kif.clone(), AxiomOrigin::Added)),
                },
                PatchEdit::SetSignature { relation, arg, class } => {
                    if !self.index.is_known_class(class) && !patch_declares_class(patch, class) {
                        return Err(OntologyError::SignatureClass { relation: relation.clone(), class: class.clone() });
                    }
                    let new = SExpr::list(vec![
                        SExpr::atom("domain"),
                        SExpr::atom(relation.clone()),
                        SExpr::atom(arg.to_string()),
                        SExpr::atom(class.clone()),
                    ]);
                    let existing = entries.iter_mut().find(|(_, e, _)| {
                        e.head() == Some("domain")
                            && args_of(e).first().and_then(SExpr::as_atom) == Some(relation.as_str())
                            && args_of(e).get(1).and_then(SExpr::as_atom) == Some(arg.to_string().as_str())
                    });
                    match existing {
                        Some(slot) => {
                            if slot.1 != new {
                                slot.1 = new;
                                if slot.2 == AxiomOrigin::Base {
                                    slot.2 = AxiomOrigin::Patched;
                                }
                            }
                        }
                        None => entries.push((format!("domain-{relation}-{arg}"), new, AxiomOrigin::Added)),
                    }
                }
            }
        }
        Self::build(entries, self.version + 1)
    }

    /// Axioms whose conclusion relates two distinct variables by `part`
    /// while the axiom types them with different classes.
    pub fn suggest_proper_part_rewrites(&self) -> Vec<String> {
        self.axioms.iter().filter(|a| a.formula.as_ref().is_some_and(is_proper_part_candidate)).map(|a| a.id.clone()).collect()
    }

    /// Patch replacing `part` by `properPart` in the given axioms.
    pub fn proper_part_patch(&self, ids: &[String]) -> Result<CorrectionPatch, OntologyError> {
        let mut edits = Vec::new();
        for id in ids {
            let ax = self.axiom(id).ok_or_else(|| OntologyError::MissingAxiom(id.clone()))?;
            edits.push(PatchEdit::ReplaceAxiom { id: id.clone(), kif: rename_head(&ax.source, "part", "properPart") });
        }
        Ok(CorrectionPatch { name: "proper-part-rewrites".into(), edits, notes: Vec::new() })
    }

    /// Encoding of the snapshot with one unary predicate per class
    /// (`instance(t, C)` becomes `in_C(t)`), taxonomy facts expressed only
    /// through implications. Used by the finite model oracle.
    pub fn unary_view(&self) -> Result<Vec<Formula>, OntologyError> {
        let mut out = Vec::new();
        for a in &self.axioms {
            if let Some(f) = &a.formula {
                out.push(unary_formula(f, true).ok_or_else(|| OntologyError::UnaryView { id: a.id.clone() })?);
            }
        }
        Ok(out)
    }
}

fn patch_declares_class(patch: &CorrectionPatch, class: &str) -> bool {
    patch.edits.iter().any(|e| match e {
        PatchEdit::AddAxiom { kif, .. } | PatchEdit::ReplaceAxiom { kif, .. } => {
            matches!(kif.head(), Some("subclass") | Some("partition")) && args_of(kif).iter().any(|a| a.as_atom() == Some(class))
        }
        _ => false,
    })
}

fn rename_head(e: &SExpr, from: &str, to: &str) -> SExpr {
    match e {
        SExpr::Atom(..) => e.clone(),
        SExpr::List(items, pos) => {
            let mut out: Vec<SExpr> = items.iter().map(|i| rename_head(i, from, to)).collect();
            if let Some(SExpr::Atom(h, p)) = out.first() {
                if h == from {
                    out[0] = SExpr::Atom(to.to_string(), *p);
                }
            }
            SExpr::List(out, *pos)
        }
    }
}

fn is_proper_part_candidate(f: &Formula) -> bool {
    let atoms = f.atoms();
    let class_of = |v: &str| -> BTreeSet<String> {
        atoms
            .iter()
            .filter(|a| a.pred == "instance" && a.args.len() == 2 && a.args[0] == Term::var(v))
            .filter_map(|a| match &a.args[1] {
                Term::Const(c) => Some(c.clone()),
                _ => None,
            })
            .collect()
    };
    atoms.iter().any(|a| {
        if a.pred != "part" || a.args.len() != 2 {
            return false;
        }
        match (&a.args[0], &a.args[1]) {
            (Term::Var(u), Term::Var(w)) if u != w => {
                let (cu, cw) = (class_of(u), class_of(w));
                !cu.is_empty() && !cw.is_empty() && cu != cw
            }
            _ => false,
        }
    })
}

/// Translation to the unary class encoding. `positive` tracks polarity so
/// that ground taxonomy facts can be dropped only where they are asserted.
pub fn unary_formula(f: &Formula, positive: bool) -> Option<Formula> {
    match f {
        Formula::Atom(a) => match (a.pred.as_str(), a.args.as_slice()) {
            ("instance", [t, Term::Const(c)]) => Some(Formula::atom(format!("in_{c}"), vec![t.clone()])),
            ("instance", _) => None,
            ("subclass" | "disjoint", [Term::Const(_), Term::Const(_)]) if positive => Some(Formula::And(vec![])),
            ("subclass" | "disjoint", _) => None,
            _ => Some(f.clone()),
        },
        Formula::Not(g) => Some(Formula::not(unary_formula(g, !positive)?)),
        Formula::And(gs) => Some(Formula::And(gs.iter().map(|g| unary_formula(g, positive)).collect::<Option<_>>()?)),
        Formula::Or(gs) => Some(Formula::Or(gs.iter().map(|g| unary_formula(g, positive)).collect::<Option<_>>()?)),
        Formula::Implies(a, b) => Some(Formula::implies(unary_formula(a, !positive)?, unary_formula(b, positive)?)),
        Formula::Iff(a, b) => {
            let (a, b) = (unary_formula(a, true)?, unary_formula(b, true)?);
            if a.atoms().is_empty() && b.atoms().is_empty() {
                return Some(Formula::And(vec![]));
            }
            Some(Formula::iff(a, b))
        }
        Formula::Forall(vs, g) => Some(Formula::Forall(vs.clone(), Box::new(unary_formula(g, positive)?))),
        Formula::Exists(vs, g) => Some(Formula::Exists(vs.clone(), Box::new(unary_formula(g, positive)?))),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatchEdit {
    ReplaceAxiom { id: String, kif: SExpr },
    AddAxiom { id: String, kif: SExpr },
    SetSignature { relation: String, arg: usize, class: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectionPatch {
    pub name: String,
    pub edits: Vec<PatchEdit>,
    /// Free-text `(note "...")` entries carried for provenance.
    pub notes: Vec<String>,
}

impl CorrectionPatch {
    /// Reads `(patch <name> <edit>...)` where each edit is
    /// `(replace-axiom <id> <kif>)`, `(add-axiom <id> <kif>)`,
    /// `(set-signature <relation> <arg> <class>)` or `(note "<text>")`.
    pub fn parse(src: &str) -> Result<CorrectionPatch, OntologyError> {
        let forms = kif::parse(src)?;
        let bad = |pos: Pos, m: &str| OntologyError::Kif(KifError::Malformed { pos, message: m.to_string() });
        let [form] = forms.as_slice() else {
            return Err(bad(Pos::default(), "a patch file holds exactly one (patch ...) form"));
        };
        let items = form.expr.as_list().unwrap_or(&[]);
        if form.expr.head() != Some("patch") || items.len() < 2 {
            return Err(bad(form.expr.pos(), "expected (patch <name> ...)"));
        }
        let name = sym(&items[1])?.to_string();
        let mut edits = Vec::new();
        let mut notes = Vec::new();
        for e in &items[2..] {
            let args = args_of(e);
            match (e.head(), args.len()) {
                (Some("replace-axiom"), 2) => edits.push(PatchEdit::ReplaceAxiom { id: sym(&args[0])?.into(), kif: args[1].clone() }),
                (Some("add-axiom"), 2) => edits.push(PatchEdit::AddAxiom { id: sym(&args[0])?.into(), kif: args[1].clone() }),
                (Some("set-signature"), 3) => edits.push(PatchEdit::SetSignature {
                    relation: sym(&args[0])?.into(),
                    arg: sym(&args[1])?.parse().map_err(|_| bad(args[1].pos(), "argument index must be a number"))?,
                    class: sym(&args[2])?.into(),
                }),
                (Some("note"), 1) => notes.push(sym(&args[0])?.trim_matches('"').to_string()),
                _ => return Err(bad(e.pos(), &format!("unknown patch edit {e}"))),
            }
        }
        Ok(CorrectionPatch { name, edits, notes })
    }

    pub fn empty(name: &str) -> Self {
        CorrectionPatch { name: name.to_string(), edits: Vec::new(), notes: Vec::new() }
    }

    pub fn count(&self) -> (usize, usize) {
        let replaced = self.edits.iter().filter(|e| !matches!(e, PatchEdit::AddAxiom { .. })).count();
        (replaced, self.edits.len() - replaced)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
(subclass Relation Entity)
(subclass BinaryPredicate Relation)
(subclass Object Entity)
(subclass SelfConnectedObject Object)
(subclass Collection Object)
(disjoint SelfConnectedObject Collection)
(subclass Group Collection)
(subclass Organism SelfConnectedObject)
(subclass Organ SelfConnectedObject)
(subclass Heart Organ)
(subclass Attribute Entity)
(subclass BiologicalAttribute Attribute)
(subclass PhysicalState Attribute)
(instance Solid PhysicalState)
(instance member BinaryPredicate)
(instance part BinaryPredicate)
(instance properPart BinaryPredicate)
(domain member 1 SelfConnectedObject)
(domain member 2 Collection)
;@id heart-part
(=> (instance ?H Heart) (exists (?O) (and (instance ?O Organism) (part ?H ?O))))
(=> (instance ?X Object) (part ?X ?X))
(documentation Heart EnglishLanguage "pumps blood")
"#;

    fn small() -> Ontology {
        Ontology::parse(SMALL).unwrap()
    }

    #[test]
    fn subclass_fact_indexed() {
        let o = small();
        assert!(o.index.parents["Heart"].contains("Organ"));
        assert!(o.index.is_subclass("Heart", "Object").unwrap());
        assert!(!o.index.is_subclass("Object", "Heart").unwrap());
        assert!(matches!(o.index.is_subclass("Nope", "Heart"), Err(OntologyError::UnknownClass(_))));
    }

    #[test]
    fn domain_fact_is_signature() {
        let o = small();
        assert_eq!(o.index.signatures["member"][&1], "SelfConnectedObject");
        assert_eq!(o.index.arity["member"], 2);
    }

    #[test]
    fn inherited_disjointness() {
        let o = small();
        assert!(o.index.are_disjoint("Heart", "Group").unwrap());
        assert!(o.index.are_disjoint("Group", "Organism").unwrap());
        assert!(!o.index.are_disjoint("Heart", "Organism").unwrap());
    }

    #[test]
    fn concept_kinds() {
        let o = small();
        assert_eq!(o.index.classify("Heart").unwrap().kind, ConceptKind::Class);
        assert_eq!(o.index.classify("Solid").unwrap().kind, ConceptKind::Attribute);
        assert_eq!(o.index.classify("BiologicalAttribute").unwrap().kind, ConceptKind::ClassOfAttributes);
        assert_eq!(o.index.classify("member").unwrap().kind, ConceptKind::Relation);
        assert!(o.index.classify("Unicorn").is_err());
    }

    #[test]
    fn labels_and_default_ids() {
        let o = small();
        assert!(o.axiom("heart-part").is_some());
        assert!(o.axiom("ax1").is_some());
    }

    #[test]
    fn rejects_unknown_head_and_row_vars() {
        assert!(matches!(Ontology::parse("(frobnicate A B)"), Err(OntologyError::Kif(KifError::UnknownHead { .. }))));
        let src = "(subclass A Entity)\n(instance r BinaryPredicate)\n(subclass BinaryPredicate Relation)\n(=> (r @ROW) (r @ROW))";
        assert!(matches!(Ontology::parse(src), Err(OntologyError::Kif(KifError::Unsupported { .. }))));
        let src = "(subclass BinaryPredicate Relation)\n(instance r BinaryPredicate)\n(r A B C)";
        assert!(matches!(Ontology::parse(src), Err(OntologyError::Kif(KifError::Arity { .. }))));
        assert!(matches!(Ontology::parse("(subclass A B"), Err(OntologyError::Kif(KifError::Unbalanced { .. }))));
    }

    #[test]
    fn rejects_cycles() {
        assert!(matches!(Ontology::parse("(subclass A B)\n(subclass B A)"), Err(OntologyError::Cycle(_))));
    }

    #[test]
    fn subclass_emits_implication() {
        let o = Ontology::parse("(subclass Heart Organ)").unwrap();
        let tptp = o.emit_tptp();
        assert!(tptp.contains("! [X] : (instance(X,s__Heart) => instance(X,s__Organ))"), "{tptp}");
        assert_eq!(tptp, o.emit_tptp());
    }

    #[test]
    fn empty_ontology_emits_bridges_only() {
        let o = Ontology::parse("").unwrap();
        assert_eq!(o.emit_tptp().lines().count(), bridge_axioms().len());
    }

    #[test]
    fn proper_part_candidates() {
        let o = small();
        assert_eq!(o.suggest_proper_part_rewrites(), vec!["heart-part".to_string()]);
        let p = o.proper_part_patch(&["heart-part".into()]).unwrap();
        let o2 = o.apply_patch(&p).unwrap();
        assert!(o2.axiom("heart-part").unwrap().source.to_string().contains("properPart"));
    }

    #[test]
    fn patching_is_pure_and_idempotent() {
        let o = small();
        let patch =
            CorrectionPatch::parse("(patch member (set-signature member 1 Object) (add-axiom group-agent (subclass Group Object)))")
                .unwrap();
        let p1 = o.apply_patch(&patch).unwrap();
        let p2 = p1.apply_patch(&patch).unwrap();
        assert_eq!(o.index.signatures["member"][&1], "SelfConnectedObject");
        assert_eq!(p1.index.signatures["member"][&1], "Object");
        assert_eq!(p1.version, 1);
        assert_eq!(p2.version, 2);
        assert_eq!(p1.content_hash(), p2.content_hash());
        assert_ne!(o.content_hash(), p1.content_hash());
        let e = o.apply_patch(&CorrectionPatch::empty("noop")).unwrap();
        assert_eq!(e.content_hash(), o.content_hash());
        assert_eq!(e.version, 1);
    }

    #[test]
    fn patch_errors() {
        let o = small();
        let p = CorrectionPatch::parse("(patch x (replace-axiom missing (subclass A B)))").unwrap();
        assert!(matches!(o.apply_patch(&p), Err(OntologyError::MissingAxiom(_))));
        let p = CorrectionPatch::parse("(patch x (set-signature member 1 Nowhere))").unwrap();
        assert!(matches!(o.apply_patch(&p), Err(OntologyError::SignatureClass { .. })));
    }
}
