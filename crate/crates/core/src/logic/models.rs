//! Finite model search over small domains.
//!
//! Problems are grounded over a domain in which every named constant denotes
//! its own element, followed by up to `max_domain` anonymous elements. In an
//! equality-free language an element can always be duplicated without
//! changing truth values, so this covers every model with at most
//! `max_domain` elements. The ground problem is decided with the CDCL solver
//! in [`super::sat`].

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::formula::{Formula, Term};
use super::sat::{lit, Lit, Solver};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSearch {
    /// Anonymous elements beyond the named constants, at most 5.
    pub max_domain: usize,
    /// Whether the caller knows a countermodel, if one exists, has at most
    /// `max_domain` anonymous elements. Without it a failed search is
    /// inconclusive instead of a proof of entailment.
    pub finitely_controllable: bool,
    pub max_ground_clauses: usize,
    pub max_conflicts: u64,
}

impl Default for ModelSearch {
    fn default() -> Self {
        ModelSearch { max_domain: 4, finitely_controllable: true, max_ground_clauses: 4_000_000, max_conflicts: 2_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelResult {
    Entailed,
    /// `size` counts all domain elements, named and anonymous.
    CounterModel {
        size: usize,
        facts: Vec<String>,
    },
    Inconclusive(String),
}

#[derive(Debug, Clone)]
enum Nnf {
    Lit(bool, String, Vec<Term>),
    And(Vec<Nnf>),
    Or(Vec<Nnf>),
    All(Vec<String>, Box<Nnf>),
    Some(Vec<String>, Box<Nnf>),
}

fn to_nnf(f: &Formula, pos: bool) -> Nnf {
    match f {
        Formula::Atom(a) => Nnf::Lit(pos, a.pred.clone(), a.args.clone()),
        Formula::Not(g) => to_nnf(g, !pos),
        Formula::And(gs) if pos => Nnf::And(gs.iter().map(|g| to_nnf(g, true)).collect()),
        Formula::And(gs) => Nnf::Or(gs.iter().map(|g| to_nnf(g, false)).collect()),
        Formula::Or(gs) if pos => Nnf::Or(gs.iter().map(|g| to_nnf(g, true)).collect()),
        Formula::Or(gs) => Nnf::And(gs.iter().map(|g| to_nnf(g, false)).collect()),
        Formula::Implies(a, b) if pos => Nnf::Or(vec![to_nnf(a, false), to_nnf(b, true)]),
        Formula::Implies(a, b) => Nnf::And(vec![to_nnf(a, true), to_nnf(b, false)]),
        Formula::Iff(a, b) if pos => {
            Nnf::And(vec![Nnf::Or(vec![to_nnf(a, false), to_nnf(b, true)]), Nnf::Or(vec![to_nnf(a, true), to_nnf(b, false)])])
        }
        Formula::Iff(a, b) => {
            Nnf::Or(vec![Nnf::And(vec![to_nnf(a, true), to_nnf(b, false)]), Nnf::And(vec![to_nnf(a, false), to_nnf(b, true)])])
        }
        Formula::Forall(vs, g) if pos => Nnf::All(vs.clone(), Box::new(to_nnf(g, true))),
        Formula::Forall(vs, g) => Nnf::Some(vs.clone(), Box::new(to_nnf(g, false))),
        Formula::Exists(vs, g) if pos => Nnf::Some(vs.clone(), Box::new(to_nnf(g, true))),
        Formula::Exists(vs, g) => Nnf::All(vs.clone(), Box::new(to_nnf(g, false))),
    }
}

#[derive(Clone, Copy)]
enum Enc {
    True,
    False,
    L(Lit),
}

struct Grounder<'a> {
    n: usize,
    consts: &'a BTreeMap<String, usize>,
    atoms: HashMap<(String, Vec<usize>), u32>,
    nvars: u32,
    clauses: Vec<Vec<Lit>>,
    limit: usize,
    overflow: bool,
}

impl Grounder<'_> {
    fn fresh(&mut self) -> u32 {
        self.nvars += 1;
        self.nvars - 1
    }

    fn emit(&mut self, c: Vec<Lit>) {
        if self.clauses.len() >= self.limit {
            self.overflow = true;
            return;
        }
        self.clauses.push(c);
    }

    fn elem(&self, t: &Term, env: &BTreeMap<String, usize>) -> usize {
        match t {
            Term::Var(v) => env[v],
            Term::Const(c) => self.consts[c],
            Term::App(..) => unreachable!("rejected before grounding"),
        }
    }

    /// Returns an encoding `e` with `e -> f` enforced by emitted clauses.
    fn enc(&mut self, f: &Nnf, env: &mut BTreeMap<String, usize>) -> Enc {
        if self.overflow {
            return Enc::True;
        }
        match f {
            Nnf::Lit(pos, pred, args) => {
                let key = (pred.clone(), args.iter().map(|a| self.elem(a, env)).collect());
                let next = self.nvars;
                let v = *self.atoms.entry(key).or_insert(next);
                if v == next {
                    self.nvars += 1;
                }
                Enc::L(lit(v, *pos))
            }
            Nnf::And(ks) => {
                let parts: Vec<Enc> = ks.iter().map(|k| self.enc(k, env)).collect();
                self.and(parts)
            }
            Nnf::Or(ks) => {
                let parts: Vec<Enc> = ks.iter().map(|k| self.enc(k, env)).collect();
                self.or(parts)
            }
            Nnf::All(vs, body) | Nnf::Some(vs, body) => {
                let mut parts = Vec::new();
                let saved: Vec<Option<usize>> = vs.iter().map(|v| env.get(v).copied()).collect();
                let total = self.n.pow(vs.len() as u32);
                for mut code in 0..total {
                    for v in vs {
                        env.insert(v.clone(), code % self.n);
                        code /= self.n;
                    }
                    parts.push(self.enc(body, env));
                }
                for (v, old) in vs.iter().zip(saved) {
                    match old {
                        Some(e) => env.insert(v.clone(), e),
                        None => env.remove(v),
                    };
                }
                if matches!(f, Nnf::All(..)) {
                    self.and(parts)
                } else {
                    self.or(parts)
                }
            }
        }
    }

    fn and(&mut self, parts: Vec<Enc>) -> Enc {
        let mut lits = Vec::new();
        for p in parts {
            match p {
                Enc::False => return Enc::False,
                Enc::True => {}
                Enc::L(l) => lits.push(l),
            }
        }
        match lits.len() {
            0 => Enc::True,
            1 => Enc::L(lits[0]),
            _ => {
                let v = self.fresh();
                for l in lits {
                    self.emit(vec![lit(v, false), l]);
                }
                Enc::L(lit(v, true))
            }
        }
    }

    fn or(&mut self, parts: Vec<Enc>) -> Enc {
        let mut lits = Vec::new();
        for p in parts {
            match p {
                Enc::True => return Enc::True,
                Enc::False => {}
                Enc::L(l) => lits.push(l),
            }
        }
        match lits.len() {
            0 => Enc::False,
            1 => Enc::L(lits[0]),
            _ => {
                let v = self.fresh();
                let mut c = vec![lit(v, false)];
                c.extend(lits);
                self.emit(c);
                Enc::L(lit(v, true))
            }
        }
    }
}

/// Searches for an interpretation satisfying every axiom and the negated
/// conjecture.
pub fn enumerate_models(axioms: &[Formula], conjecture: &Formula, search: ModelSearch) -> ModelResult {
    if search.max_domain > 5 {
        return ModelResult::Inconclusive(format!("domain bound {} exceeds 5", search.max_domain));
    }
    let mut all: Vec<Formula> = axioms.to_vec();
    all.push(Formula::not(conjecture.clone()));
    if let Some(f) = all.iter().find(|f| !f.is_closed()) {
        return ModelResult::Inconclusive(format!("open formula {f}"));
    }
    if all.iter().any(|f| f.has_function_symbols()) {
        return ModelResult::Inconclusive("function symbols are outside the searchable fragment".into());
    }
    let mut names = BTreeSet::new();
    for f in &all {
        names.extend(f.constants());
    }
    let consts: BTreeMap<String, usize> = names.into_iter().enumerate().map(|(i, c)| (c, i)).collect();
    let nnfs: Vec<Nnf> = all.iter().map(|f| to_nnf(f, true)).collect();

    for extra in 0..=search.max_domain {
        let n = consts.len() + extra;
        if n == 0 {
            continue;
        }
        let mut g = Grounder {
            n,
            consts: &consts,
            atoms: HashMap::new(),
            nvars: 0,
            clauses: Vec::new(),
            limit: search.max_ground_clauses,
            overflow: false,
        };
        let mut trivially_false = false;
        for f in &nnfs {
            match g.enc(f, &mut BTreeMap::new()) {
                Enc::True => {}
                Enc::False => trivially_false = true,
                Enc::L(l) => g.emit(vec![l]),
            }
        }
        if g.overflow {
            return ModelResult::Inconclusive(format!("ground problem over {n} elements exceeds {} clauses", search.max_ground_clauses));
        }
        if trivially_false {
            continue;
        }
        let mut solver = Solver::new(g.nvars as usize);
        for c in g.clauses.drain(..) {
            solver.add_clause(c);
        }
        match solver.solve(search.max_conflicts) {
            Some(true) => {
                let elem_name = |e: usize| consts.iter().find(|(_, &i)| i == e).map(|(c, _)| c.clone()).unwrap_or_else(|| format!("e{e}"));
                let mut facts: Vec<String> = g
                    .atoms
                    .iter()
                    .filter(|(_, &v)| solver.model_value(v))
                    .map(|((p, args), _)| {
                        let a: Vec<String> = args.iter().map(|&e| elem_name(e)).collect();
                        format!("({p} {})", a.join(" "))
                    })
                    .collect();
                facts.sort();
                return ModelResult::CounterModel { size: n, facts };
            }
            Some(false) => {}
            None => return ModelResult::Inconclusive(format!("conflict limit reached at {n} elements")),
        }
    }
    if search.finitely_controllable {
        ModelResult::Entailed
    } else {
        ModelResult::Inconclusive(format!("no countermodel with at most {} anonymous elements", search.max_domain))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(x: Term, c: &str) -> Formula {
        Formula::atom("instance", vec![x, Term::constant(c)])
    }

    #[test]
    fn witness_gives_entailment() {
        let axioms = vec![
            inst(Term::constant("h"), "Heart"),
            Formula::forall(vec!["x".into()], Formula::implies(inst(Term::var("x"), "Heart"), inst(Term::var("x"), "Organ"))),
        ];
        let conj = Formula::exists(vec!["x".into()], inst(Term::var("x"), "Organ"));
        assert_eq!(enumerate_models(&axioms, &conj, ModelSearch::default()), ModelResult::Entailed);
    }

    #[test]
    fn empty_theory_has_one_element_countermodel() {
        let conj = Formula::exists(vec!["x".into()], Formula::atom("p", vec![Term::var("x")]));
        match enumerate_models(&[], &conj, ModelSearch::default()) {
            ModelResult::CounterModel { size, .. } => assert_eq!(size, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn not_finitely_controllable_is_inconclusive() {
        let conj = Formula::atom("p", vec![]);
        let axioms = vec![conj.clone()];
        let s = ModelSearch { finitely_controllable: false, ..ModelSearch::default() };
        assert!(matches!(enumerate_models(&axioms, &conj, s), ModelResult::Inconclusive(_)));
    }

    #[test]
    fn oversized_domain_rejected() {
        let s = ModelSearch { max_domain: 6, ..ModelSearch::default() };
        assert!(matches!(enumerate_models(&[], &Formula::atom("p", vec![]), s), ModelResult::Inconclusive(_)));
    }
}
