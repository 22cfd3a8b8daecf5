//! Clausification: negation normal form, Skolemization, distribution.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use super::formula::{Atom, Formula, Term};
use super::LogicError;

const MAX_CLAUSES: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub positive: bool,
    pub atom: Atom,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal { positive: true, atom }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal { positive: false, atom }
    }

    pub fn negated(&self) -> Self {
        Literal { positive: !self.positive, atom: self.atom.clone() }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.atom)
        } else {
            write!(f, "(not {})", self.atom)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub literals: Vec<Literal>,
    /// Input formula label or inference record.
    pub origin: String,
}

impl Clause {
    pub fn new(literals: Vec<Literal>, origin: impl Into<String>) -> Self {
        let mut seen = HashSet::new();
        let literals = literals.into_iter().filter(|l| seen.insert(l.clone())).collect();
        Clause { literals, origin: origin.into() }
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn is_tautology(&self) -> bool {
        self.literals.iter().any(|l| self.literals.iter().any(|m| m.positive != l.positive && m.atom == l.atom))
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.literals.iter().map(|l| l.to_string()).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Per-problem Skolem symbol supply. Numbering is sequential so that the
/// clause set of a problem is reproducible.
#[derive(Debug, Default, Clone)]
pub struct Skolemizer {
    next: usize,
}

impl Skolemizer {
    pub fn new() -> Self {
        Self::default()
    }

    fn fresh(&mut self) -> String {
        self.next += 1;
        format!("sk{}", self.next)
    }
}

#[derive(Debug, Clone)]
enum Nnf {
    Lit(bool, Atom),
    And(Vec<Nnf>),
    Or(Vec<Nnf>),
    Forall(Vec<String>, Box<Nnf>),
    Exists(Vec<String>, Box<Nnf>),
}

fn nnf(f: &Formula, positive: bool) -> Nnf {
    match f {
        Formula::Atom(a) => Nnf::Lit(positive, a.clone()),
        Formula::Not(g) => nnf(g, !positive),
        Formula::And(gs) => {
            let kids = gs.iter().map(|g| nnf(g, positive)).collect();
            if positive {
                Nnf::And(kids)
            } else {
                Nnf::Or(kids)
            }
        }
        Formula::Or(gs) => {
            let kids = gs.iter().map(|g| nnf(g, positive)).collect();
            if positive {
                Nnf::Or(kids)
            } else {
                Nnf::And(kids)
            }
        }
        Formula::Implies(a, b) => {
            if positive {
                Nnf::Or(vec![nnf(a, false), nnf(b, true)])
            } else {
                Nnf::And(vec![nnf(a, true), nnf(b, false)])
            }
        }
        Formula::Iff(a, b) => {
            if positive {
                Nnf::And(vec![Nnf::Or(vec![nnf(a, false), nnf(b, true)]), Nnf::Or(vec![nnf(a, true), nnf(b, false)])])
            } else {
                Nnf::Or(vec![Nnf::And(vec![nnf(a, true), nnf(b, false)]), Nnf::And(vec![nnf(a, false), nnf(b, true)])])
            }
        }
        Formula::Forall(vs, g) => {
            let body = Box::new(nnf(g, positive));
            if positive {
                Nnf::Forall(vs.clone(), body)
            } else {
                Nnf::Exists(vs.clone(), body)
            }
        }
        Formula::Exists(vs, g) => {
            let body = Box::new(nnf(g, positive));
            if positive {
                Nnf::Exists(vs.clone(), body)
            } else {
                Nnf::Forall(vs.clone(), body)
            }
        }
    }
}

fn nnf_free(n: &Nnf, out: &mut BTreeSet<String>) {
    match n {
        Nnf::Lit(_, a) => {
            let f = Formula::Atom(a.clone());
            out.extend(f.free_vars());
        }
        Nnf::And(ks) | Nnf::Or(ks) => ks.iter().for_each(|k| nnf_free(k, out)),
        Nnf::Forall(vs, b) | Nnf::Exists(vs, b) => {
            let mut inner = BTreeSet::new();
            nnf_free(b, &mut inner);
            out.extend(inner.into_iter().filter(|v| !vs.contains(v)));
        }
    }
}

fn substitute_term(t: &Term, map: &BTreeMap<String, Term>) -> Term {
    match t {
        Term::Var(v) => map.get(v).cloned().unwrap_or_else(|| t.clone()),
        Term::Const(_) => t.clone(),
        Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| substitute_term(a, map)).collect()),
    }
}

/// Removes existentials. `universals` are the universally bound variables
/// in scope, in binding order; Skolem terms take those that occur free in
/// the existential's body.
fn skolemize(n: Nnf, universals: &mut Vec<String>, map: &mut BTreeMap<String, Term>, sk: &mut Skolemizer) -> Nnf {
    match n {
        Nnf::Lit(p, a) => Nnf::Lit(p, Atom { pred: a.pred, args: a.args.iter().map(|t| substitute_term(t, map)).collect() }),
        Nnf::And(ks) => Nnf::And(ks.into_iter().map(|k| skolemize(k, universals, map, sk)).collect()),
        Nnf::Or(ks) => Nnf::Or(ks.into_iter().map(|k| skolemize(k, universals, map, sk)).collect()),
        Nnf::Forall(vs, b) => {
            let n0 = universals.len();
            universals.extend(vs.iter().cloned());
            let body = skolemize(*b, universals, map, sk);
            universals.truncate(n0);
            Nnf::Forall(vs, Box::new(body))
        }
        Nnf::Exists(vs, b) => {
            let mut free = BTreeSet::new();
            nnf_free(&Nnf::Exists(vs.clone(), b.clone()), &mut free);
            let deps: Vec<Term> = universals.iter().filter(|u| free.contains(*u)).map(|u| Term::Var(u.clone())).collect();
            let saved: Vec<(String, Option<Term>)> = vs.iter().map(|v| (v.clone(), map.get(v).cloned())).collect();
            for v in &vs {
                let name = sk.fresh();
                let t = if deps.is_empty() { Term::Const(name) } else { Term::App(name, deps.clone()) };
                map.insert(v.clone(), t);
            }
            let body = skolemize(*b, universals, map, sk);
            for (v, old) in saved {
                match old {
                    Some(t) => map.insert(v, t),
                    None => map.remove(&v),
                };
            }
            body
        }
    }
}

fn distribute(n: &Nnf) -> Result<Vec<Vec<Literal>>, LogicError> {
    match n {
        Nnf::Lit(p, a) => Ok(vec![vec![Literal { positive: *p, atom: a.clone() }]]),
        Nnf::Forall(_, b) => distribute(b),
        Nnf::Exists(..) => unreachable!("skolemized"),
        Nnf::And(ks) => {
            let mut out = Vec::new();
            for k in ks {
                out.extend(distribute(k)?);
                if out.len() > MAX_CLAUSES {
                    return Err(LogicError::CnfBlowup(out.len()));
                }
            }
            Ok(out)
        }
        Nnf::Or(ks) => {
            let mut acc: Vec<Vec<Literal>> = vec![Vec::new()];
            for k in ks {
                let part = distribute(k)?;
                if acc.len() * part.len() > MAX_CLAUSES {
                    return Err(LogicError::CnfBlowup(acc.len() * part.len()));
                }
                let mut next = Vec::with_capacity(acc.len() * part.len());
                for a in &acc {
                    for p in &part {
                        let mut c = a.clone();
                        c.extend(p.iter().cloned());
                        next.push(c);
                    }
                }
                acc = next;
            }
            Ok(acc)
        }
    }
}

/// Converts a closed formula into an equisatisfiable clause set.
pub fn to_cnf(f: &Formula, origin: &str, sk: &mut Skolemizer) -> Result<Vec<Clause>, LogicError> {
    let free = f.free_vars();
    if !free.is_empty() {
        return Err(LogicError::NotClosed(free.into_iter().collect()));
    }
    f.signature()?;
    let rect = f.rectify();
    let n = skolemize(nnf(&rect, true), &mut Vec::new(), &mut BTreeMap::new(), sk);
    let raw = distribute(&n)?;
    let mut out = Vec::new();
    let mut seen_vars: BTreeSet<String> = BTreeSet::new();
    for (i, lits) in raw.into_iter().enumerate() {
        let clause = Clause::new(lits, origin);
        if clause.is_tautology() {
            continue;
        }
        let mut vars = BTreeSet::new();
        for l in &clause.literals {
            vars.extend(Formula::Atom(l.atom.clone()).free_vars());
        }
        let clause = if vars.iter().any(|v| seen_vars.contains(v)) {
            let ren: BTreeMap<String, Term> = vars.iter().map(|v| (v.clone(), Term::Var(format!("{v}_{i}")))).collect();
            let lits = clause
                .literals
                .iter()
                .map(|l| Literal {
                    positive: l.positive,
                    atom: Atom { pred: l.atom.pred.clone(), args: l.atom.args.iter().map(|t| substitute_term(t, &ren)).collect() },
                })
                .collect();
            seen_vars.extend(ren.values().map(|t| match t {
                Term::Var(v) => v.clone(),
                _ => unreachable!(),
            }));
            Clause::new(lits, origin)
        } else {
            seen_vars.extend(vars);
            clause
        };
        out.push(clause);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Term {
        Term::var(n)
    }

    #[test]
    fn negated_existential_conjunction_is_one_clause() {
        let body = Formula::And(vec![
            Formula::atom("p", vec![v("x")]),
            Formula::atom("q", vec![v("y")]),
            Formula::atom("r", vec![v("x"), v("y")]),
        ]);
        let f = Formula::not(Formula::exists(vec!["x".into(), "y".into()], body));
        let cs = to_cnf(&f, "g", &mut Skolemizer::new()).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].literals.len(), 3);
        assert!(cs[0].literals.iter().all(|l| !l.positive));
    }

    #[test]
    fn textbook_skolemization() {
        let f = Formula::forall(
            vec!["x".into()],
            Formula::implies(Formula::atom("p", vec![v("x")]), Formula::exists(vec!["y".into()], Formula::atom("r", vec![v("x"), v("y")]))),
        );
        let cs = to_cnf(&f, "a", &mut Skolemizer::new()).unwrap();
        assert_eq!(cs.len(), 1);
        let c = &cs[0];
        assert_eq!(c.literals[0], Literal::neg(Atom::new("p", vec![v("x")])));
        assert_eq!(c.literals[1], Literal::pos(Atom::new("r", vec![v("x"), Term::App("sk1".into(), vec![v("x")])])));
    }

    #[test]
    fn skolem_numbering_is_sequential_per_problem() {
        let f = Formula::exists(vec!["x".into()], Formula::atom("p", vec![v("x")]));
        let mut sk = Skolemizer::new();
        let a = to_cnf(&f, "a", &mut sk).unwrap();
        let b = to_cnf(&f, "b", &mut sk).unwrap();
        assert_eq!(a[0].literals[0].atom.args[0], Term::constant("sk1"));
        assert_eq!(b[0].literals[0].atom.args[0], Term::constant("sk2"));
    }

    #[test]
    fn open_formula_rejected() {
        let f = Formula::atom("p", vec![v("x")]);
        assert!(matches!(to_cnf(&f, "a", &mut Skolemizer::new()), Err(LogicError::NotClosed(_))));
    }

    #[test]
    fn arity_clash_rejected() {
        let f = Formula::And(vec![Formula::atom("p", vec![Term::constant("a")]), Formula::atom("p", vec![])]);
        assert!(matches!(to_cnf(&f, "a", &mut Skolemizer::new()), Err(LogicError::Arity { .. })));
    }
}
