//! First-order formulas over an equality-free, function-free source language.
//!
//! Function applications only appear after Skolemization, so `Term::App` is
//! present for the clause-level machinery but rejected by the parsers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::LogicError;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(String),
    App(String, Vec<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn constant(name: impl Into<String>) -> Self {
        Term::Const(name.into())
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Const(_) => {}
            Term::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    fn substitute(&self, map: &BTreeMap<String, Term>) -> Term {
        match self {
            Term::Var(v) => map.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::Const(_) => self.clone(),
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| a.substitute(map)).collect()),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Const(c) => write!(f, "{c}"),
            Term::App(g, args) => {
                write!(f, "({g}")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: impl Into<String>, args: Vec<Term>) -> Self {
        Atom { pred: pred.into(), args }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.pred)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Atom(Atom),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Forall(Vec<String>, Box<Formula>),
    Exists(Vec<String>, Box<Formula>),
}

impl Formula {
    pub fn atom(pred: impl Into<String>, args: Vec<Term>) -> Self {
        Formula::Atom(Atom::new(pred, args))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Self {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    pub fn forall(vars: Vec<String>, body: Formula) -> Self {
        if vars.is_empty() {
            body
        } else {
            Formula::Forall(vars, Box::new(body))
        }
    }

    pub fn exists(vars: Vec<String>, body: Formula) -> Self {
        if vars.is_empty() {
            body
        } else {
            Formula::Exists(vars, Box::new(body))
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Formula::Atom(a) => {
                let mut vs = BTreeSet::new();
                a.args.iter().for_each(|t| t.collect_vars(&mut vs));
                out.extend(vs.into_iter().filter(|v| !bound.contains(v)));
            }
            Formula::Not(f) => f.collect_free(bound, out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_free(bound, out)),
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Formula::Forall(vs, f) | Formula::Exists(vs, f) => {
                let n = bound.len();
                bound.extend(vs.iter().cloned());
                f.collect_free(bound, out);
                bound.truncate(n);
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Universal closure over the free variables, in sorted order.
    pub fn close_universally(self) -> Formula {
        let free: Vec<String> = self.free_vars().into_iter().collect();
        Formula::forall(free, self)
    }

    /// Replaces free occurrences of variables. Bound variables shadow the map.
    pub fn substitute(&self, map: &BTreeMap<String, Term>) -> Formula {
        match self {
            Formula::Atom(a) => Formula::Atom(Atom { pred: a.pred.clone(), args: a.args.iter().map(|t| t.substitute(map)).collect() }),
            Formula::Not(f) => Formula::not(f.substitute(map)),
            Formula::And(fs) => Formula::And(fs.iter().map(|f| f.substitute(map)).collect()),
            Formula::Or(fs) => Formula::Or(fs.iter().map(|f| f.substitute(map)).collect()),
            Formula::Implies(a, b) => Formula::implies(a.substitute(map), b.substitute(map)),
            Formula::Iff(a, b) => Formula::iff(a.substitute(map), b.substitute(map)),
            Formula::Forall(vs, f) | Formula::Exists(vs, f) => {
                let mut inner = map.clone();
                for v in vs {
                    inner.remove(v);
                }
                let body = f.substitute(&inner);
                match self {
                    Formula::Forall(..) => Formula::Forall(vs.clone(), Box::new(body)),
                    _ => Formula::Exists(vs.clone(), Box::new(body)),
                }
            }
        }
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.visit_atoms(&mut |a| out.push(a));
        out
    }

    fn visit_atoms<'a>(&'a self, cb: &mut dyn FnMut(&'a Atom)) {
        match self {
            Formula::Atom(a) => cb(a),
            Formula::Not(f) | Formula::Forall(_, f) | Formula::Exists(_, f) => f.visit_atoms(cb),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.visit_atoms(cb)),
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.visit_atoms(cb);
                b.visit_atoms(cb);
            }
        }
    }

    /// Predicate symbols with their arities. Fails when a symbol is used
    /// with two different arities.
    pub fn signature(&self) -> Result<BTreeMap<String, usize>, LogicError> {
        let mut sig = BTreeMap::new();
        extend_signature(&mut sig, self)?;
        Ok(sig)
    }

    pub fn constants(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        fn walk(t: &Term, out: &mut BTreeSet<String>) {
            match t {
                Term::Const(c) => {
                    out.insert(c.clone());
                }
                Term::App(_, args) => args.iter().for_each(|a| walk(a, out)),
                Term::Var(_) => {}
            }
        }
        for a in self.atoms() {
            a.args.iter().for_each(|t| walk(t, &mut out));
        }
        out
    }

    pub fn has_function_symbols(&self) -> bool {
        self.atoms().iter().any(|a| a.args.iter().any(|t| matches!(t, Term::App(..))))
    }

    /// Renames bound variables so that every quantifier binds names that
    /// are distinct from each other and from the free variables.
    pub fn rectify(&self) -> Formula {
        let mut used: BTreeSet<String> = self.free_vars();
        self.rectify_inner(&BTreeMap::new(), &mut used)
    }

    fn rectify_inner(&self, ren: &BTreeMap<String, Term>, used: &mut BTreeSet<String>) -> Formula {
        match self {
            Formula::Atom(_) => self.substitute(ren),
            Formula::Not(f) => Formula::not(f.rectify_inner(ren, used)),
            Formula::And(fs) => Formula::And(fs.iter().map(|f| f.rectify_inner(ren, used)).collect()),
            Formula::Or(fs) => Formula::Or(fs.iter().map(|f| f.rectify_inner(ren, used)).collect()),
            Formula::Implies(a, b) => Formula::implies(a.rectify_inner(ren, used), b.rectify_inner(ren, used)),
            Formula::Iff(a, b) => Formula::iff(a.rectify_inner(ren, used), b.rectify_inner(ren, used)),
            Formula::Forall(vs, f) | Formula::Exists(vs, f) => {
                let mut inner = ren.clone();
                let mut fresh_vs = Vec::with_capacity(vs.len());
                for v in vs {
                    let fresh = if used.contains(v) {
                        let mut i = 1;
                        loop {
                            let cand = format!("{v}{i}");
                            if !used.contains(&cand) {
                                break cand;
                            }
                            i += 1;
                        }
                    } else {
                        v.clone()
                    };
                    used.insert(fresh.clone());
                    inner.insert(v.clone(), Term::Var(fresh.clone()));
                    fresh_vs.push(fresh);
                }
                let body = Box::new(f.rectify_inner(&inner, used));
                if matches!(self, Formula::Forall(..)) {
                    Formula::Forall(fresh_vs, body)
                } else {
                    Formula::Exists(fresh_vs, body)
                }
            }
        }
    }
}

pub fn extend_signature(sig: &mut BTreeMap<String, usize>, f: &Formula) -> Result<(), LogicError> {
    for a in f.atoms() {
        match sig.get(&a.pred) {
            Some(&n) if n != a.args.len() => return Err(LogicError::Arity { symbol: a.pred.clone(), expected: n, found: a.args.len() }),
            Some(_) => {}
            None => {
                sig.insert(a.pred.clone(), a.args.len());
            }
        }
    }
    Ok(())
}

/// KIF-style single-line rendering, `instance`/`subclass` printed with the
/// `$` prefix used by the first-order ontology.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::logic::kif_surface(self))
    }
}
