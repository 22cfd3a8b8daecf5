//! Given-clause saturation prover.
//!
//! Binary resolution restricted by negative literal selection: a clause with
//! negative literals only resolves on its selected negative literal, and only
//! against positive clauses. Positive clauses are factored. Forward
//! subsumption and a term-depth bound keep the search finite on the
//! function-free inputs produced by the pipeline.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};
use serde::{Deserialize, Serialize};

use super::cnf::Clause;
use super::formula::Term;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub max_seconds: f64,
    /// Maximum number of retained clauses before giving up with `Timeout`.
    pub max_clauses: usize,
    /// Resolvents with deeper terms are discarded.
    pub max_term_depth: usize,
    /// Resolvents with more literals are discarded.
    pub max_literals: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_seconds: 600.0, max_clauses: 200_000, max_term_depth: 3, max_literals: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictStatus {
    Proved,
    /// The prover reported the conjecture as not entailed. Only external
    /// provers with a countermodel marker produce this.
    Refuted,
    GaveUp,
    Timeout,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statistics {
    pub generated: usize,
    pub kept: usize,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: VerdictStatus,
    pub stats: Statistics,
    /// Derivation of the empty clause, one step per line; empty unless proved.
    #[serde(default)]
    pub proof: Vec<String>,
    #[serde(default)]
    pub diagnostic: Option<String>,
}

impl Verdict {
    pub fn new(status: VerdictStatus) -> Self {
        Verdict { status, stats: Statistics::default(), proof: Vec::new(), diagnostic: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum PTerm {
    Var(u32),
    Fn(u32, Vec<PTerm>),
}

impl PTerm {
    fn depth(&self) -> usize {
        match self {
            PTerm::Var(_) => 0,
            PTerm::Fn(_, args) => args.iter().map(|a| 1 + a.depth()).max().unwrap_or(0),
        }
    }

    fn is_ground(&self) -> bool {
        match self {
            PTerm::Var(_) => false,
            PTerm::Fn(_, args) => args.iter().all(|a| a.is_ground()),
        }
    }

    fn weight(&self) -> usize {
        match self {
            PTerm::Var(_) => 1,
            PTerm::Fn(_, args) => 1 + args.iter().map(|a| a.weight()).sum::<usize>(),
        }
    }

    fn shift(&self, by: u32) -> PTerm {
        match self {
            PTerm::Var(v) => PTerm::Var(v + by),
            PTerm::Fn(f, args) => PTerm::Fn(*f, args.iter().map(|a| a.shift(by)).collect()),
        }
    }

    fn top(&self) -> Option<u32> {
        match self {
            PTerm::Var(_) => None,
            PTerm::Fn(f, _) => Some(*f),
        }
    }

    /// False when the two terms certainly do not unify.
    fn may_unify(&self, other: &PTerm) -> bool {
        match (self, other) {
            (PTerm::Fn(f, fa), PTerm::Fn(g, ga)) => f == g && fa.len() == ga.len() && fa.iter().zip(ga).all(|(x, y)| x.may_unify(y)),
            _ => true,
        }
    }
}

type SubKey = (bool, u32, Vec<Option<u32>>);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct PLit {
    pos: bool,
    pred: u32,
    args: Vec<PTerm>,
}

impl PLit {
    fn is_ground(&self) -> bool {
        self.args.iter().all(|a| a.is_ground())
    }

    fn shift(&self, by: u32) -> PLit {
        PLit { pos: self.pos, pred: self.pred, args: self.args.iter().map(|a| a.shift(by)).collect() }
    }

    fn key(&self) -> SubKey {
        (self.pos, self.pred, self.args.iter().map(PTerm::top).collect())
    }

    /// Keys of literals that could match onto this one.
    fn generalizing_keys(&self) -> Vec<SubKey> {
        let mut out = vec![Vec::with_capacity(self.args.len())];
        for a in &self.args {
            match a.top() {
                None => out.iter_mut().for_each(|k| k.push(None)),
                Some(f) => {
                    let mut with = out.clone();
                    with.iter_mut().for_each(|k| k.push(Some(f)));
                    out.iter_mut().for_each(|k| k.push(None));
                    out.extend(with);
                }
            }
        }
        out.into_iter().map(|k| (self.pos, self.pred, k)).collect()
    }
}

#[derive(Debug, Clone)]
enum Origin {
    Input(String),
    Resolve(usize, usize),
    Factor(usize),
}

#[derive(Debug, Clone)]
struct PClause {
    lits: Vec<PLit>,
    nvars: u32,
    origin: Origin,
    /// Index of the selected negative literal, if any.
    selected: Option<usize>,
}

#[derive(Default)]
struct Interner {
    ids: HashMap<String, u32>,
    names: Vec<String>,
}

impl Interner {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&i) = self.ids.get(s) {
            return i;
        }
        let i = self.names.len() as u32;
        self.names.push(s.to_string());
        self.ids.insert(s.to_string(), i);
        i
    }
}

struct Subst {
    bind: Vec<Option<PTerm>>,
}

impl Subst {
    fn new(n: u32) -> Self {
        Subst { bind: vec![None; n as usize] }
    }

    fn resolve<'a>(&'a self, mut t: &'a PTerm) -> &'a PTerm {
        while let PTerm::Var(v) = t {
            match &self.bind[*v as usize] {
                Some(b) => t = b,
                None => break,
            }
        }
        t
    }

    fn occurs(&self, v: u32, t: &PTerm) -> bool {
        match self.resolve(t) {
            PTerm::Var(w) => *w == v,
            PTerm::Fn(_, args) => args.iter().any(|a| self.occurs(v, a)),
        }
    }

    fn unify(&mut self, a: &PTerm, b: &PTerm) -> bool {
        let a = self.resolve(a).clone();
        let b = self.resolve(b).clone();
        match (&a, &b) {
            (PTerm::Var(x), PTerm::Var(y)) if x == y => true,
            (PTerm::Var(x), t) | (t, PTerm::Var(x)) => {
                if self.occurs(*x, t) {
                    return false;
                }
                self.bind[*x as usize] = Some(t.clone());
                true
            }
            (PTerm::Fn(f, fa), PTerm::Fn(g, ga)) => f == g && fa.len() == ga.len() && fa.iter().zip(ga).all(|(x, y)| self.unify(x, y)),
        }
    }

    fn apply(&self, t: &PTerm) -> PTerm {
        match self.resolve(t) {
            PTerm::Var(v) => PTerm::Var(*v),
            PTerm::Fn(f, args) => PTerm::Fn(*f, args.iter().map(|a| self.apply(a)).collect()),
        }
    }

    fn apply_lit(&self, l: &PLit) -> PLit {
        PLit { pos: l.pos, pred: l.pred, args: l.args.iter().map(|a| self.apply(a)).collect() }
    }
}

fn match_term(pat: &PTerm, t: &PTerm, bind: &mut Vec<Option<PTerm>>) -> bool {
    match pat {
        PTerm::Var(v) => {
            let v = *v as usize;
            if v >= bind.len() {
                bind.resize(v + 1, None);
            }
            match &bind[v] {
                Some(b) => b == t,
                None => {
                    bind[v] = Some(t.clone());
                    true
                }
            }
        }
        PTerm::Fn(f, fa) => match t {
            PTerm::Fn(g, ga) => f == g && fa.len() == ga.len() && fa.iter().zip(ga).all(|(x, y)| match_term(x, y, bind)),
            PTerm::Var(_) => false,
        },
    }
}

/// One-way matching: does `c` subsume `d`?
fn subsumes(c: &[PLit], d: &[PLit]) -> bool {
    fn go(c: &[PLit], d: &[PLit], bind: &mut [Option<PTerm>]) -> bool {
        let Some((first, rest)) = c.split_first() else { return true };
        for lit in d {
            if lit.pos != first.pos || lit.pred != first.pred {
                continue;
            }
            let mut trial = bind.to_vec();
            if first.args.iter().zip(&lit.args).all(|(p, t)| match_term(p, t, &mut trial)) && go(rest, d, &mut trial) {
                return true;
            }
        }
        false
    }
    c.len() <= d.len() && go(c, d, &mut Vec::new())
}

/// Renumbers variables in order of first occurrence; returns the count.
fn normalize(lits: &mut [PLit]) -> u32 {
    fn walk(t: &mut PTerm, map: &mut HashMap<u32, u32>) {
        match t {
            PTerm::Var(v) => {
                let n = map.len() as u32;
                *v = *map.entry(*v).or_insert(n);
            }
            PTerm::Fn(_, args) => args.iter_mut().for_each(|a| walk(a, map)),
        }
    }
    let mut map = HashMap::default();
    for l in lits.iter_mut() {
        l.args.iter_mut().for_each(|a| walk(a, &mut map));
    }
    map.len() as u32
}

fn select_negative(lits: &[PLit]) -> Option<usize> {
    lits.iter()
        .enumerate()
        .filter(|(_, l)| !l.pos)
        .max_by_key(|(i, l)| {
            let mut vars = HashSet::default();
            fn collect(t: &PTerm, out: &mut HashSet<u32>) {
                match t {
                    PTerm::Var(v) => {
                        out.insert(*v);
                    }
                    PTerm::Fn(_, a) => a.iter().for_each(|x| collect(x, out)),
                }
            }
            l.args.iter().for_each(|a| collect(a, &mut vars));
            let ground_syms: usize = l.args.iter().map(|a| a.weight()).sum::<usize>() - vars.len();
            (Reverse(vars.len()), ground_syms, Reverse(*i))
        })
        .map(|(i, _)| i)
}

struct Saturation {
    interner: Interner,
    clauses: Vec<PClause>,
    passive: BinaryHeap<Reverse<(usize, usize, usize)>>,
    /// pred -> (clause, literal) for positive literals of active positive clauses
    pos_index: HashMap<u32, LastArgIndex<(usize, usize)>>,
    /// pred -> clause for active clauses whose selected literal has that predicate
    sel_index: HashMap<u32, LastArgIndex<usize>>,
    ground_units: HashSet<PLit>,
    /// Clauses other than ground units, keyed by their most specific literal.
    sub_index: HashMap<SubKey, Vec<usize>>,
    variants: HashSet<Vec<PLit>>,
    budget: Budget,
    generated: usize,
}

/// Entries bucketed by the top symbol of a literal's last argument.
struct LastArgIndex<T> {
    buckets: HashMap<Option<u32>, Vec<T>>,
}

impl<T> Default for LastArgIndex<T> {
    fn default() -> Self {
        LastArgIndex { buckets: HashMap::default() }
    }
}

impl<T: Copy> LastArgIndex<T> {
    fn insert(&mut self, lit: &PLit, v: T) {
        self.buckets.entry(lit.args.last().and_then(PTerm::top)).or_default().push(v);
    }

    /// Entries whose last argument may unify with that of `lit`.
    fn candidates(&self, lit: &PLit) -> Vec<T> {
        match lit.args.last().and_then(PTerm::top) {
            None => self.buckets.values().flatten().copied().collect(),
            Some(f) => {
                let mut out: Vec<T> = self.buckets.get(&Some(f)).cloned().unwrap_or_default();
                out.extend(self.buckets.get(&None).into_iter().flatten().copied());
                out
            }
        }
    }
}

enum Admit {
    Empty(usize),
    Kept,
    Dropped,
}

impl Saturation {
    fn convert_term(&mut self, t: &Term, vars: &mut HashMap<String, u32>) -> PTerm {
        match t {
            Term::Var(v) => {
                let n = vars.len() as u32;
                PTerm::Var(*vars.entry(v.clone()).or_insert(n))
            }
            Term::Const(c) => PTerm::Fn(self.interner.intern(c), Vec::new()),
            Term::App(f, args) => {
                let id = self.interner.intern(f);
                PTerm::Fn(id, args.iter().map(|a| self.convert_term(a, vars)).collect())
            }
        }
    }

    fn render_term(&self, t: &PTerm) -> String {
        match t {
            PTerm::Var(v) => format!("?V{v}"),
            PTerm::Fn(f, args) if args.is_empty() => self.interner.names[*f as usize].clone(),
            PTerm::Fn(f, args) => {
                let a: Vec<String> = args.iter().map(|x| self.render_term(x)).collect();
                format!("({} {})", self.interner.names[*f as usize], a.join(" "))
            }
        }
    }

    fn render(&self, c: &PClause) -> String {
        let lits: Vec<String> = c
            .lits
            .iter()
            .map(|l| {
                let mut s = format!("({}", self.interner.names[l.pred as usize]);
                for a in &l.args {
                    s.push(' ');
                    s.push_str(&self.render_term(a));
                }
                s.push(')');
                if l.pos {
                    s
                } else {
                    format!("(not {s})")
                }
            })
            .collect();
        format!("{{{}}}", lits.join(", "))
    }

    fn forward_subsumed(&self, lits: &[PLit]) -> bool {
        if lits.iter().any(|l| l.is_ground() && self.ground_units.contains(l)) {
            return true;
        }
        let mut seen = HashSet::default();
        for l in lits {
            for key in l.generalizing_keys() {
                if let Some(bucket) = self.sub_index.get(&key) {
                    for &cid in bucket {
                        if seen.insert(cid) && subsumes(&self.clauses[cid].lits, lits) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    fn admit(&mut self, mut lits: Vec<PLit>, origin: Origin) -> Admit {
        self.generated += 1;
        let mut seen = HashSet::default();
        lits.retain(|l| seen.insert(l.clone()));
        if lits.iter().any(|l| lits.iter().any(|m| m.pos != l.pos && m.pred == l.pred && m.args == l.args)) {
            return Admit::Dropped;
        }
        if lits.len() > self.budget.max_literals || lits.iter().any(|l| l.args.iter().any(|a| a.depth() > self.budget.max_term_depth)) {
            return Admit::Dropped;
        }
        let nvars = normalize(&mut lits);
        if !lits.is_empty() && (self.variants.contains(&lits) || self.forward_subsumed(&lits)) {
            return Admit::Dropped;
        }
        let id = self.clauses.len();
        let weight = lits.iter().map(|l| 1 + l.args.iter().map(|a| a.weight()).sum::<usize>()).sum();
        let selected = select_negative(&lits);
        self.variants.insert(lits.clone());
        if lits.len() == 1 && lits[0].is_ground() {
            self.ground_units.insert(lits[0].clone());
        } else {
            if let Some(key) = lits.iter().map(PLit::key).max_by_key(|k| (k.2.iter().filter(|t| t.is_some()).count(), Reverse(k.clone()))) {
                self.sub_index.entry(key).or_default().push(id);
            }
        }
        let empty = lits.is_empty();
        self.passive.push(Reverse((lits.len(), weight, id)));
        self.clauses.push(PClause { lits, nvars, origin, selected });
        if empty {
            Admit::Empty(id)
        } else {
            Admit::Kept
        }
    }

    fn resolve(&self, a: usize, ai: usize, b: usize, bi: usize) -> Option<Vec<PLit>> {
        let ca = &self.clauses[a];
        let cb = &self.clauses[b];
        if !ca.lits[ai].args.iter().zip(&cb.lits[bi].args).all(|(x, y)| x.may_unify(y)) {
            return None;
        }
        let shift = ca.nvars;
        let blits: Vec<PLit> = cb.lits.iter().map(|l| l.shift(shift)).collect();
        let mut s = Subst::new(ca.nvars + cb.nvars);
        let la = &ca.lits[ai];
        let lb = &blits[bi];
        if la.pred != lb.pred || la.args.len() != lb.args.len() {
            return None;
        }
        if !la.args.iter().zip(&lb.args).all(|(x, y)| s.unify(x, y)) {
            return None;
        }
        let mut out: Vec<PLit> = ca.lits.iter().enumerate().filter(|(i, _)| *i != ai).map(|(_, l)| s.apply_lit(l)).collect();
        out.extend(blits.iter().enumerate().filter(|(i, _)| *i != bi).map(|(_, l)| s.apply_lit(l)));
        Some(out)
    }

    fn factors(&self, c: usize) -> Vec<Vec<PLit>> {
        let cl = &self.clauses[c];
        let mut out = Vec::new();
        for i in 0..cl.lits.len() {
            for j in i + 1..cl.lits.len() {
                let (x, y) = (&cl.lits[i], &cl.lits[j]);
                if !x.pos || !y.pos || x.pred != y.pred {
                    continue;
                }
                let mut s = Subst::new(cl.nvars);
                if x.args.iter().zip(&y.args).all(|(p, q)| s.unify(p, q)) {
                    out.push(cl.lits.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, l)| s.apply_lit(l)).collect());
                }
            }
        }
        out
    }

    fn proof(&self, empty: usize) -> Vec<String> {
        let mut needed = Vec::new();
        let mut stack = vec![empty];
        let mut seen = HashSet::default();
        while let Some(c) = stack.pop() {
            if !seen.insert(c) {
                continue;
            }
            needed.push(c);
            match &self.clauses[c].origin {
                Origin::Input(_) => {}
                Origin::Resolve(a, b) => {
                    stack.push(*a);
                    stack.push(*b);
                }
                Origin::Factor(a) => stack.push(*a),
            }
        }
        needed.sort_unstable();
        needed
            .into_iter()
            .map(|c| {
                let cl = &self.clauses[c];
                let how = match &cl.origin {
                    Origin::Input(name) => format!("input {name}"),
                    Origin::Resolve(a, b) => format!("resolve {a},{b}"),
                    Origin::Factor(a) => format!("factor {a}"),
                };
                format!("{c}. {} [{how}]", self.render(cl))
            })
            .collect()
    }
}

/// Runs the given-clause loop until the empty clause is derived, the
/// passive set is exhausted, or the budget runs out.
pub fn saturate(input: &[Clause], budget: Budget) -> Verdict {
    let start = Instant::now();
    let deadline = Duration::from_secs_f64(budget.max_seconds.max(0.0));
    let mut st = Saturation {
        interner: Interner::default(),
        clauses: Vec::new(),
        passive: BinaryHeap::new(),
        pos_index: HashMap::default(),
        sel_index: HashMap::default(),
        ground_units: HashSet::default(),
        sub_index: HashMap::default(),
        variants: HashSet::default(),
        budget,
        generated: 0,
    };
    let finish = |st: &Saturation, status: VerdictStatus, proof: Vec<String>| Verdict {
        status,
        stats: Statistics { generated: st.generated, kept: st.clauses.len(), elapsed_ms: start.elapsed().as_millis() as u64 },
        proof,
        diagnostic: None,
    };

    for c in input {
        let mut vars = HashMap::default();
        let lits: Vec<PLit> = c
            .literals
            .iter()
            .map(|l| {
                let pred = st.interner.intern(&l.atom.pred);
                let args = l.atom.args.iter().map(|t| st.convert_term(t, &mut vars)).collect();
                PLit { pos: l.positive, pred, args }
            })
            .collect();
        if let Admit::Empty(id) = st.admit(lits, Origin::Input(c.origin.clone())) {
            let p = st.proof(id);
            return finish(&st, VerdictStatus::Proved, p);
        }
    }

    let mut steps = 0usize;
    while let Some(Reverse((_, _, given))) = st.passive.pop() {
        steps += 1;
        if st.clauses.len() > budget.max_clauses || (steps.is_multiple_of(64) && start.elapsed() > deadline) {
            return finish(&st, VerdictStatus::Timeout, Vec::new());
        }
        let mut new: Vec<(Vec<PLit>, Origin)> = Vec::new();
        match st.clauses[given].selected {
            Some(sel) => {
                let lit = st.clauses[given].lits[sel].clone();
                if let Some(index) = st.pos_index.get(&lit.pred) {
                    for (p, pi) in index.candidates(&lit) {
                        if let Some(r) = st.resolve(given, sel, p, pi) {
                            new.push((r, Origin::Resolve(given, p)));
                        }
                    }
                }
                st.sel_index.entry(lit.pred).or_default().insert(&lit, given);
            }
            None => {
                for f in st.factors(given) {
                    new.push((f, Origin::Factor(given)));
                }
                for li in 0..st.clauses[given].lits.len() {
                    let lit = st.clauses[given].lits[li].clone();
                    if let Some(index) = st.sel_index.get(&lit.pred) {
                        for n in index.candidates(&lit) {
                            let ni = st.clauses[n].selected.expect("indexed by selection");
                            if let Some(r) = st.resolve(n, ni, given, li) {
                                new.push((r, Origin::Resolve(n, given)));
                            }
                        }
                    }
                    st.pos_index.entry(lit.pred).or_default().insert(&lit, (given, li));
                }
            }
        }
        for (lits, origin) in new {
            if let Admit::Empty(id) = st.admit(lits, origin) {
                let p = st.proof(id);
                return finish(&st, VerdictStatus::Proved, p);
            }
        }
    }
    finish(&st, VerdictStatus::GaveUp, Vec::new())
}
