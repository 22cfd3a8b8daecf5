//! Small CDCL propositional solver backing the finite model search.

/// Literal encoding: `var << 1 | negated`.
pub type Lit = u32;

pub fn lit(var: u32, positive: bool) -> Lit {
    (var << 1) | u32::from(!positive)
}

fn var_of(l: Lit) -> usize {
    (l >> 1) as usize
}

fn neg(l: Lit) -> Lit {
    l ^ 1
}

const UNDEF: i8 = 0;
const TRUE: i8 = 1;
const FALSE: i8 = -1;

pub struct Solver {
    clauses: Vec<Vec<Lit>>,
    watches: Vec<Vec<usize>>,
    assign: Vec<i8>,
    level: Vec<usize>,
    reason: Vec<Option<usize>>,
    phase: Vec<bool>,
    activity: Vec<f64>,
    inc: f64,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    unsat: bool,
    pub conflicts: u64,
}

impl Solver {
    pub fn new(nvars: usize) -> Self {
        Solver {
            clauses: Vec::new(),
            watches: vec![Vec::new(); nvars * 2],
            assign: vec![UNDEF; nvars],
            level: vec![0; nvars],
            reason: vec![None; nvars],
            phase: vec![false; nvars],
            activity: vec![0.0; nvars],
            inc: 1.0,
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            unsat: false,
            conflicts: 0,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.assign.len()
    }

    fn value(&self, l: Lit) -> i8 {
        let v = self.assign[var_of(l)];
        if l & 1 == 1 {
            -v
        } else {
            v
        }
    }

    pub fn model_value(&self, var: u32) -> bool {
        self.assign[var as usize] == TRUE
    }

    fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    fn enqueue(&mut self, l: Lit, reason: Option<usize>) {
        let v = var_of(l);
        self.assign[v] = if l & 1 == 1 { FALSE } else { TRUE };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Adds a clause at decision level 0. Returns false once the clause set
    /// is known unsatisfiable.
    pub fn add_clause(&mut self, mut c: Vec<Lit>) -> bool {
        if self.unsat {
            return false;
        }
        c.sort_unstable();
        c.dedup();
        if c.windows(2).any(|w| w[0] == neg(w[1])) {
            return true;
        }
        c.retain(|&l| self.value(l) != FALSE);
        if c.iter().any(|&l| self.value(l) == TRUE) {
            return true;
        }
        match c.len() {
            0 => {
                self.unsat = true;
                false
            }
            1 => {
                self.enqueue(c[0], None);
                if self.propagate().is_some() {
                    self.unsat = true;
                }
                !self.unsat
            }
            _ => {
                let id = self.clauses.len();
                self.watches[neg(c[0]) as usize].push(id);
                self.watches[neg(c[1]) as usize].push(id);
                self.clauses.push(c);
                true
            }
        }
    }

    /// Returns the index of a conflicting clause, if any.
    fn propagate(&mut self) -> Option<usize> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = neg(p);
            let mut ws = std::mem::take(&mut self.watches[p as usize]);
            let mut i = 0;
            let mut conflict = None;
            while i < ws.len() {
                let cid = ws[i];
                let c = &mut self.clauses[cid];
                if c[0] == false_lit {
                    c.swap(0, 1);
                }
                let first = c[0];
                if self.value_of(first) == TRUE {
                    i += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..self.clauses[cid].len() {
                    let l = self.clauses[cid][k];
                    if self.value_of(l) != FALSE {
                        self.clauses[cid].swap(1, k);
                        self.watches[neg(l) as usize].push(cid);
                        ws.swap_remove(i);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                if self.value_of(first) == FALSE {
                    conflict = Some(cid);
                    break;
                }
                self.enqueue(first, Some(cid));
                i += 1;
            }
            let rest = std::mem::replace(&mut self.watches[p as usize], ws);
            self.watches[p as usize].extend(rest);
            if conflict.is_some() {
                self.qhead = self.trail.len();
                return conflict;
            }
        }
        None
    }

    fn value_of(&self, l: Lit) -> i8 {
        self.value(l)
    }

    fn bump(&mut self, v: usize) {
        self.activity[v] += self.inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.inc *= 1e-100;
        }
    }

    fn analyze(&mut self, mut confl: usize) -> (Vec<Lit>, usize) {
        let mut seen = vec![false; self.num_vars()];
        let mut learnt = vec![0];
        let mut counter = 0;
        let mut p: Option<Lit> = None;
        let mut idx = self.trail.len();
        loop {
            let clause = self.clauses[confl].clone();
            let start = usize::from(p.is_some());
            for &q in &clause[start..] {
                let v = var_of(q);
                if !seen[v] && self.level[v] > 0 {
                    seen[v] = true;
                    self.bump(v);
                    if self.level[v] >= self.decision_level() {
                        counter += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if seen[var_of(self.trail[idx])] {
                    break;
                }
            }
            let pl = self.trail[idx];
            seen[var_of(pl)] = false;
            counter -= 1;
            p = Some(pl);
            if counter == 0 {
                break;
            }
            confl = self.reason[var_of(pl)].expect("non-decision literal has a reason");
        }
        learnt[0] = neg(p.unwrap());
        let back = if learnt.len() == 1 {
            0
        } else {
            let (mi, _) = learnt.iter().enumerate().skip(1).max_by_key(|(_, &l)| self.level[var_of(l)]).unwrap();
            learnt.swap(1, mi);
            self.level[var_of(learnt[1])]
        };
        (learnt, back)
    }

    fn cancel_until(&mut self, lvl: usize) {
        if self.decision_level() > lvl {
            let lim = self.trail_lim[lvl];
            for &l in &self.trail[lim..] {
                let v = var_of(l);
                self.phase[v] = l & 1 == 0;
                self.assign[v] = UNDEF;
                self.reason[v] = None;
            }
            self.trail.truncate(lim);
            self.trail_lim.truncate(lvl);
            self.qhead = lim;
        }
    }

    fn pick(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for v in 0..self.num_vars() {
            if self.assign[v] == UNDEF && best.is_none_or(|b| self.activity[v] > self.activity[b]) {
                best = Some(v);
            }
        }
        best
    }

    /// `Some(true)` satisfiable, `Some(false)` unsatisfiable, `None` when the
    /// conflict limit is reached.
    pub fn solve(&mut self, max_conflicts: u64) -> Option<bool> {
        if self.unsat {
            return Some(false);
        }
        if self.propagate().is_some() {
            self.unsat = true;
            return Some(false);
        }
        loop {
            if let Some(confl) = self.propagate() {
                self.conflicts += 1;
                if self.decision_level() == 0 {
                    self.unsat = true;
                    return Some(false);
                }
                if self.conflicts > max_conflicts {
                    self.cancel_until(0);
                    return None;
                }
                let (learnt, back) = self.analyze(confl);
                self.cancel_until(back);
                self.inc *= 1.05;
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let id = self.clauses.len();
                    self.watches[neg(learnt[0]) as usize].push(id);
                    self.watches[neg(learnt[1]) as usize].push(id);
                    let first = learnt[0];
                    self.clauses.push(learnt);
                    self.enqueue(first, Some(id));
                }
            } else {
                match self.pick() {
                    None => return Some(true),
                    Some(v) => {
                        self.trail_lim.push(self.trail.len());
                        let l = lit(v as u32, self.phase[v]);
                        self.enqueue(l, None);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(n: usize, cls: &[Vec<Lit>]) -> bool {
        (0..1u32 << n).any(|m| cls.iter().all(|c| c.iter().any(|&l| ((m >> var_of(l)) & 1 == 1) == (l & 1 == 0))))
    }

    #[test]
    fn agrees_with_truth_table_on_random_3cnf() {
        use proptest::prelude::*;
        use proptest::test_runner::TestRunner;
        let mut runner = TestRunner::deterministic();
        let strat = proptest::collection::vec(proptest::collection::vec((0u32..8, any::<bool>()), 1..4), 0..40);
        runner
            .run(&strat, |raw| {
                let cls: Vec<Vec<Lit>> = raw.iter().map(|c| c.iter().map(|&(v, p)| lit(v, p)).collect()).collect();
                let mut s = Solver::new(8);
                for c in &cls {
                    s.add_clause(c.clone());
                }
                let res = s.solve(u64::MAX).unwrap();
                prop_assert_eq!(res, brute(8, &cls));
                if res {
                    for c in &cls {
                        prop_assert!(c.iter().any(|&l| s.model_value(l >> 1) == (l & 1 == 0)));
                    }
                }
                Ok(())
            })
            .unwrap();
    }

    #[test]
    fn empty_clause_is_unsat() {
        let mut s = Solver::new(1);
        assert!(!s.add_clause(vec![]));
        assert_eq!(s.solve(10), Some(false));
    }
}
