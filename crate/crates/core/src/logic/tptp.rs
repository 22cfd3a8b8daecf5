//! TPTP first-order form reader and writer.
//!
//! Ontology symbols that are not valid TPTP lower words (e.g. `BodyPart`)
//! are written with an `s__` prefix, which the reader strips again.

use super::cnf::Clause;
use super::formula::{Atom, Formula, Term};
use super::LogicError;

const PREFIX: &str = "s__";

fn is_lower_word(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_lowercase()) && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect()
}

pub fn symbol(s: &str) -> String {
    if is_lower_word(s) && !s.starts_with(PREFIX) {
        s.to_string()
    } else {
        format!("{PREFIX}{}", sanitize(s))
    }
}

pub fn variable(v: &str) -> String {
    let mut cs = v.chars();
    if matches!(cs.next(), Some(c) if c.is_ascii_uppercase()) && cs.all(|c| c.is_ascii_alphanumeric() || c == '_') {
        v.to_string()
    } else {
        format!("V{}", sanitize(v))
    }
}

/// Statement names must be lower words.
pub fn label(s: &str) -> String {
    let s = sanitize(s);
    if is_lower_word(&s) {
        s
    } else {
        format!("a_{s}")
    }
}

fn term(t: &Term) -> String {
    match t {
        Term::Var(v) => variable(v),
        Term::Const(c) => symbol(c),
        Term::App(f, args) => {
            let a: Vec<String> = args.iter().map(term).collect();
            format!("{}({})", symbol(f), a.join(","))
        }
    }
}

fn atom(a: &Atom) -> String {
    if a.args.is_empty() {
        symbol(&a.pred)
    } else {
        let args: Vec<String> = a.args.iter().map(term).collect();
        format!("{}({})", symbol(&a.pred), args.join(","))
    }
}

pub fn formula(f: &Formula) -> String {
    match f {
        Formula::Atom(a) => atom(a),
        Formula::Not(g) => format!("~ {}", unit(g)),
        Formula::And(gs) if gs.is_empty() => "$true".into(),
        Formula::Or(gs) if gs.is_empty() => "$false".into(),
        Formula::And(gs) if gs.len() == 1 => formula(&gs[0]),
        Formula::Or(gs) if gs.len() == 1 => formula(&gs[0]),
        Formula::And(gs) => gs.iter().map(unit).collect::<Vec<_>>().join(" & "),
        Formula::Or(gs) => gs.iter().map(unit).collect::<Vec<_>>().join(" | "),
        Formula::Implies(a, b) => format!("{} => {}", unit(a), unit(b)),
        Formula::Iff(a, b) => format!("{} <=> {}", unit(a), unit(b)),
        Formula::Forall(vs, g) => format!("! [{}] : {}", vs.iter().map(|v| variable(v)).collect::<Vec<_>>().join(","), unit(g)),
        Formula::Exists(vs, g) => format!("? [{}] : {}", vs.iter().map(|v| variable(v)).collect::<Vec<_>>().join(","), unit(g)),
    }
}

fn unit(f: &Formula) -> String {
    match f {
        Formula::Atom(_) | Formula::Not(_) => formula(f),
        Formula::And(gs) | Formula::Or(gs) if gs.len() <= 1 => formula(f),
        _ => format!("({})", formula(f)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Axiom,
    Conjecture,
    NegatedConjecture,
}

impl Role {
    fn as_str(self) -> &'static str {
        match self {
            Role::Axiom => "axiom",
            Role::Conjecture => "conjecture",
            Role::NegatedConjecture => "negated_conjecture",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub name: String,
    pub role: Role,
    pub formula: Formula,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Problem {
    pub statements: Vec<Statement>,
}

impl Statement {
    pub fn to_tptp(&self) -> String {
        format!("fof({}, {}, {}).\n", label(&self.name), self.role.as_str(), formula(&self.formula))
    }
}

impl Problem {
    pub fn axioms(&self) -> impl Iterator<Item = &Statement> {
        self.statements.iter().filter(|s| s.role != Role::Conjecture)
    }

    pub fn conjecture(&self) -> Option<&Statement> {
        self.statements.iter().find(|s| s.role == Role::Conjecture)
    }

    pub fn to_tptp(&self) -> String {
        let mut out = String::new();
        for s in &self.statements {
            out.push_str(&s.to_tptp());
        }
        out
    }
}

pub fn clause(c: &Clause, name: &str) -> String {
    let lits: Vec<String> = c.literals.iter().map(|l| if l.positive { atom(&l.atom) } else { format!("~ {}", atom(&l.atom)) }).collect();
    let body = if lits.is_empty() { "$false".to_string() } else { lits.join(" | ") };
    format!("cnf({}, axiom, ({body})).", label(name))
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Punct(&'static str),
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, LogicError> {
    let mut out = Vec::new();
    for (lineno, line) in src.lines().enumerate() {
        let line_no = lineno + 1;
        let b = line.as_bytes();
        let mut i = 0;
        while i < b.len() {
            let c = b[i] as char;
            if c == '%' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c.is_ascii_alphanumeric() || c == '_' || c == '$' {
                let s = i;
                i += 1;
                while i < b.len() && ((b[i] as char).is_ascii_alphanumeric() || b[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Word(line[s..i].to_string()), line_no));
                continue;
            }
            const PUNCT: [&str; 13] = ["<=>", "=>", "<=", "~", "&", "|", "!", "?", ":", ",", "(", ")", "["];
            let rest = &line[i..];
            if let Some(p) = PUNCT.iter().chain(["]", "."].iter()).find(|p| rest.starts_with(**p)) {
                out.push((Tok::Punct(p), line_no));
                i += p.len();
                continue;
            }
            return Err(LogicError::Tptp { line: line_no, message: format!("unexpected character `{c}`") });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn line(&self) -> usize {
        self.toks.get(self.pos).or(self.toks.last()).map_or(0, |t| t.1)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, LogicError> {
        Err(LogicError::Tptp { line: self.line(), message: msg.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn punct(&mut self, p: &str) -> Result<(), LogicError> {
        match self.peek() {
            Some(Tok::Punct(q)) if *q == p => {
                self.pos += 1;
                Ok(())
            }
            other => self.err(format!("expected `{p}`, found {other:?}")),
        }
    }

    fn eat(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Punct(q)) if *q == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn word(&mut self) -> Result<String, LogicError> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            other => self.err(format!("expected a word, found {other:?}")),
        }
    }

    fn term(&mut self) -> Result<Term, LogicError> {
        let w = self.word()?;
        if w.starts_with(|c: char| c.is_ascii_uppercase()) {
            return Ok(Term::Var(w));
        }
        let name = w.strip_prefix(PREFIX).map(str::to_string).unwrap_or(w);
        if self.eat("(") {
            let mut args = vec![self.term()?];
            while self.eat(",") {
                args.push(self.term()?);
            }
            self.punct(")")?;
            Ok(Term::App(name, args))
        } else {
            Ok(Term::Const(name))
        }
    }

    fn unitary(&mut self) -> Result<Formula, LogicError> {
        if self.eat("~") {
            return Ok(Formula::not(self.unitary()?));
        }
        if matches!(self.peek(), Some(Tok::Punct("!")) | Some(Tok::Punct("?"))) {
            let universal = self.eat("!");
            if !universal {
                self.punct("?")?;
            }
            self.punct("[")?;
            let mut vars = vec![self.word()?];
            while self.eat(",") {
                vars.push(self.word()?);
            }
            self.punct("]")?;
            self.punct(":")?;
            let body = self.unitary()?;
            return Ok(if universal { Formula::Forall(vars, Box::new(body)) } else { Formula::Exists(vars, Box::new(body)) });
        }
        if self.eat("(") {
            let f = self.formula()?;
            self.punct(")")?;
            return Ok(f);
        }
        let w = self.word()?;
        match w.as_str() {
            "$true" => return Ok(Formula::And(vec![])),
            "$false" => return Ok(Formula::Or(vec![])),
            _ => {}
        }
        let pred = w.strip_prefix(PREFIX).map(str::to_string).unwrap_or(w);
        let mut args = Vec::new();
        if self.eat("(") {
            args.push(self.term()?);
            while self.eat(",") {
                args.push(self.term()?);
            }
            self.punct(")")?;
        }
        Ok(Formula::Atom(Atom { pred, args }))
    }

    fn formula(&mut self) -> Result<Formula, LogicError> {
        let first = self.unitary()?;
        match self.peek() {
            Some(Tok::Punct("&")) => {
                let mut parts = vec![first];
                while self.eat("&") {
                    parts.push(self.unitary()?);
                }
                Ok(Formula::And(parts))
            }
            Some(Tok::Punct("|")) => {
                let mut parts = vec![first];
                while self.eat("|") {
                    parts.push(self.unitary()?);
                }
                Ok(Formula::Or(parts))
            }
            Some(Tok::Punct("=>")) => {
                self.pos += 1;
                Ok(Formula::implies(first, self.unitary()?))
            }
            Some(Tok::Punct("<=")) => {
                self.pos += 1;
                Ok(Formula::implies(self.unitary()?, first))
            }
            Some(Tok::Punct("<=>")) => {
                self.pos += 1;
                Ok(Formula::iff(first, self.unitary()?))
            }
            _ => Ok(first),
        }
    }
}

/// Parses `fof` and `cnf` statements. `cnf` statements are universally
/// closed on read.
pub fn parse(src: &str) -> Result<Problem, LogicError> {
    let mut p = Parser { toks: tokenize(src)?, pos: 0 };
    let mut problem = Problem::default();
    while p.peek().is_some() {
        let kind = p.word()?;
        if kind != "fof" && kind != "cnf" {
            return p.err(format!("unsupported statement `{kind}`"));
        }
        p.punct("(")?;
        let name = p.word()?;
        p.punct(",")?;
        let role = match p.word()?.as_str() {
            "axiom" | "hypothesis" | "definition" | "lemma" | "theorem" => Role::Axiom,
            "conjecture" => Role::Conjecture,
            "negated_conjecture" => Role::NegatedConjecture,
            other => return p.err(format!("unsupported role `{other}`")),
        };
        p.punct(",")?;
        let mut formula = p.formula()?;
        if kind == "cnf" {
            formula = formula.close_universally();
        }
        p.punct(")")?;
        p.punct(".")?;
        problem.statements.push(Statement { name, role, formula });
    }
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_quantified_formula() {
        let f = Formula::exists(
            vec!["X".into()],
            Formula::And(vec![
                Formula::atom("instance", vec![Term::var("X"), Term::constant("BodyPart")]),
                Formula::atom("properPart", vec![Term::var("X"), Term::constant("h")]),
            ]),
        );
        assert_eq!(formula(&f), "? [X] : (instance(X,s__BodyPart) & properPart(X,h))");
    }

    #[test]
    fn round_trip_statement() {
        let src = "% comment\nfof(a1, axiom, ! [X] : (s__Heart(X) => ? [Y] : part(X,Y))).\nfof(c, conjecture, ~ p).\n";
        let prob = parse(src).unwrap();
        assert_eq!(prob.statements.len(), 2);
        let again = parse(&prob.to_tptp()).unwrap();
        assert_eq!(prob, again);
        assert_eq!(prob.conjecture().unwrap().formula, Formula::not(Formula::atom("p", vec![])));
    }

    #[test]
    fn reports_line_of_error() {
        let err = parse("fof(a, axiom, p).\nfof(b, axiom, p(.\n").unwrap_err();
        assert!(matches!(err, LogicError::Tptp { line: 2, .. }));
    }
}
