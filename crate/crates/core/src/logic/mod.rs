//! First-order logic kernel: formulas, clausification, a small saturation
//! prover and a finite model search used as an independent oracle.

pub mod cnf;
pub mod formula;
pub mod models;
pub mod prover;
pub mod sat;
pub mod tptp;

pub use cnf::{to_cnf, Clause, Literal, Skolemizer};
pub use formula::{Atom, Formula, Term};
pub use models::{enumerate_models, ModelResult, ModelSearch};
pub use prover::{saturate, Budget, Verdict, VerdictStatus};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LogicError {
    #[error("symbol `{symbol}` used with arity {found}, expected {expected}")]
    Arity { symbol: String, expected: usize, found: usize },
    #[error("formula is not closed: free variables {0:?}")]
    NotClosed(Vec<String>),
    #[error("clause normal form too large ({0} clauses)")]
    CnfBlowup(usize),
    #[error("tptp syntax error at line {line}: {message}")]
    Tptp { line: usize, message: String },
}

/// Prints a predicate name as it appears in the KIF surface syntax of the
/// first-order ontology (`$instance`, `$subclass`).
fn surface_pred(p: &str) -> String {
    match p {
        "instance" | "subclass" => format!("${p}"),
        _ => p.to_string(),
    }
}

/// Single-line KIF surface syntax.
pub fn kif_surface(f: &Formula) -> String {
    let mut out = String::new();
    write_flat(f, &mut out);
    out
}

fn write_atom(a: &Atom, out: &mut String) {
    out.push('(');
    out.push_str(&surface_pred(&a.pred));
    for t in &a.args {
        out.push(' ');
        out.push_str(&t.to_string());
    }
    out.push(')');
}

fn head(f: &Formula) -> (&'static str, Vec<&Formula>, Option<&[String]>) {
    match f {
        Formula::Atom(_) => unreachable!(),
        Formula::Not(g) => ("not", vec![g], None),
        Formula::And(gs) => ("and", gs.iter().collect(), None),
        Formula::Or(gs) => ("or", gs.iter().collect(), None),
        Formula::Implies(a, b) => ("=>", vec![a, b], None),
        Formula::Iff(a, b) => ("<=>", vec![a, b], None),
        Formula::Forall(vs, g) => ("forall", vec![g], Some(vs)),
        Formula::Exists(vs, g) => ("exists", vec![g], Some(vs)),
    }
}

fn var_list(vs: &[String]) -> String {
    let names: Vec<String> = vs.iter().map(|v| format!("?{v}")).collect();
    format!("({})", names.join(" "))
}

fn write_flat(f: &Formula, out: &mut String) {
    if let Formula::Atom(a) = f {
        write_atom(a, out);
        return;
    }
    let (h, kids, vars) = head(f);
    out.push('(');
    out.push_str(h);
    if let Some(vs) = vars {
        out.push(' ');
        out.push_str(&var_list(vs));
    }
    for k in kids {
        out.push(' ');
        write_flat(k, out);
    }
    out.push(')');
}

/// Multi-line KIF layout: one sub-formula per line, four-space indentation,
/// closing parenthesis of a compound on its own line.
pub fn kif_pretty(f: &Formula) -> String {
    let mut out = String::new();
    write_pretty(f, 0, &mut out);
    out
}

fn write_pretty(f: &Formula, depth: usize, out: &mut String) {
    let pad = "    ".repeat(depth);
    out.push_str(&pad);
    if let Formula::Atom(a) = f {
        write_atom(a, out);
        out.push('\n');
        return;
    }
    let (h, kids, vars) = head(f);
    out.push('(');
    out.push_str(h);
    if let Some(vs) = vars {
        out.push(' ');
        out.push_str(&var_list(vs));
    }
    out.push('\n');
    for k in kids {
        write_pretty(k, depth + 1, out);
    }
    out.push_str(&pad);
    out.push_str(")\n");
}
