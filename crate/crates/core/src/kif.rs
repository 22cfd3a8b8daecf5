//! S-expression reader for the SUO-KIF subset used by the ontology and the
//! patch scripts.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KifError {
    #[error("{pos}: unbalanced parentheses")]
    Unbalanced { pos: Pos },
    #[error("{pos}: unterminated string")]
    UnterminatedString { pos: Pos },
    #[error("{pos}: unknown head `{head}`")]
    UnknownHead { pos: Pos, head: String },
    #[error("{pos}: `{symbol}` expects {expected} arguments, found {found}")]
    Arity { pos: Pos, symbol: String, expected: usize, found: usize },
    #[error("{pos}: unsupported construct: {what}")]
    Unsupported { pos: Pos, what: String },
    #[error("{pos}: {message}")]
    Malformed { pos: Pos, message: String },
}

#[derive(Debug, Clone)]
pub enum SExpr {
    Atom(String, Pos),
    List(Vec<SExpr>, Pos),
}

impl PartialEq for SExpr {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (SExpr::Atom(a, _), SExpr::Atom(b, _)) => a == b,
            (SExpr::List(a, _), SExpr::List(b, _)) => a == b,
            _ => false,
        }
    }
}

impl Eq for SExpr {}

impl SExpr {
    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Atom(_, p) | SExpr::List(_, p) => *p,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom(a, _) => Some(a),
            SExpr::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(items, _) => Some(items),
            SExpr::Atom(..) => None,
        }
    }

    /// Head symbol of a list, if it is an atom.
    pub fn head(&self) -> Option<&str> {
        self.as_list().and_then(|l| l.first()).and_then(SExpr::as_atom)
    }

    pub fn atom(s: impl Into<String>) -> Self {
        SExpr::Atom(s.into(), Pos::default())
    }

    pub fn list(items: Vec<SExpr>) -> Self {
        SExpr::List(items, Pos::default())
    }
}

/// Canonical single-line rendering; used for content hashing.
impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExpr::Atom(a, _) => write!(f, "{a}"),
            SExpr::List(items, _) => {
                write!(f, "(")?;
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{it}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A top-level expression with the label given by a preceding `;@id name`
/// comment, if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labeled {
    pub label: Option<String>,
    pub expr: SExpr,
}

pub fn parse(src: &str) -> Result<Vec<Labeled>, KifError> {
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<SExpr>, Pos)> = Vec::new();
    let mut pending_label: Option<String> = None;
    let mut label_for_current: Option<String> = None;
    for (ln, line) in src.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let pos = Pos { line: ln + 1, col: i + 1 };
            let c = chars[i];
            match c {
                ';' => {
                    let rest: String = chars[i + 1..].iter().collect();
                    if let Some(id) = rest.trim_start().strip_prefix("@id") {
                        pending_label = id.split_whitespace().next().map(str::to_string);
                    }
                    break;
                }
                '(' => {
                    if stack.is_empty() {
                        label_for_current = pending_label.take();
                    }
                    stack.push((Vec::new(), pos));
                    i += 1;
                }
                ')' => {
                    let (items, start) = stack.pop().ok_or(KifError::Unbalanced { pos })?;
                    let e = SExpr::List(items, start);
                    match stack.last_mut() {
                        Some((parent, _)) => parent.push(e),
                        None => out.push(Labeled { label: label_for_current.take(), expr: e }),
                    }
                    i += 1;
                }
                '"' => {
                    let mut j = i + 1;
                    while j < chars.len() && chars[j] != '"' {
                        j += 1;
                    }
                    if j >= chars.len() {
                        return Err(KifError::UnterminatedString { pos });
                    }
                    let s: String = chars[i..=j].iter().collect();
                    push_atom(&mut stack, &mut out, s, pos)?;
                    i = j + 1;
                }
                c if c.is_whitespace() => i += 1,
                _ => {
                    let mut j = i;
                    while j < chars.len() && !chars[j].is_whitespace() && !"();\"".contains(chars[j]) {
                        j += 1;
                    }
                    let s: String = chars[i..j].iter().collect();
                    push_atom(&mut stack, &mut out, s, pos)?;
                    i = j;
                }
            }
        }
    }
    if let Some((_, pos)) = stack.pop() {
        return Err(KifError::Unbalanced { pos });
    }
    Ok(out)
}

fn push_atom(stack: &mut [(Vec<SExpr>, Pos)], _out: &mut [Labeled], s: String, pos: Pos) -> Result<(), KifError> {
    match stack.last_mut() {
        Some((items, _)) => {
            items.push(SExpr::Atom(s, pos));
            Ok(())
        }
        None => Err(KifError::Malformed { pos, message: format!("bare atom `{s}` at top level") }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nested_lists_with_labels() {
        let src = ";@id heart-organ\n(subclass Heart Organ)\n; plain comment\n(documentation Heart EnglishLanguage \"a (pump)\")";
        let es = parse(src).unwrap();
        assert_eq!(es.len(), 2);
        assert_eq!(es[0].label.as_deref(), Some("heart-organ"));
        assert_eq!(es[0].expr.to_string(), "(subclass Heart Organ)");
        assert_eq!(es[1].label, None);
        assert_eq!(es[1].expr.as_list().unwrap().len(), 4);
    }

    #[test]
    fn unbalanced_reports_position() {
        assert!(matches!(parse("(a (b c)"), Err(KifError::Unbalanced { pos: Pos { line: 1, col: 1 } })));
        assert!(matches!(parse("(a))"), Err(KifError::Unbalanced { .. })));
    }
}
