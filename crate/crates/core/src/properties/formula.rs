//! S-expression grammar shared by all property kinds.
//!
//! ```text
//! formula := true | false
//!          | (holds ATOM) | ATOM                 ATOM   := (pred obj ...) | (= var value)
//!          | (occurs ACTION)                      ACTION := (schema obj|* ...)
//!          | (used SET)
//!          | (not f) | (and f ...) | (or f ...) | (implies f f)
//!          | (next f) | (weak-next f) | (until f f) | (release f f)
//!          | (eventually f) | (always f)
//! ```
//!
//! A bare `ATOM` is shorthand for `(holds ATOM)`.

use std::fmt;

use crate::sexpr::{self, SExpr};

use super::PropertyError;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Holds(String),
    Occurs(String),
    Used(String),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    WeakNext(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Release(Box<Formula>, Box<Formula>),
    Eventually(Box<Formula>),
    Always(Box<Formula>),
}

const KEYWORDS: &[&str] = &[
    "holds", "occurs", "used", "not", "and", "or", "implies", "next", "weak-next", "until",
    "release", "eventually", "always",
];

impl Formula {
    pub fn parse(text: &str) -> Result<Formula, PropertyError> {
        let e = sexpr::read_one(text, false)
            .map_err(|e| PropertyError::Syntax(format!("at {}: expected {}", e.pos, e.expected)))?;
        from_sexpr(&e)
    }

    pub fn is_temporal(&self) -> bool {
        match self {
            Formula::Next(_)
            | Formula::WeakNext(_)
            | Formula::Until(..)
            | Formula::Release(..)
            | Formula::Eventually(_)
            | Formula::Always(_) => true,
            Formula::Not(f) => f.is_temporal(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().any(Formula::is_temporal),
            Formula::Implies(a, b) => a.is_temporal() || b.is_temporal(),
            _ => false,
        }
    }

    /// Visits every leaf (`Holds`, `Occurs`, `Used`).
    pub fn leaves<'a>(&'a self, visit: &mut impl FnMut(&'a Formula)) {
        match self {
            Formula::Holds(_) | Formula::Occurs(_) | Formula::Used(_) => visit(self),
            Formula::True | Formula::False => {}
            Formula::Not(f) | Formula::Next(f) | Formula::WeakNext(f) | Formula::Eventually(f) | Formula::Always(f) => {
                f.leaves(visit)
            }
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.leaves(visit)),
            Formula::Implies(a, b) | Formula::Until(a, b) | Formula::Release(a, b) => {
                a.leaves(visit);
                b.leaves(visit);
            }
        }
    }

    /// Replaces `$NAME` placeholders in leaf arguments.
    pub fn substitute(&self, lookup: &impl Fn(&str) -> Option<String>) -> Formula {
        let sub = |s: &str| substitute_tokens(s, lookup);
        let rec = |f: &Formula| Box::new(f.substitute(lookup));
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Holds(a) => Formula::Holds(sub(a)),
            Formula::Occurs(a) => Formula::Occurs(sub(a)),
            Formula::Used(a) => Formula::Used(sub(a)),
            Formula::Not(f) => Formula::Not(rec(f)),
            Formula::And(fs) => Formula::And(fs.iter().map(|f| f.substitute(lookup)).collect()),
            Formula::Or(fs) => Formula::Or(fs.iter().map(|f| f.substitute(lookup)).collect()),
            Formula::Implies(a, b) => Formula::Implies(rec(a), rec(b)),
            Formula::Next(f) => Formula::Next(rec(f)),
            Formula::WeakNext(f) => Formula::WeakNext(rec(f)),
            Formula::Until(a, b) => Formula::Until(rec(a), rec(b)),
            Formula::Release(a, b) => Formula::Release(rec(a), rec(b)),
            Formula::Eventually(f) => Formula::Eventually(rec(f)),
            Formula::Always(f) => Formula::Always(rec(f)),
        }
    }
}

/// Substitutes whole `$NAME` tokens inside a parenthesized name.
pub(crate) fn substitute_tokens(text: &str, lookup: &impl Fn(&str) -> Option<String>) -> String {
    let mut out = String::with_capacity(text.len());
    let mut token = String::new();
    let flush = |token: &mut String, out: &mut String| {
        if let Some(name) = token.strip_prefix('$') {
            match lookup(name) {
                Some(v) => out.push_str(&v),
                None => out.push_str(token),
            }
        } else {
            out.push_str(token);
        }
        token.clear();
    };
    for c in text.chars() {
        if c.is_whitespace() || c == '(' || c == ')' {
            flush(&mut token, &mut out);
            out.push(c);
        } else {
            token.push(c);
        }
    }
    flush(&mut token, &mut out);
    out
}

fn err(e: &SExpr, msg: &str) -> PropertyError {
    PropertyError::Syntax(format!("at {}: {msg}, found {e}", e.pos()))
}

fn name_list(e: &SExpr) -> Result<String, PropertyError> {
    let items = e.as_list().ok_or_else(|| err(e, "expected (name args...)"))?;
    if items.is_empty() || items.iter().any(|i| i.as_atom().is_none()) {
        return Err(err(e, "expected a flat (name args...) list"));
    }
    let parts: Vec<String> = items
        .iter()
        .map(|i| {
            let a = i.as_atom().expect("atom");
            if a.starts_with('$') {
                a.to_string()
            } else {
                a.to_ascii_lowercase()
            }
        })
        .collect();
    Ok(format!("({})", parts.join(" ")))
}

fn from_sexpr(e: &SExpr) -> Result<Formula, PropertyError> {
    if let Some(a) = e.as_atom() {
        return match a {
            "true" => Ok(Formula::True),
            "false" => Ok(Formula::False),
            _ => Err(err(e, "expected true, false or a list")),
        };
    }
    let items = e.as_list().expect("list");
    let Some(head) = items.first().and_then(SExpr::as_atom) else {
        return Err(err(e, "expected an operator"));
    };
    if !KEYWORDS.contains(&head) {
        return Ok(Formula::Holds(name_list(e)?));
    }
    let args = &items[1..];
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(err(e, &format!("{head} takes {n} argument(s)")))
        }
    };
    let one = |i: usize| from_sexpr(&args[i]).map(Box::new);
    Ok(match head {
        "holds" => {
            arity(1)?;
            Formula::Holds(name_list(&args[0])?)
        }
        "occurs" => {
            arity(1)?;
            Formula::Occurs(name_list(&args[0])?)
        }
        "used" => {
            arity(1)?;
            Formula::Used(args[0].as_atom().ok_or_else(|| err(e, "used takes a set name"))?.to_string())
        }
        "not" => {
            arity(1)?;
            Formula::Not(one(0)?)
        }
        "and" => Formula::And(args.iter().map(from_sexpr).collect::<Result<_, _>>()?),
        "or" => Formula::Or(args.iter().map(from_sexpr).collect::<Result<_, _>>()?),
        "implies" => {
            arity(2)?;
            Formula::Implies(one(0)?, one(1)?)
        }
        "next" => {
            arity(1)?;
            Formula::Next(one(0)?)
        }
        "weak-next" => {
            arity(1)?;
            Formula::WeakNext(one(0)?)
        }
        "until" => {
            arity(2)?;
            Formula::Until(one(0)?, one(1)?)
        }
        "release" => {
            arity(2)?;
            Formula::Release(one(0)?, one(1)?)
        }
        "eventually" => {
            arity(1)?;
            Formula::Eventually(one(0)?)
        }
        "always" => {
            arity(1)?;
            Formula::Always(one(0)?)
        }
        _ => unreachable!("keyword list"),
    })
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, op: &str, items: &[&Formula]| {
            write!(f, "({op}")?;
            for i in items {
                write!(f, " {i}")?;
            }
            f.write_str(")")
        };
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Holds(a) => write!(f, "(holds {a})"),
            Formula::Occurs(a) => write!(f, "(occurs {a})"),
            Formula::Used(a) => write!(f, "(used {a})"),
            Formula::Not(x) => list(f, "not", &[x]),
            Formula::And(xs) => list(f, "and", &xs.iter().collect::<Vec<_>>()),
            Formula::Or(xs) => list(f, "or", &xs.iter().collect::<Vec<_>>()),
            Formula::Implies(a, b) => list(f, "implies", &[a, b]),
            Formula::Next(x) => list(f, "next", &[x]),
            Formula::WeakNext(x) => list(f, "weak-next", &[x]),
            Formula::Until(a, b) => list(f, "until", &[a, b]),
            Formula::Release(a, b) => list(f, "release", &[a, b]),
            Formula::Eventually(x) => list(f, "eventually", &[x]),
            Formula::Always(x) => list(f, "always", &[x]),
        }
    }
}
