use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

/// Name plus declared type (`object` when untyped).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypedName {
    pub name: String,
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeDecl {
    pub name: String,
    pub parent: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateDecl {
    pub name: String,
    pub params: Vec<TypedName>,
}

/// `(pred ?x c ...)`; arguments are either `?variables` or constants.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AtomPattern {
    pub predicate: String,
    pub args: Vec<String>,
}

impl fmt::Display for AtomPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Literal {
    pub positive: bool,
    pub atom: AtomPattern,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostExpr {
    Constant(u64),
    Function(AtomPattern),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<TypedName>,
    pub precondition: Vec<Literal>,
    pub add: Vec<AtomPattern>,
    pub delete: Vec<AtomPattern>,
    pub cost: Vec<CostExpr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedDomain {
    pub name: String,
    pub requirements: Vec<String>,
    pub types: Vec<TypeDecl>,
    pub constants: Vec<TypedName>,
    pub predicates: Vec<PredicateDecl>,
    /// Numeric function declarations, only used for `total-cost` style costs.
    pub functions: Vec<PredicateDecl>,
    pub actions: Vec<ActionSchema>,
}

impl ParsedDomain {
    pub fn uses_action_costs(&self) -> bool {
        self.requirements.iter().any(|r| r == ":action-costs")
    }

    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn schema(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    /// Whether `ty` equals `ancestor` or descends from it.
    pub fn is_subtype(&self, ty: &str, ancestor: &str) -> bool {
        let mut current = ty.to_string();
        for _ in 0..=self.types.len() {
            if current == ancestor || ancestor == "object" {
                return true;
            }
            match self.types.iter().find(|t| t.name == current) {
                Some(t) if t.parent != current => current = t.parent.clone(),
                _ => return false,
            }
        }
        false
    }

    pub fn has_type(&self, ty: &str) -> bool {
        ty == "object" || self.types.iter().any(|t| t.name == ty)
    }

    /// Canonical PDDL text for this domain.
    pub fn unparse(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "(define (domain {})", self.name);
        if !self.requirements.is_empty() {
            let _ = writeln!(out, "  (:requirements {})", self.requirements.join(" "));
        }
        if !self.types.is_empty() {
            let types: Vec<_> = self
                .types
                .iter()
                .map(|t| TypedName { name: t.name.clone(), ty: t.parent.clone() })
                .collect();
            let _ = writeln!(out, "  (:types {})", typed_list(&types));
        }
        if !self.constants.is_empty() {
            let _ = writeln!(out, "  (:constants {})", typed_list(&self.constants));
        }
        out.push_str("  (:predicates");
        for p in &self.predicates {
            let _ = write!(out, " ({}", p.name);
            if !p.params.is_empty() {
                let _ = write!(out, " {}", typed_list(&p.params));
            }
            out.push(')');
        }
        out.push_str(")\n");
        if !self.functions.is_empty() {
            out.push_str("  (:functions");
            for p in &self.functions {
                let _ = write!(out, " ({}", p.name);
                if !p.params.is_empty() {
                    let _ = write!(out, " {}", typed_list(&p.params));
                }
                out.push_str(") - number");
            }
            out.push_str(")\n");
        }
        for a in &self.actions {
            let _ = writeln!(out, "  (:action {}", a.name);
            let _ = writeln!(out, "    :parameters ({})", typed_list(&a.params));
            out.push_str("    :precondition (and");
            for l in &a.precondition {
                if l.positive {
                    let _ = write!(out, " {}", l.atom);
                } else {
                    let _ = write!(out, " (not {})", l.atom);
                }
            }
            out.push_str(")\n    :effect (and");
            for atom in &a.add {
                let _ = write!(out, " {atom}");
            }
            for atom in &a.delete {
                let _ = write!(out, " (not {atom})");
            }
            for c in &a.cost {
                match c {
                    CostExpr::Constant(n) => {
                        let _ = write!(out, " (increase (total-cost) {n})");
                    }
                    CostExpr::Function(f) => {
                        let _ = write!(out, " (increase (total-cost) {f})");
                    }
                }
            }
            out.push_str("))\n");
        }
        out.push_str(")\n");
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NumericFact {
    pub function: AtomPattern,
    pub value: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedProblem {
    pub name: String,
    pub domain: String,
    pub objects: Vec<TypedName>,
    pub init: Vec<AtomPattern>,
    pub numeric_init: Vec<NumericFact>,
    /// Warnings such as an ignored `:goal` section.
    pub diagnostics: Vec<String>,
}

impl ParsedProblem {
    pub fn unparse(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "(define (problem {})", self.name);
        let _ = writeln!(out, "  (:domain {})", self.domain);
        let _ = writeln!(out, "  (:objects {})", typed_list(&self.objects));
        out.push_str("  (:init");
        for a in &self.init {
            let _ = write!(out, "\n    {a}");
        }
        for n in &self.numeric_init {
            let _ = write!(out, "\n    (= {} {})", n.function, n.value);
        }
        out.push_str(")\n)\n");
        out
    }
}

fn typed_list(items: &[TypedName]) -> String {
    items
        .iter()
        .map(|t| format!("{} - {}", t.name, t.ty))
        .collect::<Vec<_>>()
        .join(" ")
}
