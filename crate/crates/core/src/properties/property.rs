use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::formula::Formula;
use super::ltlf::{LtlAtom, Ltl, LtlfFormula};
use super::PropertyError;
use crate::pddl::{canonical_name, AtomResolution, GroundAtomTable};
use crate::task::{self, ActionId, Condition, Fact, OspTask, Plan};

/// Property identifier. Ordered numerically when both ids are integers,
/// so `2 < 10`; other ids sort after integers, lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PropId(pub String);

impl PropId {
    pub fn new(id: impl Into<String>) -> Self {
        PropId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Ord for PropId {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.0.parse::<u64>(), other.0.parse::<u64>()) {
            (Ok(a), Ok(b)) => a.cmp(&b).then_with(|| self.0.cmp(&other.0)),
            (Ok(_), Err(_)) => Ordering::Less,
            (Err(_), Ok(_)) => Ordering::Greater,
            (Err(_), Err(_)) => self.0.cmp(&other.0),
        }
    }
}

impl PartialOrd for PropId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PropId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PropId {
    fn from(s: &str) -> Self {
        PropId(s.to_string())
    }
}

impl From<u32> for PropId {
    fn from(n: u32) -> Self {
        PropId(n.to_string())
    }
}

/// Builds a sorted id set from anything convertible, e.g. `ids([5, 6])`.
pub fn ids<T: Into<PropId>>(items: impl IntoIterator<Item = T>) -> BTreeSet<PropId> {
    items.into_iter().map(Into::into).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PropertyKind {
    GoalFact,
    ActionSet,
    Ltlf,
}

/// Plan property document as stored and exchanged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanProperty {
    pub id: PropId,
    pub nl_text: String,
    pub kind: PropertyKind,
    /// S-expression text, see the formula grammar.
    pub formula: String,
    /// Named action sets: each entry is a ground action name or a pattern
    /// with `*` wildcards, e.g. `(load p0 red *)`.
    #[serde(default)]
    pub action_sets: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub utility: Option<u32>,
    #[serde(default)]
    pub global_hard: bool,
}

impl PlanProperty {
    pub fn goal_fact(id: impl Into<PropId>, nl_text: impl Into<String>, atom: impl Into<String>) -> Self {
        PlanProperty {
            id: id.into(),
            nl_text: nl_text.into(),
            kind: PropertyKind::GoalFact,
            formula: atom.into(),
            action_sets: BTreeMap::new(),
            utility: None,
            global_hard: false,
        }
    }

    pub fn ltlf(id: impl Into<PropId>, nl_text: impl Into<String>, formula: impl Into<String>) -> Self {
        PlanProperty { kind: PropertyKind::Ltlf, formula: formula.into(), ..Self::goal_fact(id, nl_text, "") }
    }

    pub fn action_set(
        id: impl Into<PropId>,
        nl_text: impl Into<String>,
        formula: impl Into<String>,
        sets: impl IntoIterator<Item = (String, Vec<String>)>,
    ) -> Self {
        PlanProperty {
            kind: PropertyKind::ActionSet,
            formula: formula.into(),
            action_sets: sets.into_iter().collect(),
            ..Self::goal_fact(id, nl_text, "")
        }
    }

    pub fn with_utility(mut self, utility: u32) -> Self {
        self.utility = Some(utility);
        self
    }

    pub fn globally_hard(mut self) -> Self {
        self.global_hard = true;
        self
    }

    pub fn parsed_formula(&self) -> Result<Formula, PropertyError> {
        Formula::parse(&self.formula).map_err(|e| match e {
            PropertyError::Syntax(m) => PropertyError::Syntax(format!("property {}: {m}", self.id)),
            other => other,
        })
    }
}

/// Name resolution for formula atoms and action references.
pub trait Vocabulary {
    fn resolve_atom(&self, name: &str) -> Option<AtomResolution>;
    fn resolve_actions(&self, pattern: &str) -> Option<Vec<ActionId>>;
}

impl Vocabulary for GroundAtomTable {
    fn resolve_atom(&self, name: &str) -> Option<AtomResolution> {
        GroundAtomTable::resolve_atom(self, name)
    }

    fn resolve_actions(&self, pattern: &str) -> Option<Vec<ActionId>> {
        GroundAtomTable::resolve_actions(self, pattern)
    }
}

/// Resolution directly against task names: `(= var value)` or the name of
/// a binary variable, and action names with `*` wildcards per token.
impl Vocabulary for OspTask {
    fn resolve_atom(&self, name: &str) -> Option<AtomResolution> {
        let key = canonical_name(name)?;
        let inner = &key[1..key.len() - 1];
        if let Some(rest) = inner.strip_prefix("= ") {
            let (var, value) = rest.rsplit_once(' ')?;
            let v = self.variables.iter().find(|v| v.name.eq_ignore_ascii_case(var))?;
            let d = v.domain.iter().position(|d| d.eq_ignore_ascii_case(value))?;
            return Some(AtomResolution::Fact(Fact::new(v.id, d)));
        }
        let v = self
            .variables
            .iter()
            .find(|v| canonical_name(&v.name).as_deref() == Some(&key) || v.name.eq_ignore_ascii_case(inner))?;
        let d = v.domain.iter().position(|d| d == "true")?;
        Some(AtomResolution::Fact(Fact::new(v.id, d)))
    }

    fn resolve_actions(&self, pattern: &str) -> Option<Vec<ActionId>> {
        let key = canonical_name(pattern)?;
        let tokens: Vec<&str> = key[1..key.len() - 1].split(' ').collect();
        let ids: Vec<ActionId> = self
            .actions
            .iter()
            .filter(|a| {
                canonical_name(&a.name).is_some_and(|n| {
                    let t: Vec<&str> = n[1..n.len() - 1].split(' ').collect();
                    t.len() == tokens.len() && t.iter().zip(&tokens).all(|(a, p)| *p == "*" || a == p)
                })
            })
            .map(|a| a.id)
            .collect();
        if ids.is_empty() {
            None
        } else {
            Some(ids)
        }
    }
}

/// Propositional formula over `used(A_i)` atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SetFormula {
    True,
    False,
    Used(usize),
    Not(Box<SetFormula>),
    And(Vec<SetFormula>),
    Or(Vec<SetFormula>),
}

impl SetFormula {
    pub fn eval(&self, used: &impl Fn(usize) -> bool) -> bool {
        match self {
            SetFormula::True => true,
            SetFormula::False => false,
            SetFormula::Used(i) => used(*i),
            SetFormula::Not(f) => !f.eval(used),
            SetFormula::And(fs) => fs.iter().all(|f| f.eval(used)),
            SetFormula::Or(fs) => fs.iter().any(|f| f.eval(used)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropertyBody {
    /// A single fact, or a constant for atoms grounding proved static.
    GoalFact(Condition),
    ActionSet { sets: Vec<BTreeSet<ActionId>>, formula: SetFormula },
    Ltlf(LtlfFormula),
}

/// A property with names resolved against one grounded task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedProperty {
    pub id: PropId,
    pub kind: PropertyKind,
    pub body: PropertyBody,
    pub global_hard: bool,
}

fn resolve_atom(vocab: &dyn Vocabulary, name: &str, id: &PropId) -> Result<Condition, PropertyError> {
    match vocab.resolve_atom(name) {
        Some(AtomResolution::Fact(f)) => Ok(Condition::Fact(f)),
        Some(AtomResolution::Constant(true)) => Ok(Condition::True),
        Some(AtomResolution::Constant(false)) => Ok(Condition::False),
        None => Err(PropertyError::UnknownAtom { property: id.clone(), atom: name.to_string() }),
    }
}

fn resolve_action_set(
    vocab: &dyn Vocabulary,
    entries: &[String],
    id: &PropId,
) -> Result<BTreeSet<ActionId>, PropertyError> {
    let mut out = BTreeSet::new();
    for entry in entries {
        let ids = vocab
            .resolve_actions(entry)
            .ok_or_else(|| PropertyError::UnknownAction { property: id.clone(), action: entry.clone() })?;
        out.extend(ids);
    }
    Ok(out)
}

impl ResolvedProperty {
    pub fn resolve(p: &PlanProperty, vocab: &dyn Vocabulary) -> Result<Self, PropertyError> {
        let formula = p.parsed_formula()?;
        let body = match p.kind {
            PropertyKind::GoalFact => match &formula {
                Formula::Holds(atom) => PropertyBody::GoalFact(resolve_atom(vocab, atom, &p.id)?),
                _ => {
                    return Err(PropertyError::KindMismatch {
                        property: p.id.clone(),
                        message: "GOAL_FACT formula must be a single atom".into(),
                    })
                }
            },
            PropertyKind::ActionSet => {
                if formula.is_temporal() {
                    return Err(PropertyError::KindMismatch {
                        property: p.id.clone(),
                        message: "ACTION_SET formula may not use temporal operators".into(),
                    });
                }
                let names: Vec<&String> = p.action_sets.keys().collect();
                let mut sets = Vec::new();
                for (name, entries) in &p.action_sets {
                    if entries.is_empty() {
                        return Err(PropertyError::KindMismatch {
                            property: p.id.clone(),
                            message: format!("action set {name} is empty"),
                        });
                    }
                    sets.push(resolve_action_set(vocab, entries, &p.id)?);
                }
                let formula = set_formula(&formula, &names, &p.id)?;
                PropertyBody::ActionSet { sets, formula }
            }
            PropertyKind::Ltlf => {
                let mut atoms = Vec::new();
                let root = ltl(&formula, vocab, &p.id, &mut atoms)?;
                PropertyBody::Ltlf(LtlfFormula { atoms, root })
            }
        };
        Ok(ResolvedProperty { id: p.id.clone(), kind: p.kind, body, global_hard: p.global_hard })
    }

    /// Direct semantics on the plan, independent of any compilation.
    pub fn evaluate_on_trace(&self, task: &OspTask, plan: &Plan) -> Result<bool, PropertyError> {
        let states = task::trace(task, &task.initial, &plan.steps).map_err(PropertyError::Task)?;
        Ok(match &self.body {
            PropertyBody::GoalFact(c) => c.holds(states.last().expect("nonempty")),
            PropertyBody::ActionSet { sets, formula } => {
                formula.eval(&|i| plan.steps.iter().any(|a| sets[i].contains(a)))
            }
            PropertyBody::Ltlf(f) => f.evaluate(&states, &plan.steps),
        })
    }
}

fn set_formula(f: &Formula, names: &[&String], id: &PropId) -> Result<SetFormula, PropertyError> {
    let rec = |g: &Formula| set_formula(g, names, id);
    Ok(match f {
        Formula::True => SetFormula::True,
        Formula::False => SetFormula::False,
        Formula::Used(name) => SetFormula::Used(
            names
                .iter()
                .position(|n| *n == name)
                .ok_or_else(|| PropertyError::KindMismatch {
                    property: id.clone(),
                    message: format!("undeclared action set {name}"),
                })?,
        ),
        Formula::Not(g) => SetFormula::Not(Box::new(rec(g)?)),
        Formula::And(gs) => SetFormula::And(gs.iter().map(rec).collect::<Result<_, _>>()?),
        Formula::Or(gs) => SetFormula::Or(gs.iter().map(rec).collect::<Result<_, _>>()?),
        Formula::Implies(a, b) => SetFormula::Or(vec![SetFormula::Not(Box::new(rec(a)?)), rec(b)?]),
        _ => {
            return Err(PropertyError::KindMismatch {
                property: id.clone(),
                message: format!("ACTION_SET formulas only combine used(...) atoms, found {f}"),
            })
        }
    })
}

fn ltl(f: &Formula, vocab: &dyn Vocabulary, id: &PropId, atoms: &mut Vec<LtlAtom>) -> Result<Ltl, PropertyError> {
    let intern = |atom: LtlAtom, atoms: &mut Vec<LtlAtom>| -> usize {
        match atoms.iter().position(|a| *a == atom) {
            Some(i) => i,
            None => {
                atoms.push(atom);
                atoms.len() - 1
            }
        }
    };
    let rec = |g: &Formula, atoms: &mut Vec<LtlAtom>| ltl(g, vocab, id, atoms).map(Box::new);
    Ok(match f {
        Formula::True => Ltl::True,
        Formula::False => Ltl::False,
        Formula::Holds(name) => match resolve_atom(vocab, name, id)? {
            Condition::Fact(fact) => Ltl::Atom(intern(LtlAtom::Fact(fact), atoms)),
            Condition::True => Ltl::True,
            _ => Ltl::False,
        },
        Formula::Occurs(pattern) => {
            let set = resolve_action_set(vocab, std::slice::from_ref(pattern), id)?;
            if set.is_empty() {
                Ltl::False
            } else {
                Ltl::Atom(intern(LtlAtom::Action(set), atoms))
            }
        }
        Formula::Used(_) => {
            return Err(PropertyError::KindMismatch {
                property: id.clone(),
                message: "used(...) belongs to ACTION_SET properties; use (eventually (occurs ...))".into(),
            })
        }
        Formula::Not(g) => Ltl::Not(rec(g, atoms)?),
        Formula::And(gs) => Ltl::And(gs.iter().map(|g| ltl(g, vocab, id, atoms)).collect::<Result<_, _>>()?),
        Formula::Or(gs) => Ltl::Or(gs.iter().map(|g| ltl(g, vocab, id, atoms)).collect::<Result<_, _>>()?),
        Formula::Implies(a, b) => {
            let a = rec(a, atoms)?;
            Ltl::Or(vec![Ltl::Not(a), *rec(b, atoms)?])
        }
        Formula::Next(g) => Ltl::Next(rec(g, atoms)?),
        Formula::WeakNext(g) => Ltl::WeakNext(rec(g, atoms)?),
        Formula::Until(a, b) => {
            let a = rec(a, atoms)?;
            Ltl::Until(a, rec(b, atoms)?)
        }
        Formula::Release(a, b) => {
            let a = rec(a, atoms)?;
            Ltl::Release(a, rec(b, atoms)?)
        }
        Formula::Eventually(g) => Ltl::Eventually(rec(g, atoms)?),
        Formula::Always(g) => Ltl::Always(rec(g, atoms)?),
    })
}

/// Convenience: resolve then evaluate.
pub fn evaluate_on_trace(
    property: &PlanProperty,
    vocab: &dyn Vocabulary,
    task: &OspTask,
    plan: &Plan,
) -> Result<bool, PropertyError> {
    ResolvedProperty::resolve(property, vocab)?.evaluate_on_trace(task, plan)
}
