//! Finite-domain oversubscription planning tasks and plan semantics.
//!
//! A task is a set of finite-domain variables, a set of actions with integer
//! costs, a total initial state, disjoint hard and soft goals, and a cost
//! bound. Plans are action sequences that are iteratively applicable, stay
//! within the bound, and reach the hard goal.

mod condition;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use condition::Condition;

pub type VarId = usize;
pub type ActionId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("action {action} is not applicable at step {step}")]
    NotApplicable { step: usize, action: ActionId },
    #[error("unknown action id {0}")]
    UnknownAction(ActionId),
    #[error("invalid task: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub domain: Vec<String>,
    pub id: VarId,
    pub name: String,
}

impl Variable {
    /// Two-valued variable with domain `["false", "true"]`, used for ground atoms.
    pub fn binary(id: VarId, name: impl Into<String>) -> Self {
        Variable {
            id,
            name: name.into(),
            domain: vec!["false".into(), "true".into()],
        }
    }

    pub fn size(&self) -> usize {
        self.domain.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fact {
    pub value: usize,
    pub var: VarId,
}

impl Fact {
    pub fn new(var: VarId, value: usize) -> Self {
        Fact { var, value }
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}={}", self.var, self.value)
    }
}

/// A set of facts with at most one value per variable.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct PartialAssignment(BTreeMap<VarId, usize>);

impl PartialAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds an assignment, rejecting two different values for one variable.
    pub fn from_facts(facts: impl IntoIterator<Item = Fact>) -> Result<Self, TaskError> {
        let mut map = BTreeMap::new();
        for fact in facts {
            if let Some(prev) = map.insert(fact.var, fact.value) {
                if prev != fact.value {
                    return Err(TaskError::Invalid(format!(
                        "variable {} assigned both {} and {}",
                        fact.var, prev, fact.value
                    )));
                }
            }
        }
        Ok(PartialAssignment(map))
    }

    pub fn insert(&mut self, fact: Fact) -> Option<usize> {
        self.0.insert(fact.var, fact.value)
    }

    pub fn get(&self, var: VarId) -> Option<usize> {
        self.0.get(&var).copied()
    }

    pub fn contains(&self, fact: Fact) -> bool {
        self.get(fact.var) == Some(fact.value)
    }

    pub fn defines(&self, var: VarId) -> bool {
        self.0.contains_key(&var)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn facts(&self) -> impl Iterator<Item = Fact> + '_ {
        self.0.iter().map(|(&var, &value)| Fact { var, value })
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.0.keys().copied()
    }

    pub fn holds_in(&self, state: &State) -> bool {
        self.0.iter().all(|(&var, &value)| state.get(var) == value)
    }
}

impl FromIterator<Fact> for PartialAssignment {
    /// Later facts override earlier ones on the same variable.
    fn from_iter<T: IntoIterator<Item = Fact>>(iter: T) -> Self {
        PartialAssignment(iter.into_iter().map(|f| (f.var, f.value)).collect())
    }
}

impl Serialize for PartialAssignment {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.facts())
    }
}

impl<'de> Deserialize<'de> for PartialAssignment {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let facts = Vec::<Fact>::deserialize(deserializer)?;
        PartialAssignment::from_facts(facts).map_err(serde::de::Error::custom)
    }
}

/// A complete assignment: one value index per variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State(Vec<usize>);

impl State {
    pub fn new(values: Vec<usize>) -> Self {
        State(values)
    }

    pub fn get(&self, var: VarId) -> usize {
        self.0[var]
    }

    pub fn set(&mut self, var: VarId, value: usize) {
        self.0[var] = value;
    }

    pub fn holds(&self, fact: Fact) -> bool {
        self.0.get(fact.var) == Some(&fact.value)
    }

    pub fn values(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionalEffect {
    pub condition: PartialAssignment,
    pub effect: PartialAssignment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conditional_effects: Vec<ConditionalEffect>,
    pub cost: u64,
    pub effect: PartialAssignment,
    pub id: ActionId,
    pub name: String,
    pub precondition: PartialAssignment,
}

impl Action {
    pub fn new(
        id: ActionId,
        name: impl Into<String>,
        precondition: PartialAssignment,
        effect: PartialAssignment,
        cost: u64,
    ) -> Self {
        Action {
            id,
            name: name.into(),
            precondition,
            effect,
            conditional_effects: Vec::new(),
            cost,
        }
    }

    pub fn is_applicable(&self, state: &State) -> bool {
        self.precondition.holds_in(state)
    }

    /// Variables this action may write, including through conditional effects.
    pub fn affected_vars(&self) -> BTreeSet<VarId> {
        let mut vars: BTreeSet<VarId> = self.effect.vars().collect();
        for ce in &self.conditional_effects {
            vars.extend(ce.effect.vars());
        }
        vars
    }
}

/// Cost bound of a task. `Infinite` means every applicable sequence is in budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Bound {
    Finite(u64),
    #[default]
    Infinite,
}

impl Bound {
    pub fn admits(self, cost: u64) -> bool {
        match self {
            Bound::Finite(b) => cost <= b,
            Bound::Infinite => true,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Finite(b) => write!(f, "{b}"),
            Bound::Infinite => f.write_str("infinity"),
        }
    }
}

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Bound::Finite(b) => serializer.serialize_u64(*b),
            Bound::Infinite => serializer.serialize_str("infinity"),
        }
    }
}

impl<'de> Deserialize<'de> for Bound {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(b) => Ok(Bound::Finite(b)),
            Raw::Text(s) if s == "infinity" => Ok(Bound::Infinite),
            Raw::Text(s) => Err(serde::de::Error::custom(format!("invalid bound {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OspTask {
    pub actions: Vec<Action>,
    pub bound: Bound,
    pub hard_goal: PartialAssignment,
    pub initial: State,
    pub soft_goal: PartialAssignment,
    pub variables: Vec<Variable>,
}

impl OspTask {
    /// Checks the structural invariants: dense ids, facts within domains,
    /// total initial state, and disjoint goal variables.
    pub fn validate(&self) -> Result<(), TaskError> {
        for (i, v) in self.variables.iter().enumerate() {
            if v.id != i {
                return Err(TaskError::Invalid(format!("variable ids not dense at {i}")));
            }
            if v.domain.is_empty() {
                return Err(TaskError::Invalid(format!("variable {} has empty domain", v.name)));
            }
            let unique: BTreeSet<&String> = v.domain.iter().collect();
            if unique.len() != v.domain.len() {
                return Err(TaskError::Invalid(format!("variable {} repeats a value", v.name)));
            }
        }
        if self.initial.len() != self.variables.len() {
            return Err(TaskError::Invalid("initial state is not total".into()));
        }
        for (var, &value) in self.initial.values().iter().enumerate() {
            self.check_fact(Fact::new(var, value))?;
        }
        for (i, a) in self.actions.iter().enumerate() {
            if a.id != i {
                return Err(TaskError::Invalid(format!("action ids not dense at {i}")));
            }
            let mut parts = vec![&a.precondition, &a.effect];
            for ce in &a.conditional_effects {
                parts.push(&ce.condition);
                parts.push(&ce.effect);
            }
            for part in parts {
                for fact in part.facts() {
                    self.check_fact(fact)?;
                }
            }
        }
        for fact in self.hard_goal.facts().chain(self.soft_goal.facts()) {
            self.check_fact(fact)?;
        }
        if self.hard_goal.vars().any(|v| self.soft_goal.defines(v)) {
            return Err(TaskError::Invalid(
                "hard and soft goal share a variable".into(),
            ));
        }
        Ok(())
    }

    fn check_fact(&self, fact: Fact) -> Result<(), TaskError> {
        match self.variables.get(fact.var) {
            Some(v) if fact.value < v.size() => Ok(()),
            Some(v) => Err(TaskError::Invalid(format!(
                "value {} out of range for {}",
                fact.value, v.name
            ))),
            None => Err(TaskError::Invalid(format!("unknown variable {}", fact.var))),
        }
    }

    pub fn action(&self, id: ActionId) -> Result<&Action, TaskError> {
        self.actions.get(id).ok_or(TaskError::UnknownAction(id))
    }

    pub fn variable_by_name(&self, name: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn action_by_name(&self, name: &str) -> Option<&Action> {
        self.actions.iter().find(|a| a.name == name)
    }

    /// Sum of step costs; errors on unknown ids.
    pub fn cost_of(&self, steps: &[ActionId]) -> Result<u64, TaskError> {
        steps
            .iter()
            .map(|&id| self.action(id).map(|a| a.cost))
            .sum()
    }

    /// Canonical JSON: sorted keys, dense ids.
    pub fn to_canonical_json(&self) -> String {
        canonical_json(self)
    }
}

/// Serializes through `serde_json::Value`, whose object map keeps keys sorted.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serializable value");
    serde_json::to_string(&v).expect("json value")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub cost: u64,
    pub steps: Vec<ActionId>,
}

impl Plan {
    pub fn new(task: &OspTask, steps: Vec<ActionId>) -> Result<Self, TaskError> {
        let cost = task.cost_of(&steps)?;
        Ok(Plan { steps, cost })
    }

    pub fn empty() -> Self {
        Plan { steps: Vec::new(), cost: 0 }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn action_names<'a>(&'a self, task: &'a OspTask) -> impl Iterator<Item = &'a str> + 'a {
        self.steps.iter().map(move |&id| task.actions[id].name.as_str())
    }
}

/// Applies `action` to `state`. Conditional effects are triggered by their
/// condition in the state before the action.
pub fn apply_action(state: &State, action: &Action) -> Result<State, TaskError> {
    if !action.is_applicable(state) {
        return Err(TaskError::NotApplicable { step: 0, action: action.id });
    }
    Ok(apply_unchecked(state, action))
}

pub(crate) fn apply_unchecked(state: &State, action: &Action) -> State {
    let mut next = state.clone();
    for fact in action.effect.facts() {
        next.set(fact.var, fact.value);
    }
    for ce in &action.conditional_effects {
        if ce.condition.holds_in(state) {
            for fact in ce.effect.facts() {
                next.set(fact.var, fact.value);
            }
        }
    }
    next
}

pub fn apply_sequence(task: &OspTask, state: &State, steps: &[ActionId]) -> Result<State, TaskError> {
    trace(task, state, steps).map(|mut t| t.pop().expect("trace is never empty"))
}

/// States s0..sn visited by `steps`, starting at `state`.
pub fn trace(task: &OspTask, state: &State, steps: &[ActionId]) -> Result<Vec<State>, TaskError> {
    let mut states = Vec::with_capacity(steps.len() + 1);
    states.push(state.clone());
    for (step, &id) in steps.iter().enumerate() {
        let action = task.action(id)?;
        let current = states.last().expect("nonempty");
        if !action.is_applicable(current) {
            return Err(TaskError::NotApplicable { step, action: id });
        }
        let next = apply_unchecked(current, action);
        states.push(next);
    }
    Ok(states)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Violation {
    NotApplicable { step: usize, action: ActionId },
    UnknownAction { step: usize, action: ActionId },
    CostExceeded { cost: u64, bound: Bound },
    HardGoalUnsatisfied { missing: Vec<Fact> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub cost: u64,
    pub satisfied_soft_facts: BTreeSet<Fact>,
    pub valid: bool,
    pub violated_reason: Option<Violation>,
}

pub fn validate_plan(task: &OspTask, plan: &Plan) -> ValidationReport {
    let mut cost = 0u64;
    let mut state = task.initial.clone();
    for (step, &id) in plan.steps.iter().enumerate() {
        let Some(action) = task.actions.get(id) else {
            return failed(cost, Violation::UnknownAction { step, action: id });
        };
        if !action.is_applicable(&state) {
            return failed(cost, Violation::NotApplicable { step, action: id });
        }
        state = apply_unchecked(&state, action);
        cost += action.cost;
    }
    let satisfied_soft_facts = task.soft_goal.facts().filter(|&f| state.holds(f)).collect();
    let missing: Vec<Fact> = task.hard_goal.facts().filter(|&f| !state.holds(f)).collect();
    let violated_reason = if !task.bound.admits(cost) {
        Some(Violation::CostExceeded { cost, bound: task.bound })
    } else if !missing.is_empty() {
        Some(Violation::HardGoalUnsatisfied { missing })
    } else {
        None
    };
    ValidationReport {
        valid: violated_reason.is_none(),
        cost,
        satisfied_soft_facts,
        violated_reason,
    }
}

fn failed(cost: u64, reason: Violation) -> ValidationReport {
    ValidationReport {
        valid: false,
        cost,
        satisfied_soft_facts: BTreeSet::new(),
        violated_reason: Some(reason),
    }
}
