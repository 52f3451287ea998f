use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::ltlf::{Dfa, LtlAtom, LtlfFormula, DEFAULT_DFA_STATE_CAP};
use super::property::{PlanProperty, PropId, PropertyBody, ResolvedProperty, SetFormula, Vocabulary};
use super::PropertyError;
use crate::task::{
    self, ActionId, Condition, ConditionalEffect, Fact, OspTask, PartialAssignment, Plan, Variable, VarId,
};

/// Letters are bitmasks over at most this many atoms.
const MAX_LTLF_ATOMS: usize = 16;

/// Monitor variables added for one property.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Monitor {
    pub property: PropId,
    pub variables: Vec<VarId>,
}

/// A task augmented with monitors so that each compiled property has a goal
/// condition `g_p`. Action ids are those of the base task, so a compiled plan
/// projects onto the original plan by forgetting the monitor variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledTask {
    pub task: OspTask,
    pub base_variables: usize,
    pub goals: BTreeMap<PropId, Condition>,
    pub monitors: Vec<Monitor>,
    pub hard: BTreeSet<PropId>,
    pub soft: BTreeSet<PropId>,
}

impl CompiledTask {
    pub fn goal_of(&self, id: &PropId) -> Option<&Condition> {
        self.goals.get(id)
    }

    /// Conjunction of the task's own hard goal and `g_p` for hard properties.
    pub fn hard_goal(&self) -> Condition {
        self.goal_for(&self.hard)
    }

    /// Goal condition for an arbitrary subset of compiled properties.
    pub fn goal_for(&self, ids: &BTreeSet<PropId>) -> Condition {
        let mut parts: Vec<Condition> = self.task.hard_goal.facts().map(Condition::Fact).collect();
        parts.extend(ids.iter().map(|id| self.goals[id].clone()));
        Condition::And(parts)
    }

    /// Properties whose goal condition holds after `plan`.
    pub fn satisfied(&self, plan: &Plan) -> Result<BTreeSet<PropId>, PropertyError> {
        let end = task::apply_sequence(&self.task, &self.task.initial, &plan.steps).map_err(PropertyError::Task)?;
        Ok(self.goals.iter().filter(|(_, g)| g.holds(&end)).map(|(id, _)| id.clone()).collect())
    }

    /// Compiled plans and original plans share action ids.
    pub fn project(&self, plan: &Plan) -> Plan {
        plan.clone()
    }

    pub fn is_monitor(&self, var: VarId) -> bool {
        var >= self.base_variables
    }

    /// Monitor variables never occur in the precondition of any action.
    pub fn check_non_interference(&self) -> bool {
        self.task.actions.iter().all(|a| a.precondition.vars().all(|v| !self.is_monitor(v)))
    }
}

/// Properties resolved against one base task, ready to be compiled for any
/// subset. Automata are built once here.
#[derive(Debug, Clone)]
pub struct PropertySet {
    pub base: OspTask,
    pub properties: Vec<PlanProperty>,
    resolved: BTreeMap<PropId, ResolvedProperty>,
    dfas: BTreeMap<PropId, Dfa>,
}

impl PropertySet {
    pub fn new(base: OspTask, vocab: &dyn Vocabulary, properties: Vec<PlanProperty>) -> Result<Self, PropertyError> {
        Self::with_cap(base, vocab, properties, DEFAULT_DFA_STATE_CAP)
    }

    pub fn with_cap(
        base: OspTask,
        vocab: &dyn Vocabulary,
        properties: Vec<PlanProperty>,
        dfa_cap: usize,
    ) -> Result<Self, PropertyError> {
        let mut resolved = BTreeMap::new();
        let mut dfas = BTreeMap::new();
        for p in &properties {
            let r = ResolvedProperty::resolve(p, vocab)?;
            if let PropertyBody::Ltlf(f) = &r.body {
                check_monitorable(&base, f, &p.id)?;
                dfas.insert(p.id.clone(), Dfa::build(&f.root, alphabet(&base, f, &p.id)?, dfa_cap)?);
            }
            if resolved.insert(p.id.clone(), r).is_some() {
                return Err(PropertyError::DuplicateId(p.id.clone()));
            }
        }
        Ok(PropertySet { base, properties, resolved, dfas })
    }

    pub fn ids(&self) -> BTreeSet<PropId> {
        self.resolved.keys().cloned().collect()
    }

    pub fn global_hard(&self) -> BTreeSet<PropId> {
        self.properties.iter().filter(|p| p.global_hard).map(|p| p.id.clone()).collect()
    }

    /// Properties the user may select: everything except global hard ones.
    pub fn selectable(&self) -> BTreeSet<PropId> {
        self.properties.iter().filter(|p| !p.global_hard).map(|p| p.id.clone()).collect()
    }

    pub fn property(&self, id: &PropId) -> Option<&PlanProperty> {
        self.properties.iter().find(|p| &p.id == id)
    }

    pub fn resolved(&self, id: &PropId) -> Option<&ResolvedProperty> {
        self.resolved.get(id)
    }

    pub fn dfa(&self, id: &PropId) -> Option<&Dfa> {
        self.dfas.get(id)
    }

    /// Augments the base task with monitors for `ids` only. Hard and soft
    /// partitions are left empty.
    pub fn compile(&self, ids: &BTreeSet<PropId>) -> Result<CompiledTask, PropertyError> {
        let mut task = self.base.clone();
        let base_variables = task.variables.len();
        let mut goals = BTreeMap::new();
        let mut monitors = Vec::new();
        let mut flags: BTreeMap<BTreeSet<ActionId>, VarId> = BTreeMap::new();
        for id in ids {
            let r = self.resolved.get(id).ok_or_else(|| PropertyError::UnknownProperty(id.clone()))?;
            let goal = match &r.body {
                PropertyBody::GoalFact(c) => c.clone(),
                PropertyBody::ActionSet { sets, formula } => {
                    let vars: Vec<VarId> = sets.iter().map(|s| flag_variable(&mut task, &mut flags, s)).collect();
                    let mut own: Vec<VarId> = vars.clone();
                    own.sort_unstable();
                    own.dedup();
                    monitors.push(Monitor { property: id.clone(), variables: own });
                    set_condition(formula, &vars)
                }
                PropertyBody::Ltlf(f) => {
                    let (q, acc) = add_automaton(&mut task, id, f, &self.dfas[id]);
                    monitors.push(Monitor { property: id.clone(), variables: vec![q, acc] });
                    Condition::Fact(Fact::new(acc, 1))
                }
            };
            goals.insert(id.clone(), goal);
        }
        task.validate().map_err(PropertyError::Task)?;
        Ok(CompiledTask { task, base_variables, goals, monitors, hard: BTreeSet::new(), soft: BTreeSet::new() })
    }

    /// Compiles `hard ∪ soft` and records the partition. Global hard
    /// properties must be among `hard`.
    pub fn compile_selection(
        &self,
        hard: &BTreeSet<PropId>,
        soft: &BTreeSet<PropId>,
    ) -> Result<CompiledTask, PropertyError> {
        if let Some(missing) = self.global_hard().difference(hard).next() {
            return Err(PropertyError::MissingGlobalHard(missing.clone()));
        }
        if let Some(both) = hard.intersection(soft).next() {
            return Err(PropertyError::HardSoftOverlap(both.clone()));
        }
        let all: BTreeSet<PropId> = hard.union(soft).cloned().collect();
        let mut compiled = self.compile(&all)?;
        compiled.hard = hard.clone();
        compiled.soft = soft.clone();
        Ok(compiled)
    }

    /// Direct semantics on the base task, independent of compilation.
    pub fn evaluate(&self, id: &PropId, plan: &Plan) -> Result<bool, PropertyError> {
        self.resolved
            .get(id)
            .ok_or_else(|| PropertyError::UnknownProperty(id.clone()))?
            .evaluate_on_trace(&self.base, plan)
    }
}

fn flag_variable(task: &mut OspTask, flags: &mut BTreeMap<BTreeSet<ActionId>, VarId>, set: &BTreeSet<ActionId>) -> VarId {
    if let Some(&v) = flags.get(set) {
        return v;
    }
    let var = task.variables.len();
    task.variables.push(Variable::binary(var, format!("(used-set {})", flags.len())));
    task.initial = extend_state(&task.initial, 0);
    for &a in set {
        task.actions[a].effect.insert(Fact::new(var, 1));
    }
    flags.insert(set.clone(), var);
    var
}

fn extend_state(s: &task::State, value: usize) -> task::State {
    let mut values = s.values().to_vec();
    values.push(value);
    task::State::new(values)
}

fn set_condition(f: &SetFormula, vars: &[VarId]) -> Condition {
    match f {
        SetFormula::True => Condition::True,
        SetFormula::False => Condition::False,
        SetFormula::Used(i) => Condition::Fact(Fact::new(vars[*i], 1)),
        SetFormula::Not(g) => Condition::Not(Box::new(set_condition(g, vars))),
        SetFormula::And(gs) => Condition::And(gs.iter().map(|g| set_condition(g, vars)).collect()),
        SetFormula::Or(gs) => Condition::Or(gs.iter().map(|g| set_condition(g, vars)).collect()),
    }
}

fn fact_atoms(f: &LtlfFormula) -> Vec<(usize, Fact)> {
    f.atoms
        .iter()
        .enumerate()
        .filter_map(|(i, a)| match a {
            LtlAtom::Fact(fact) => Some((i, *fact)),
            LtlAtom::Action(_) => None,
        })
        .collect()
}

fn action_mask(f: &LtlfFormula, action: ActionId) -> u64 {
    f.atoms
        .iter()
        .enumerate()
        .filter(|(_, a)| matches!(a, LtlAtom::Action(ids) if ids.contains(&action)))
        .fold(0, |m, (i, _)| m | 1 << i)
}

fn fact_mask(f: &LtlfFormula, state_value: &impl Fn(VarId) -> usize) -> u64 {
    fact_atoms(f)
        .into_iter()
        .filter(|(_, fact)| state_value(fact.var) == fact.value)
        .fold(0, |m, (i, _)| m | 1 << i)
}

/// Every letter the trace can produce: each fact combination with each
/// action class, plus the class of the initial position.
fn alphabet(task: &OspTask, f: &LtlfFormula, id: &PropId) -> Result<Vec<u64>, PropertyError> {
    if f.atoms.len() > MAX_LTLF_ATOMS {
        return Err(PropertyError::KindMismatch {
            property: id.clone(),
            message: format!("more than {MAX_LTLF_ATOMS} distinct atoms"),
        });
    }
    let facts: Vec<usize> = fact_atoms(f).into_iter().map(|(i, _)| i).collect();
    let mut classes: BTreeSet<u64> = task.actions.iter().map(|a| action_mask(f, a.id)).collect();
    classes.insert(0);
    let mut letters = BTreeSet::new();
    for combo in 0..1u64 << facts.len() {
        let bits = facts.iter().enumerate().filter(|(k, _)| combo >> k & 1 == 1).fold(0, |m, (_, &i)| m | 1 << i);
        for c in &classes {
            letters.insert(bits | c);
        }
    }
    Ok(letters.into_iter().collect())
}

fn check_monitorable(task: &OspTask, f: &LtlfFormula, id: &PropId) -> Result<(), PropertyError> {
    for (_, fact) in fact_atoms(f) {
        let touched = task
            .actions
            .iter()
            .any(|a| a.conditional_effects.iter().any(|ce| ce.effect.defines(fact.var)));
        if touched {
            return Err(PropertyError::MonitorConflict {
                property: id.clone(),
                variable: task.variables[fact.var].name.clone(),
            });
        }
    }
    Ok(())
}

/// Adds the automaton state variable and its acceptance flag. Each action
/// gets one conditional effect per automaton state and per assignment of the
/// atom variables it leaves unchanged.
fn add_automaton(task: &mut OspTask, id: &PropId, f: &LtlfFormula, dfa: &Dfa) -> (VarId, VarId) {
    let q = task.variables.len();
    task.variables.push(Variable {
        id: q,
        name: format!("(automaton {id})"),
        domain: (0..dfa.len()).map(|i| format!("q{i}")).collect(),
    });
    let acc = q + 1;
    task.variables.push(Variable::binary(acc, format!("(accepting {id})")));

    let initial = task.initial.clone();
    let q0 = dfa.step(0, fact_mask(f, &|v| initial.get(v)));
    task.initial = extend_state(&extend_state(&initial, q0), usize::from(dfa.accepting[q0]));

    let atom_vars: BTreeSet<VarId> = fact_atoms(f).into_iter().map(|(_, fact)| fact.var).collect();
    let live = dfa.live_states();
    for action in &mut task.actions {
        let mask = action_mask(f, action.id);
        let free: Vec<VarId> = atom_vars.iter().copied().filter(|&v| !action.effect.defines(v)).collect();
        let sizes: Vec<usize> = free.iter().map(|&v| task.variables[v].size()).collect();
        let mut assignment = vec![0usize; free.len()];
        let mut extra = Vec::new();
        loop {
            // Unchanged variables keep their pre-state value, which the
            // precondition may already pin down.
            let consistent = free
                .iter()
                .zip(&assignment)
                .all(|(&v, &d)| action.precondition.get(v).is_none_or(|p| p == d));
            if consistent {
                let value = |v: VarId| match action.effect.get(v) {
                    Some(d) => d,
                    None => assignment[free.iter().position(|&x| x == v).expect("free var")],
                };
                let letter = fact_mask(f, &value) | mask;
                for &from in &live {
                    let to = dfa.step(from, letter);
                    if to == from {
                        continue;
                    }
                    let mut condition = PartialAssignment::new();
                    condition.insert(Fact::new(q, from));
                    for (&v, &d) in free.iter().zip(&assignment) {
                        condition.insert(Fact::new(v, d));
                    }
                    let mut effect = PartialAssignment::new();
                    effect.insert(Fact::new(q, to));
                    if dfa.accepting[to] != dfa.accepting[from] {
                        effect.insert(Fact::new(acc, usize::from(dfa.accepting[to])));
                    }
                    extra.push(ConditionalEffect { condition, effect });
                }
            }
            if !advance(&mut assignment, &sizes) {
                break;
            }
        }
        action.conditional_effects.extend(extra);
    }
    (q, acc)
}

/// Odometer increment; false after the last combination.
fn advance(digits: &mut [usize], sizes: &[usize]) -> bool {
    for (d, &n) in digits.iter_mut().zip(sizes) {
        *d += 1;
        if *d < n {
            return true;
        }
        *d = 0;
    }
    false
}

/// Compiles action-set properties only.
pub fn compile_action_set(
    task: &OspTask,
    vocab: &dyn Vocabulary,
    properties: &[PlanProperty],
) -> Result<CompiledTask, PropertyError> {
    if let Some(p) = properties.iter().find(|p| p.kind != super::PropertyKind::ActionSet) {
        return Err(PropertyError::KindMismatch { property: p.id.clone(), message: "expected ACTION_SET".into() });
    }
    let set = PropertySet::new(task.clone(), vocab, properties.to_vec())?;
    set.compile(&set.ids())
}

pub fn compile_ltlf(task: &OspTask, vocab: &dyn Vocabulary, property: &PlanProperty) -> Result<CompiledTask, PropertyError> {
    if property.kind != super::PropertyKind::Ltlf {
        return Err(PropertyError::KindMismatch { property: property.id.clone(), message: "expected LTLF".into() });
    }
    let set = PropertySet::new(task.clone(), vocab, vec![property.clone()])?;
    set.compile(&set.ids())
}

pub fn compile_selection(
    task: &OspTask,
    vocab: &dyn Vocabulary,
    properties: &[PlanProperty],
    hard: &BTreeSet<PropId>,
    soft: &BTreeSet<PropId>,
) -> Result<CompiledTask, PropertyError> {
    PropertySet::new(task.clone(), vocab, properties.to_vec())?.compile_selection(hard, soft)
}
