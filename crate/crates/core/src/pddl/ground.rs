use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::PddlError;
use crate::task::{Action, Bound, Fact, OspTask, PartialAssignment, State, VarId, Variable};

pub const DEFAULT_ACTION_CAP: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundingOptions {
    pub action_cap: usize,
    /// Relaxed-reachability pruning of atoms and actions.
    pub prune: bool,
}

impl Default for GroundingOptions {
    fn default() -> Self {
        GroundingOptions { action_cap: DEFAULT_ACTION_CAP, prune: true }
    }
}

/// Bijection between ground atoms and binary variables, plus the vocabulary
/// needed to resolve names that grounding dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundAtomTable {
    pub atom_to_var: BTreeMap<String, VarId>,
    pub var_to_atom: Vec<String>,
    /// Atoms of predicates that no action changes, true in the initial state.
    pub static_atoms: BTreeSet<String>,
    pub action_to_id: BTreeMap<String, usize>,
    pub predicate_arity: BTreeMap<String, usize>,
    pub schema_arity: BTreeMap<String, usize>,
    /// Object name to its declared type and all supertypes.
    pub object_types: BTreeMap<String, BTreeSet<String>>,
}

/// How a ground atom name resolves against a grounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomResolution {
    Fact(Fact),
    Constant(bool),
}

impl GroundAtomTable {
    fn well_formed(&self, tokens: &[&str], arity: &BTreeMap<String, usize>) -> bool {
        match tokens.split_first() {
            Some((head, args)) => {
                arity.get(*head) == Some(&args.len())
                    && args.iter().all(|a| self.object_types.contains_key(*a))
            }
            None => false,
        }
    }

    /// Resolves `(pred obj...)`. Well-formed atoms that grounding dropped are
    /// constants: static ones per the initial state, others never true.
    pub fn resolve_atom(&self, name: &str) -> Option<AtomResolution> {
        let key = canonical_name(name)?;
        if let Some(&var) = self.atom_to_var.get(&key) {
            return Some(AtomResolution::Fact(Fact::new(var, 1)));
        }
        let tokens = name_tokens(&key);
        if !self.well_formed(&tokens, &self.predicate_arity) {
            return None;
        }
        Some(AtomResolution::Constant(self.static_atoms.contains(&key)))
    }

    /// Ground action ids matching `(schema arg...)`, where `*` matches any
    /// argument. `None` if the pattern names no schema or object.
    pub fn resolve_actions(&self, pattern: &str) -> Option<Vec<usize>> {
        let key = canonical_name(pattern)?;
        let tokens = name_tokens(&key);
        let (head, args) = tokens.split_first()?;
        if self.schema_arity.get(*head) != Some(&args.len()) {
            return None;
        }
        if args.iter().any(|a| *a != "*" && !self.object_types.contains_key(*a)) {
            return None;
        }
        if !args.contains(&"*") {
            return Some(self.action_to_id.get(&key).copied().into_iter().collect());
        }
        let ids = self
            .action_to_id
            .iter()
            .filter(|(name, _)| {
                let t = name_tokens(name);
                t.len() == tokens.len()
                    && t.iter().zip(&tokens).all(|(a, p)| *p == "*" || a == p)
            })
            .map(|(_, &id)| id)
            .collect();
        Some(ids)
    }
}

/// `(a  B c)` → `(a b c)`; `None` unless the text is one parenthesized token list.
pub fn canonical_name(text: &str) -> Option<String> {
    let t = text.trim();
    let inner = t.strip_prefix('(')?.strip_suffix(')')?;
    if inner.contains('(') || inner.contains(')') {
        return None;
    }
    let parts: Vec<String> = inner.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if parts.is_empty() {
        return None;
    }
    Some(format!("({})", parts.join(" ")))
}

fn name_tokens(key: &str) -> Vec<&str> {
    key.trim_start_matches('(').trim_end_matches(')').split(' ').collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingReport {
    pub schema_version: u32,
    pub variables: usize,
    pub static_atoms: usize,
    pub ground_actions_before_pruning: usize,
    pub ground_actions: usize,
    pub pruned_actions: usize,
    pub pruned_atoms: usize,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Grounding {
    pub task: OspTask,
    pub atoms: GroundAtomTable,
    pub report: GroundingReport,
}

struct GroundAction {
    name: String,
    pre_pos: Vec<String>,
    pre_neg: Vec<String>,
    add: Vec<String>,
    del: Vec<String>,
    cost: u64,
}

fn static_predicates(domain: &ParsedDomain) -> BTreeSet<String> {
    let fluent: BTreeSet<&str> = domain
        .actions
        .iter()
        .flat_map(|a| a.add.iter().chain(&a.delete))
        .map(|atom| atom.predicate.as_str())
        .collect();
    domain
        .predicates
        .iter()
        .filter(|p| !fluent.contains(p.name.as_str()))
        .map(|p| p.name.clone())
        .collect()
}

fn atom_key(predicate: &str, args: &[&str]) -> String {
    let mut s = format!("({predicate}");
    for a in args {
        s.push(' ');
        s.push_str(a);
    }
    s.push(')');
    s
}

/// Initial-state atoms of predicates that never occur in an action effect.
pub fn static_atoms(domain: &ParsedDomain, problem: &ParsedProblem) -> BTreeSet<String> {
    let statics = static_predicates(domain);
    problem
        .init
        .iter()
        .filter(|a| statics.contains(&a.predicate))
        .map(|a| a.to_string())
        .collect()
}

fn object_types(domain: &ParsedDomain, problem: &ParsedProblem) -> BTreeMap<String, BTreeSet<String>> {
    let mut out = BTreeMap::new();
    for o in domain.constants.iter().chain(&problem.objects) {
        let mut types = BTreeSet::from(["object".to_string()]);
        let mut current = Some(o.ty.clone());
        while let Some(t) = current {
            if !types.insert(t.clone()) {
                break;
            }
            current = domain.types.iter().find(|d| d.name == t).map(|d| d.parent.clone());
        }
        out.insert(o.name.clone(), types);
    }
    out
}

/// Grounds with default options (pruning on, default action cap).
pub fn ground(domain: &ParsedDomain, problem: &ParsedProblem) -> Result<Grounding, PddlError> {
    ground_with(domain, problem, GroundingOptions::default())
}

pub fn ground_with(
    domain: &ParsedDomain,
    problem: &ParsedProblem,
    options: GroundingOptions,
) -> Result<Grounding, PddlError> {
    let statics = static_predicates(domain);
    let object_types = object_types(domain, problem);
    let objects: Vec<&str> = domain
        .constants
        .iter()
        .chain(&problem.objects)
        .map(|o| o.name.as_str())
        .collect();
    let static_true = static_atoms(domain, problem);
    let numeric: HashMap<String, u64> = problem
        .numeric_init
        .iter()
        .map(|n| (n.function.to_string(), n.value))
        .collect();
    let init_fluents: BTreeSet<String> = problem
        .init
        .iter()
        .filter(|a| !statics.contains(&a.predicate))
        .map(|a| a.to_string())
        .collect();

    let mut actions: Vec<GroundAction> = Vec::new();
    for schema in &domain.actions {
        let candidates: Vec<Vec<&str>> = schema
            .params
            .iter()
            .map(|p| {
                objects
                    .iter()
                    .copied()
                    .filter(|o| object_types[*o].contains(&p.ty))
                    .collect()
            })
            .collect();
        let index: HashMap<&str, usize> =
            schema.params.iter().enumerate().map(|(i, p)| (p.name.as_str(), i)).collect();
        // static literals checked as soon as their last parameter is bound
        let mut checks_at: Vec<Vec<&Literal>> = vec![Vec::new(); schema.params.len() + 1];
        for l in schema.precondition.iter().filter(|l| statics.contains(&l.atom.predicate)) {
            let depth = l
                .atom
                .args
                .iter()
                .filter_map(|a| index.get(a.as_str()).map(|i| i + 1))
                .max()
                .unwrap_or(0);
            checks_at[depth].push(l);
        }
        let mut binding: Vec<&str> = Vec::with_capacity(schema.params.len());
        enumerate(
            schema,
            &candidates,
            &index,
            &checks_at,
            &static_true,
            &mut binding,
            &mut |binding| {
                if actions.len() >= options.action_cap {
                    return Err(PddlError::GroundingBlowup { cap: options.action_cap });
                }
                let ga = instantiate(schema, binding, &index, &statics, &numeric, domain)?;
                // contradictory preconditions can never hold
                if !ga.pre_pos.iter().any(|p| ga.pre_neg.contains(p)) {
                    actions.push(ga);
                }
                Ok(())
            },
        )?;
    }
    let before = actions.len();

    let (reachable_atoms, reachable_actions) = if options.prune {
        relaxed_reachability(&init_fluents, &actions)
    } else {
        let mut atoms = init_fluents.clone();
        for a in &actions {
            atoms.extend(a.pre_pos.iter().chain(&a.pre_neg).chain(&a.add).chain(&a.del).cloned());
        }
        (atoms, vec![true; actions.len()])
    };
    let mut mentioned: BTreeSet<&String> = init_fluents.iter().collect();
    for a in &actions {
        mentioned.extend(a.pre_pos.iter().chain(&a.pre_neg).chain(&a.add).chain(&a.del));
    }
    let pruned_atoms = mentioned.iter().filter(|a| !reachable_atoms.contains(**a)).count();

    let var_to_atom: Vec<String> = reachable_atoms.iter().cloned().collect();
    let atom_to_var: BTreeMap<String, VarId> =
        var_to_atom.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
    let variables: Vec<Variable> =
        var_to_atom.iter().enumerate().map(|(i, a)| Variable::binary(i, a.clone())).collect();
    let initial = State::new(
        var_to_atom.iter().map(|a| usize::from(init_fluents.contains(a))).collect(),
    );

    let mut task_actions = Vec::new();
    let mut action_to_id = BTreeMap::new();
    for (ga, _) in actions.iter().zip(&reachable_actions).filter(|(_, r)| **r) {
        let id = task_actions.len();
        let mut pre = PartialAssignment::new();
        for a in &ga.pre_pos {
            pre.insert(Fact::new(atom_to_var[a], 1));
        }
        for a in &ga.pre_neg {
            if let Some(&v) = atom_to_var.get(a) {
                pre.insert(Fact::new(v, 0));
            }
        }
        let mut eff = PartialAssignment::new();
        for a in &ga.del {
            if let Some(&v) = atom_to_var.get(a) {
                eff.insert(Fact::new(v, 0));
            }
        }
        // add after delete
        for a in &ga.add {
            eff.insert(Fact::new(atom_to_var[a], 1));
        }
        action_to_id.insert(ga.name.clone(), id);
        task_actions.push(Action::new(id, ga.name.clone(), pre, eff, ga.cost));
    }

    let task = OspTask {
        variables,
        actions: task_actions,
        initial,
        hard_goal: PartialAssignment::new(),
        soft_goal: PartialAssignment::new(),
        bound: Bound::Infinite,
    };
    let report = GroundingReport {
        schema_version: 1,
        variables: task.variables.len(),
        static_atoms: static_true.len(),
        ground_actions_before_pruning: before,
        ground_actions: task.actions.len(),
        pruned_actions: before - task.actions.len(),
        pruned_atoms,
        diagnostics: problem.diagnostics.clone(),
    };
    let atoms = GroundAtomTable {
        atom_to_var,
        var_to_atom,
        static_atoms: static_true,
        action_to_id,
        predicate_arity: domain.predicates.iter().map(|p| (p.name.clone(), p.params.len())).collect(),
        schema_arity: domain.actions.iter().map(|a| (a.name.clone(), a.params.len())).collect(),
        object_types,
    };
    Ok(Grounding { task, atoms, report })
}

type Visit<'a, 'b> = dyn FnMut(&[&'a str]) -> Result<(), PddlError> + 'b;

#[allow(clippy::too_many_arguments)]
fn enumerate<'a>(
    schema: &ActionSchema,
    candidates: &[Vec<&'a str>],
    index: &HashMap<&str, usize>,
    checks_at: &[Vec<&Literal>],
    static_true: &BTreeSet<String>,
    binding: &mut Vec<&'a str>,
    visit: &mut Visit<'a, '_>,
) -> Result<(), PddlError> {
    let depth = binding.len();
    for l in &checks_at[depth] {
        let args: Vec<&str> = l.atom.args.iter().map(|a| term(a, binding, index)).collect();
        if static_true.contains(&atom_key(&l.atom.predicate, &args)) != l.positive {
            return Ok(());
        }
    }
    if depth == candidates.len() {
        return visit(binding);
    }
    for &obj in &candidates[depth] {
        binding.push(obj);
        enumerate(schema, candidates, index, checks_at, static_true, binding, visit)?;
        binding.pop();
    }
    Ok(())
}

fn term<'a>(t: &'a str, binding: &[&'a str], index: &HashMap<&str, usize>) -> &'a str {
    match index.get(t) {
        Some(&i) => binding[i],
        None => t,
    }
}

fn instantiate(
    schema: &ActionSchema,
    binding: &[&str],
    index: &HashMap<&str, usize>,
    statics: &BTreeSet<String>,
    numeric: &HashMap<String, u64>,
    domain: &ParsedDomain,
) -> Result<GroundAction, PddlError> {
    let ground = |atom: &AtomPattern| {
        let args: Vec<&str> = atom.args.iter().map(|a| term(a, binding, index)).collect();
        atom_key(&atom.predicate, &args)
    };
    let mut pre_pos = Vec::new();
    let mut pre_neg = Vec::new();
    for l in schema.precondition.iter().filter(|l| !statics.contains(&l.atom.predicate)) {
        if l.positive {
            pre_pos.push(ground(&l.atom));
        } else {
            pre_neg.push(ground(&l.atom));
        }
    }
    let cost = if domain.uses_action_costs() {
        let mut total = 0;
        for c in &schema.cost {
            total += match c {
                CostExpr::Constant(n) => *n,
                CostExpr::Function(f) => {
                    let key = ground(f);
                    *numeric.get(&key).ok_or_else(|| {
                        PddlError::Type(format!("no initial value for cost function {key}"))
                    })?
                }
            };
        }
        total
    } else {
        1
    };
    let mut name = format!("({}", schema.name);
    for b in binding {
        name.push(' ');
        name.push_str(b);
    }
    name.push(')');
    Ok(GroundAction {
        name,
        pre_pos,
        pre_neg,
        add: schema.add.iter().map(ground).collect(),
        del: schema.delete.iter().map(ground).collect(),
        cost,
    })
}

/// Delete-relaxed fixpoint over positive and negative literals. An atom can
/// be false if it is false initially or some reachable action deletes it.
fn relaxed_reachability(init: &BTreeSet<String>, actions: &[GroundAction]) -> (BTreeSet<String>, Vec<bool>) {
    let mut can_be_true: HashSet<&str> = init.iter().map(String::as_str).collect();
    let mut deleted: HashSet<&str> = HashSet::new();
    let mut reached = vec![false; actions.len()];
    loop {
        let mut changed = false;
        for (i, a) in actions.iter().enumerate() {
            if reached[i] {
                continue;
            }
            let pos_ok = a.pre_pos.iter().all(|p| can_be_true.contains(p.as_str()));
            let neg_ok = a
                .pre_neg
                .iter()
                .all(|p| !init.contains(p) || deleted.contains(p.as_str()));
            if pos_ok && neg_ok {
                reached[i] = true;
                changed = true;
                can_be_true.extend(a.add.iter().map(String::as_str));
                deleted.extend(a.del.iter().map(String::as_str));
            }
        }
        if !changed {
            break;
        }
    }
    (can_be_true.into_iter().map(str::to_string).collect(), reached)
}
