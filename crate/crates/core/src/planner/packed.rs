//! Search-side view of a task: irrelevant actions and variables projected
//! away, states packed into 64-bit words.

use std::collections::BTreeSet;

use crate::task::{ActionId, Condition, Fact, OspTask, VarId};

/// Variables that can influence the goal: the goal's own variables closed
/// under preconditions and effect conditions of actions that change them.
pub fn relevant_variables(task: &OspTask, goal: &Condition) -> BTreeSet<VarId> {
    let mut relevant: BTreeSet<VarId> = goal.facts().into_iter().map(|f| f.var).collect();
    loop {
        let before = relevant.len();
        for a in &task.actions {
            let mut touches = a.effect.vars().any(|v| relevant.contains(&v));
            for ce in &a.conditional_effects {
                if ce.effect.vars().any(|v| relevant.contains(&v)) {
                    touches = true;
                    relevant.extend(ce.condition.vars());
                }
            }
            if touches {
                relevant.extend(a.precondition.vars());
            }
        }
        if relevant.len() == before {
            return relevant;
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    word: usize,
    shift: u32,
    mask: u64,
}

#[derive(Debug, Clone)]
pub struct PackedAction {
    pub id: ActionId,
    pub cost: u64,
    pub pre: Vec<(usize, usize)>,
    pub eff: Vec<(usize, usize)>,
    pub cond: Vec<(Vec<(usize, usize)>, Vec<(usize, usize)>)>,
}

#[derive(Debug, Clone)]
pub struct PackedTask {
    /// Original variable id of each compact variable.
    pub vars: Vec<VarId>,
    pub sizes: Vec<usize>,
    slots: Vec<Slot>,
    pub words: usize,
    pub actions: Vec<PackedAction>,
    pub goal: Condition,
    pub initial: Vec<u64>,
}

fn width(size: usize) -> u32 {
    usize::BITS - (size.max(2) - 1).leading_zeros()
}

impl PackedTask {
    pub fn new(task: &OspTask, goal: &Condition, prune_irrelevant: bool) -> PackedTask {
        let keep: BTreeSet<VarId> = if prune_irrelevant {
            relevant_variables(task, goal)
        } else {
            (0..task.variables.len()).collect()
        };
        let vars: Vec<VarId> = keep.iter().copied().collect();
        let mut compact = vec![usize::MAX; task.variables.len()];
        for (i, &v) in vars.iter().enumerate() {
            compact[v] = i;
        }
        let sizes: Vec<usize> = vars.iter().map(|&v| task.variables[v].size()).collect();
        let mut slots = Vec::with_capacity(vars.len());
        let (mut word, mut used) = (0usize, 0u32);
        for &size in &sizes {
            let w = width(size);
            if used + w > 64 {
                word += 1;
                used = 0;
            }
            slots.push(Slot { word, shift: used, mask: (1u64 << w) - 1 });
            used += w;
        }
        let words = if vars.is_empty() { 0 } else { word + 1 };
        let map = |facts: &mut dyn Iterator<Item = Fact>| -> Vec<(usize, usize)> {
            facts.filter(|f| keep.contains(&f.var)).map(|f| (compact[f.var], f.value)).collect()
        };
        let mut actions = Vec::new();
        for a in &task.actions {
            let eff = map(&mut a.effect.facts());
            let cond: Vec<_> = a
                .conditional_effects
                .iter()
                .filter_map(|ce| {
                    let e = map(&mut ce.effect.facts());
                    (!e.is_empty()).then(|| (map(&mut ce.condition.facts()), e))
                })
                .collect();
            if eff.is_empty() && cond.is_empty() && prune_irrelevant {
                continue;
            }
            actions.push(PackedAction { id: a.id, cost: a.cost, pre: map(&mut a.precondition.facts()), eff, cond });
        }
        let goal = remap(goal, &compact);
        let mut packed = PackedTask { vars, sizes, slots, words, actions, goal, initial: Vec::new() };
        let mut initial = vec![0u64; words];
        for (i, &v) in packed.vars.iter().enumerate() {
            packed.set(&mut initial, i, task.initial.get(v));
        }
        packed.initial = initial;
        packed
    }

    #[inline]
    pub fn get(&self, state: &[u64], var: usize) -> usize {
        let s = self.slots[var];
        ((state[s.word] >> s.shift) & s.mask) as usize
    }

    #[inline]
    pub fn set(&self, state: &mut [u64], var: usize, value: usize) {
        let s = self.slots[var];
        state[s.word] = (state[s.word] & !(s.mask << s.shift)) | ((value as u64) << s.shift);
    }

    #[inline]
    pub fn holds(&self, state: &[u64], facts: &[(usize, usize)]) -> bool {
        facts.iter().all(|&(v, d)| self.get(state, v) == d)
    }

    pub fn goal_holds(&self, state: &[u64]) -> bool {
        self.goal.eval(&|f| self.get(state, f.var) == f.value)
    }

    pub fn successor(&self, state: &[u64], a: &PackedAction) -> Vec<u64> {
        let mut next = state.to_vec();
        for &(v, d) in &a.eff {
            self.set(&mut next, v, d);
        }
        for (c, e) in &a.cond {
            if self.holds(state, c) {
                for &(v, d) in e {
                    self.set(&mut next, v, d);
                }
            }
        }
        next
    }
}

/// Rewrites a condition onto compact variables. Facts on dropped variables
/// cannot occur: the goal's variables are always kept.
fn remap(c: &Condition, compact: &[usize]) -> Condition {
    match c {
        Condition::True => Condition::True,
        Condition::False => Condition::False,
        Condition::Fact(f) => Condition::Fact(Fact::new(compact[f.var], f.value)),
        Condition::Not(x) => Condition::Not(Box::new(remap(x, compact))),
        Condition::And(xs) => Condition::And(xs.iter().map(|x| remap(x, compact)).collect()),
        Condition::Or(xs) => Condition::Or(xs.iter().map(|x| remap(x, compact)).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn widths() {
        assert_eq!(width(1), 1);
        assert_eq!(width(2), 1);
        assert_eq!(width(3), 2);
        assert_eq!(width(4), 2);
        assert_eq!(width(5), 3);
    }

    #[test]
    fn packing_round_trip() {
        let g = fixtures::nomystery_grounding();
        let p = PackedTask::new(&g.task, &Condition::True, false);
        for (i, &v) in p.vars.iter().enumerate() {
            assert_eq!(p.get(&p.initial, i), g.task.initial.get(v));
        }
    }

    #[test]
    fn irrelevant_packages_dropped() {
        let g = fixtures::nomystery_grounding();
        let goal = Condition::Fact(match g.atoms.resolve_atom("(at p0 blue-house)").unwrap() {
            crate::pddl::AtomResolution::Fact(f) => f,
            other => panic!("{other:?}"),
        });
        let vars = relevant_variables(&g.task, &goal);
        let names: Vec<&str> = vars.iter().map(|&v| g.atoms.var_to_atom[v].as_str()).collect();
        assert!(names.iter().all(|n| !n.contains("p1") && !n.contains("p3")), "{names:?}");
        assert!(names.contains(&"(at red cafe)") || names.iter().any(|n| n.starts_with("(at red")));
    }
}
