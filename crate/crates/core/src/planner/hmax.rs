//! Delete-relaxation max heuristic over a packed task.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::packed::PackedTask;
use crate::task::{Condition, Variable};

/// Relaxed operator: every conditional effect becomes its own operator with
/// the condition added to the precondition.
#[derive(Debug, Clone)]
struct Op {
    pre: Vec<usize>,
    eff: Vec<usize>,
    cost: u64,
}

#[derive(Debug, Clone)]
pub struct Hmax {
    offsets: Vec<usize>,
    facts: usize,
    ops: Vec<Op>,
    /// Operators having each fact as a precondition.
    watchers: Vec<Vec<usize>>,
    goal: Condition,
}

impl Hmax {
    pub fn new(task: &PackedTask) -> Hmax {
        let mut offsets = Vec::with_capacity(task.sizes.len());
        let mut facts = 0;
        for &s in &task.sizes {
            offsets.push(facts);
            facts += s;
        }
        let idx = |&(v, d): &(usize, usize)| offsets[v] + d;
        let mut ops = Vec::new();
        for a in &task.actions {
            let pre: Vec<usize> = a.pre.iter().map(idx).collect();
            if !a.eff.is_empty() {
                ops.push(Op { pre: pre.clone(), eff: a.eff.iter().map(idx).collect(), cost: a.cost });
            }
            for (c, e) in &a.cond {
                let mut p = pre.clone();
                p.extend(c.iter().map(idx));
                p.sort_unstable();
                p.dedup();
                ops.push(Op { pre: p, eff: e.iter().map(idx).collect(), cost: a.cost });
            }
        }
        let mut watchers = vec![Vec::new(); facts];
        for (i, op) in ops.iter().enumerate() {
            for &f in &op.pre {
                watchers[f].push(i);
            }
        }
        let vars: Vec<Variable> = task
            .sizes
            .iter()
            .enumerate()
            .map(|(i, &s)| Variable { id: i, name: String::new(), domain: vec![String::new(); s] })
            .collect();
        let goal = task.goal.positive_form(&vars);
        Hmax { offsets, facts, ops, watchers, goal }
    }

    /// `None` when the goal is unreachable even without deletes.
    pub fn evaluate(&self, task: &PackedTask, state: &[u64]) -> Option<u64> {
        let mut cost = vec![u64::MAX; self.facts];
        let mut missing: Vec<usize> = self.ops.iter().map(|o| o.pre.len()).collect();
        let mut op_cost = vec![0u64; self.ops.len()];
        let mut heap = BinaryHeap::new();
        for (v, &off) in self.offsets.iter().enumerate() {
            let f = off + task.get(state, v);
            cost[f] = 0;
            heap.push(Reverse((0u64, f)));
        }
        let fire = |i: usize, c: u64, cost: &mut Vec<u64>, heap: &mut BinaryHeap<Reverse<(u64, usize)>>| {
            let op = &self.ops[i];
            let value = c + op.cost;
            for &e in &op.eff {
                if value < cost[e] {
                    cost[e] = value;
                    heap.push(Reverse((value, e)));
                }
            }
        };
        for (i, op) in self.ops.iter().enumerate() {
            if op.pre.is_empty() {
                fire(i, 0, &mut cost, &mut heap);
            }
        }
        while let Some(Reverse((c, f))) = heap.pop() {
            if c > cost[f] {
                continue;
            }
            for &i in &self.watchers[f] {
                op_cost[i] = op_cost[i].max(c);
                missing[i] -= 1;
                if missing[i] == 0 {
                    fire(i, op_cost[i], &mut cost, &mut heap);
                }
            }
        }
        self.goal_cost(&self.goal, &cost)
    }

    fn goal_cost(&self, c: &Condition, cost: &[u64]) -> Option<u64> {
        match c {
            Condition::True => Some(0),
            Condition::False => None,
            Condition::Fact(f) => {
                let v = cost[self.offsets[f.var] + f.value];
                (v != u64::MAX).then_some(v)
            }
            Condition::And(cs) => cs.iter().try_fold(0, |m, c| self.goal_cost(c, cost).map(|v| m.max(v))),
            Condition::Or(cs) => cs.iter().filter_map(|c| self.goal_cost(c, cost)).min(),
            Condition::Not(_) => unreachable!("goal is in positive form"),
        }
    }
}
