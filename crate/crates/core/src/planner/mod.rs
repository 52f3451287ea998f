//! Cost-bounded optimal search, used both to produce plans and as the
//! solvability oracle for goal-subset analysis.

mod hmax;
mod packed;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, BTreeSet, HashMap};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::properties::{CompiledTask, PropId};
use crate::task::{Bound, Condition, OspTask, Plan};

pub use hmax::Hmax;
pub use packed::{relevant_variables, PackedTask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Heuristic {
    Blind,
    Hmax,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub heuristic: Heuristic,
    /// Maximum number of expanded nodes.
    pub node_cap: usize,
    #[serde(default, with = "millis")]
    pub time_cap: Option<Duration>,
    /// Drops actions and variables that cannot influence the goal.
    #[serde(default = "yes")]
    pub prune_irrelevant: bool,
    /// Greedy ordering on h instead of f. Plans are no longer cost-optimal
    /// but the bound is still enforced and the verdict is still exact.
    #[serde(default)]
    pub satisficing: bool,
}

fn yes() -> bool {
    true
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(d: &Option<Duration>, s: S) -> Result<S::Ok, S::Error> {
        d.map(|d| d.as_millis() as u64).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Duration>, D::Error> {
        Ok(Option::<u64>::deserialize(d)?.map(Duration::from_millis))
    }
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { heuristic: Heuristic::Hmax, node_cap: 20_000_000, time_cap: None, prune_irrelevant: true, satisficing: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SearchStatus {
    Solved,
    Unsolvable,
    ResourceLimit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub status: SearchStatus,
    pub plan: Option<Plan>,
    pub expanded: u64,
    pub generated: u64,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Solvability {
    Solvable,
    Unsolvable,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct OpenEntry {
    f: u64,
    h: u64,
    action: usize,
    seq: u64,
    node: usize,
}

impl Ord for OpenEntry {
    // BinaryHeap is a max-heap; invert so the smallest key pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.f, other.h, other.action, other.seq).cmp(&(self.f, self.h, self.action, self.seq))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Node {
    parent: usize,
    action: usize,
    g: u64,
}

const ROOT: usize = usize::MAX;

/// Optimal A* for `goal` within the task's bound. Ties are broken by lower
/// f, then lower h, then lower id of the generating action, then FIFO.
/// In satisficing mode the key is h, then g.
pub fn search(task: &OspTask, goal: &Condition, config: &SearchConfig) -> SearchResult {
    let start = Instant::now();
    let packed = PackedTask::new(task, goal, config.prune_irrelevant);
    let hmax = (config.heuristic == Heuristic::Hmax).then(|| Hmax::new(&packed));
    let heuristic = |s: &[u64]| match &hmax {
        Some(h) => h.evaluate(&packed, s),
        None => Some(0),
    };
    let within = |g: u64, h: u64| match task.bound {
        Bound::Finite(b) => g.saturating_add(h) <= b,
        Bound::Infinite => true,
    };
    let key = |g: u64, h: u64| if config.satisficing { h } else { g + h };
    let tie = |g: u64, h: u64| if config.satisficing { g } else { h };
    let done = |status, plan, expanded, generated| SearchResult {
        status,
        plan,
        expanded,
        generated,
        elapsed_ms: start.elapsed().as_millis() as u64,
    };

    let mut nodes: Vec<Node> = Vec::new();
    let mut states: Vec<Box<[u64]>> = Vec::new();
    let mut best: HashMap<Box<[u64]>, usize> = HashMap::new();
    let mut open = BinaryHeap::new();
    let (mut expanded, mut generated, mut seq) = (0u64, 0u64, 0u64);

    let initial: Box<[u64]> = packed.initial.clone().into_boxed_slice();
    match heuristic(&initial) {
        Some(h) if within(0, h) => {
            nodes.push(Node { parent: ROOT, action: ROOT, g: 0 });
            states.push(initial.clone());
            best.insert(initial, 0);
            open.push(OpenEntry { f: key(0, h), h: tie(0, h), action: 0, seq, node: 0 });
        }
        _ => return done(SearchStatus::Unsolvable, None, 0, 0),
    }

    while let Some(entry) = open.pop() {
        let node = entry.node;
        let g = nodes[node].g;
        if best.get(&states[node]) != Some(&node) {
            continue;
        }
        if packed.goal_holds(&states[node]) {
            let mut steps = Vec::new();
            let mut n = node;
            while nodes[n].parent != ROOT {
                steps.push(packed.actions[nodes[n].action].id);
                n = nodes[n].parent;
            }
            steps.reverse();
            return done(SearchStatus::Solved, Some(Plan { steps, cost: g }), expanded, generated);
        }
        expanded += 1;
        if expanded as usize > config.node_cap
            || (expanded % 1024 == 0 && config.time_cap.is_some_and(|t| start.elapsed() > t))
        {
            return done(SearchStatus::ResourceLimit, None, expanded, generated);
        }
        let state = states[node].clone();
        for (i, a) in packed.actions.iter().enumerate() {
            if !packed.holds(&state, &a.pre) {
                continue;
            }
            let next: Box<[u64]> = packed.successor(&state, a).into_boxed_slice();
            let g2 = g + a.cost;
            if let Some(&old) = best.get(&next) {
                if nodes[old].g <= g2 {
                    continue;
                }
            }
            generated += 1;
            let Some(h) = heuristic(&next) else { continue };
            if !within(g2, h) {
                continue;
            }
            nodes.push(Node { parent: node, action: i, g: g2 });
            let id = nodes.len() - 1;
            states.push(next.clone());
            best.insert(next, id);
            seq += 1;
            open.push(OpenEntry { f: key(g2, h), h: tie(g2, h), action: a.id, seq, node: id });
        }
    }
    done(SearchStatus::Unsolvable, None, expanded, generated)
}

/// Plans for the compiled task's hard goal.
pub fn solve_bounded(compiled: &CompiledTask, config: &SearchConfig) -> SearchResult {
    search(&compiled.task, &compiled.hard_goal(), config)
}

/// Whether `subset` together with the compiled hard goals is achievable.
/// Resource limits map to `Unknown`, never to `Unsolvable`.
pub fn check_solvable(compiled: &CompiledTask, subset: &BTreeSet<PropId>, config: &SearchConfig) -> Solvability {
    let ids: BTreeSet<PropId> = compiled.hard.union(subset).cloned().collect();
    match search(&compiled.task, &compiled.goal_for(&ids), config).status {
        SearchStatus::Solved => Solvability::Solvable,
        SearchStatus::Unsolvable => Solvability::Unsolvable,
        SearchStatus::ResourceLimit => Solvability::Unknown,
    }
}
