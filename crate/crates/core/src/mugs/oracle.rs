use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::SolvabilityOracle;
use crate::planner::{search, SearchConfig, SearchStatus};
use crate::properties::{CompiledTask, PropId, PropertyError, PropertySet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    /// `witness` lists every universe property the found plan satisfies,
    /// which lets callers mark all its subsets solvable at once.
    Solvable { witness: Option<BTreeSet<PropId>> },
    Unsolvable,
    Unknown,
}

/// Solvability through the planner. The universe is compiled once; each
/// check only changes the goal, and the planner drops monitors the goal does
/// not mention.
#[derive(Debug, Clone)]
pub struct PlannerOracle {
    pub compiled: CompiledTask,
    pub universe: BTreeSet<PropId>,
    pub config: SearchConfig,
}

impl PlannerOracle {
    /// Global hard properties of `set` become the compiled hard goal; all
    /// other properties form the universe.
    pub fn new(set: &PropertySet, config: SearchConfig) -> Result<Self, PropertyError> {
        Self::with_universe(set, &set.selectable(), config)
    }

    pub fn with_universe(
        set: &PropertySet,
        universe: &BTreeSet<PropId>,
        config: SearchConfig,
    ) -> Result<Self, PropertyError> {
        let hard = set.global_hard();
        let compiled = set.compile_selection(&hard, &universe.difference(&hard).cloned().collect())?;
        Ok(PlannerOracle { compiled, universe: universe.clone(), config })
    }
}

impl SolvabilityOracle for PlannerOracle {
    fn check(&self, subset: &BTreeSet<PropId>) -> Verdict {
        let ids: BTreeSet<PropId> = self.compiled.hard.union(subset).cloned().collect();
        let result = search(&self.compiled.task, &self.compiled.goal_for(&ids), &self.config);
        match result.status {
            SearchStatus::Solved => {
                let witness = result
                    .plan
                    .and_then(|p| self.compiled.satisfied(&p).ok())
                    .map(|s| s.intersection(&self.universe).cloned().collect());
                Verdict::Solvable { witness }
            }
            SearchStatus::Unsolvable => Verdict::Unsolvable,
            SearchStatus::ResourceLimit => Verdict::Unknown,
        }
    }
}
