use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::SessionError;
use crate::mugs::{compute_mugs, MugsOptions, PlannerOracle, Strategy};
use crate::planner::{search, SearchConfig, SearchStatus};
use crate::properties::{PropId, PropertySet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PlanOutcome {
    Solved { actions: Vec<String>, cost: u64, satisfied: BTreeSet<PropId> },
    /// Minimal conflicts among the requested properties.
    Unsolvable { mugs: Vec<BTreeSet<PropId>> },
    ResourceLimit,
}

/// Plans for `hard` plus the global hard properties. When that fails, the
/// conflicts are computed over the requested properties only.
pub fn plan_selection(set: &PropertySet, hard: &BTreeSet<PropId>, config: &SearchConfig) -> Result<PlanOutcome, SessionError> {
    let globals = set.global_hard();
    let requested: BTreeSet<PropId> = hard.difference(&globals).cloned().collect();
    let all: BTreeSet<PropId> = globals.union(&requested).cloned().collect();
    let compiled = set.compile_selection(&all, &set.ids().difference(&all).cloned().collect())?;
    let result = search(&compiled.task, &compiled.hard_goal(), config);
    match result.status {
        SearchStatus::Solved => {
            let plan = result.plan.expect("solved search has a plan");
            Ok(PlanOutcome::Solved {
                actions: plan.action_names(&compiled.task).map(str::to_string).collect(),
                cost: plan.cost,
                satisfied: compiled.satisfied(&plan)?,
            })
        }
        SearchStatus::Unsolvable => {
            let oracle = PlannerOracle::with_universe(set, &requested, SearchConfig { satisficing: true, ..config.clone() })?;
            let universe: Vec<PropId> = requested.into_iter().collect();
            let catalog = compute_mugs(&universe, &oracle, &MugsOptions { strategy: Strategy::BottomUp, parallel: true })?;
            Ok(PlanOutcome::Unsolvable { mugs: catalog.mugs })
        }
        SearchStatus::ResourceLimit => Ok(PlanOutcome::ResourceLimit),
    }
}
