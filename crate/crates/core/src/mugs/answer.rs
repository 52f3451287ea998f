use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{sort_sets, MugsCatalog, MugsError};
use crate::properties::PropId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub asked: BTreeSet<PropId>,
    /// Properties the current plan satisfies, enforced or by chance.
    pub satisfied: BTreeSet<PropId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerEntry {
    pub source_mugs: Vec<BTreeSet<PropId>>,
    /// Satisfied properties that would have to be given up.
    pub tradeoff: BTreeSet<PropId>,
    /// Members of the source sets that the current plan does not satisfy.
    pub unsatisfied_members: BTreeSet<PropId>,
    pub empty_tradeoff: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub asked: BTreeSet<PropId>,
    pub entries: Vec<AnswerEntry>,
}

impl Answer {
    /// True when no catalog entry involves the asked properties.
    pub fn compatible(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Every conflict involving an asked property, reduced to what the current
/// plan would lose. Entries with the same tradeoff are merged.
pub fn answer_question(q: &Question, catalog: &MugsCatalog, max_size: Option<usize>) -> Result<Answer, MugsError> {
    if q.asked.is_empty() {
        return Err(MugsError::InvalidQuestion("no properties asked".into()));
    }
    if let Some(limit) = max_size {
        if q.asked.len() > limit {
            return Err(MugsError::QuestionTooLarge { size: q.asked.len(), limit });
        }
    }
    if let Some(p) = q.asked.intersection(&q.satisfied).next() {
        return Err(MugsError::InvalidQuestion(format!("property {p} is already satisfied")));
    }
    let mut merged: BTreeMap<Vec<PropId>, AnswerEntry> = BTreeMap::new();
    for m in catalog.mugs.iter().filter(|m| !m.is_disjoint(&q.asked)) {
        let tradeoff: BTreeSet<PropId> = m.difference(&q.asked).filter(|p| q.satisfied.contains(*p)).cloned().collect();
        let entry = merged.entry(tradeoff.iter().cloned().collect()).or_insert_with(|| AnswerEntry {
            source_mugs: Vec::new(),
            empty_tradeoff: tradeoff.is_empty(),
            tradeoff,
            unsatisfied_members: BTreeSet::new(),
        });
        entry.source_mugs.push(m.clone());
        entry.unsatisfied_members.extend(m.difference(&q.satisfied).cloned());
    }
    let mut entries: Vec<AnswerEntry> = merged.into_values().collect();
    for e in &mut entries {
        sort_sets(&mut e.source_mugs);
    }
    entries.sort_by(|a, b| a.tradeoff.len().cmp(&b.tradeoff.len()).then_with(|| a.tradeoff.iter().cmp(b.tradeoff.iter())));
    Ok(Answer { asked: q.asked.clone(), entries })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnsolvableExplanation {
    /// Conflicts that involve a property added since the previous selection.
    pub focused: Vec<BTreeSet<PropId>>,
    pub all: Vec<BTreeSet<PropId>>,
}

/// Catalog entries inside `hard_now`. Without a previous selection the
/// focused list equals the full one.
pub fn explain_unsolvable(
    hard_now: &BTreeSet<PropId>,
    hard_prev: Option<&BTreeSet<PropId>>,
    catalog: &MugsCatalog,
) -> UnsolvableExplanation {
    let all: Vec<BTreeSet<PropId>> = catalog.mugs.iter().filter(|m| m.is_subset(hard_now)).cloned().collect();
    let focused = match hard_prev {
        Some(prev) => {
            let added: BTreeSet<PropId> = hard_now.difference(prev).cloned().collect();
            all.iter().filter(|m| !m.is_disjoint(&added)).cloned().collect()
        }
        None => all.clone(),
    };
    UnsolvableExplanation { focused, all }
}

/// `premise` implies that not all of `excluded` can hold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionDependency {
    pub premise: BTreeSet<PropId>,
    pub excluded: BTreeSet<PropId>,
}

/// For each catalog set M and each nonempty proper Y of M with |Y| at most
/// `max_excluded`, the dependency (M \ Y) ⇒ ¬Y.
pub fn derive_exclusion_dependencies(catalog: &MugsCatalog, max_excluded: usize) -> Vec<ExclusionDependency> {
    let mut out = Vec::new();
    for m in &catalog.mugs {
        let members: Vec<&PropId> = m.iter().collect();
        let n = members.len();
        if n > 63 {
            continue;
        }
        for mask in 1u64..(1 << n) - 1 {
            if mask.count_ones() as usize > max_excluded {
                continue;
            }
            let pick = |inside: bool| -> BTreeSet<PropId> {
                members.iter().enumerate().filter(|(i, _)| (mask >> i & 1 == 1) == inside).map(|(_, p)| (*p).clone()).collect()
            };
            out.push(ExclusionDependency { premise: pick(false), excluded: pick(true) });
        }
    }
    out
}
