//! Minimal unsolvable goal subsets over a property universe, and the
//! explanations derived from them.

mod answer;
mod oracle;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::properties::PropId;

pub use answer::{
    answer_question, derive_exclusion_dependencies, explain_unsolvable, Answer, AnswerEntry, ExclusionDependency,
    Question, UnsolvableExplanation,
};
pub use oracle::{PlannerOracle, Verdict};

pub const CATALOG_SCHEMA_VERSION: u32 = 1;

/// Subsets are bitmasks over the universe order.
const MAX_UNIVERSE: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MugsError {
    #[error("oracle could not decide subset {0:?}")]
    OracleUnknown(Vec<PropId>),
    #[error("the global hard goals alone are unsolvable")]
    GlobalsUnsolvable,
    #[error("universe of {0} properties exceeds the supported {MAX_UNIVERSE}")]
    UniverseTooLarge(usize),
    #[error("question asks {size} properties, limit is {limit}")]
    QuestionTooLarge { size: usize, limit: usize },
    #[error("invalid question: {0}")]
    InvalidQuestion(String),
}

impl MugsError {
    pub fn code(&self) -> &'static str {
        match self {
            MugsError::OracleUnknown(_) => "ORACLE_UNKNOWN",
            MugsError::GlobalsUnsolvable => "GLOBALS_UNSOLVABLE",
            MugsError::UniverseTooLarge(_) => "UNIVERSE_TOO_LARGE",
            MugsError::QuestionTooLarge { .. } => "QUESTION_TOO_LARGE",
            MugsError::InvalidQuestion(_) => "INVALID_QUESTION",
        }
    }
}

/// Decides solvability of goal subsets. Global hard goals are the oracle's
/// business and never appear in the subsets it is asked about.
pub trait SolvabilityOracle: Sync {
    fn check(&self, subset: &BTreeSet<PropId>) -> Verdict;
}

impl<F: Fn(&BTreeSet<PropId>) -> Verdict + Sync> SolvabilityOracle for F {
    fn check(&self, subset: &BTreeSet<PropId>) -> Verdict {
        self(subset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Systematic weakening from the full universe: solvable nodes close
    /// their down-set, unsolvable nodes expand all one-smaller children.
    #[default]
    TopDown,
    /// Level-wise strengthening from the empty set: a subset is only tried
    /// when all its one-smaller subsets are solvable, so every unsolvable
    /// verdict is a minimal one.
    BottomUp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MugsOptions {
    pub strategy: Strategy,
    pub parallel: bool,
}

impl Default for MugsOptions {
    fn default() -> Self {
        MugsOptions { strategy: Strategy::TopDown, parallel: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct MugsStats {
    pub strategy: Strategy,
    pub oracle_calls: u64,
    pub solvable_calls: u64,
    pub unsolvable_calls: u64,
    pub cache_hits: u64,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CachedVerdict {
    Solvable,
    Unsolvable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub subset: BTreeSet<PropId>,
    pub verdict: CachedVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MugsCatalog {
    pub schema_version: u32,
    pub universe: Vec<PropId>,
    pub mugs: Vec<BTreeSet<PropId>>,
    pub stats: MugsStats,
    /// Oracle verdicts the search actually obtained, in canonical order.
    #[serde(default)]
    pub cache: Vec<CacheEntry>,
}

impl MugsCatalog {
    /// Catalog given directly as a list of sets, e.g. from a stored demo.
    pub fn from_sets(universe: impl IntoIterator<Item = PropId>, mugs: Vec<BTreeSet<PropId>>) -> Self {
        let mut universe: Vec<PropId> = universe.into_iter().collect();
        universe.sort();
        universe.dedup();
        let mut mugs = mugs;
        sort_sets(&mut mugs);
        MugsCatalog { schema_version: CATALOG_SCHEMA_VERSION, universe, mugs, stats: MugsStats::default(), cache: Vec::new() }
    }

    /// No member set contains another.
    pub fn is_antichain(&self) -> bool {
        self.mugs
            .iter()
            .enumerate()
            .all(|(i, a)| self.mugs.iter().enumerate().all(|(j, b)| i == j || !a.is_subset(b)))
    }

    /// The catalog without timing, for byte comparisons across runs.
    pub fn without_timing(&self) -> MugsCatalog {
        let mut c = self.clone();
        c.stats.elapsed_ms = 0;
        c
    }
}

/// Sorts sets by size, then by their sorted member lists.
pub fn sort_sets(sets: &mut [BTreeSet<PropId>]) {
    sets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.iter().cmp(b.iter())));
}

type Mask = u64;

struct Lattice<'a, O: SolvabilityOracle + ?Sized> {
    universe: &'a [PropId],
    oracle: &'a O,
    parallel: bool,
    verdicts: HashMap<Mask, bool>,
    /// Sets known solvable by a plan; all their subsets are solvable.
    witnesses: Vec<Mask>,
    stats: MugsStats,
}

impl<'a, O: SolvabilityOracle + ?Sized> Lattice<'a, O> {
    fn to_set(&self, mask: Mask) -> BTreeSet<PropId> {
        (0..self.universe.len()).filter(|i| mask >> i & 1 == 1).map(|i| self.universe[i].clone()).collect()
    }

    fn to_mask(&self, set: &BTreeSet<PropId>) -> Mask {
        self.universe.iter().enumerate().filter(|(_, p)| set.contains(*p)).fold(0, |m, (i, _)| m | 1 << i)
    }

    fn cached(&self, mask: Mask) -> Option<bool> {
        if let Some(&v) = self.verdicts.get(&mask) {
            return Some(v);
        }
        if self.witnesses.iter().any(|&w| mask & !w == 0) {
            return Some(true);
        }
        // Any superset of an unsolvable set is unsolvable.
        if self.verdicts.iter().any(|(&m, &solvable)| !solvable && m & !mask == 0) {
            return Some(false);
        }
        None
    }

    /// Verdicts for a batch of subsets; cache first, then the oracle for the
    /// rest. Results are merged in input order, so the outcome does not
    /// depend on which parallel call finishes first.
    fn decide(&mut self, batch: &[Mask]) -> Result<Vec<bool>, MugsError> {
        let mut out = vec![false; batch.len()];
        let mut pending = Vec::new();
        for (k, &m) in batch.iter().enumerate() {
            match self.cached(m) {
                Some(v) => {
                    self.stats.cache_hits += 1;
                    out[k] = v;
                }
                None => pending.push(k),
            }
        }
        let sets: Vec<BTreeSet<PropId>> = pending.iter().map(|&k| self.to_set(batch[k])).collect();
        let oracle = self.oracle;
        let results: Vec<Verdict> = if self.parallel {
            sets.par_iter().map(|s| oracle.check(s)).collect()
        } else {
            sets.iter().map(|s| oracle.check(s)).collect()
        };
        for ((&k, set), verdict) in pending.iter().zip(&sets).zip(results) {
            self.stats.oracle_calls += 1;
            let solvable = match verdict {
                Verdict::Solvable { witness } => {
                    self.stats.solvable_calls += 1;
                    if let Some(w) = witness {
                        let w = self.to_mask(&w) | batch[k];
                        if !self.witnesses.iter().any(|&x| w & !x == 0) {
                            self.witnesses.retain(|&x| x & !w != 0);
                            self.witnesses.push(w);
                        }
                    }
                    true
                }
                Verdict::Unsolvable => {
                    self.stats.unsolvable_calls += 1;
                    false
                }
                Verdict::Unknown => return Err(MugsError::OracleUnknown(set.iter().cloned().collect())),
            };
            self.verdicts.insert(batch[k], solvable);
            out[k] = solvable;
        }
        Ok(out)
    }

    fn top_down(&mut self) -> Result<Vec<Mask>, MugsError> {
        let n = self.universe.len();
        let full: Mask = if n == 64 { u64::MAX } else { (1 << n) - 1 };
        let mut level = vec![full];
        let mut pending_parents: Vec<Mask> = Vec::new();
        let mut known: HashMap<Mask, bool> = HashMap::new();
        let mut mugs = Vec::new();
        loop {
            let verdicts = self.decide(&level)?;
            for (&m, &v) in level.iter().zip(&verdicts) {
                known.insert(m, v);
            }
            for &parent in &pending_parents {
                let minimal = (0..n).filter(|i| parent >> i & 1 == 1).all(|i| known[&(parent & !(1 << i))]);
                if minimal {
                    mugs.push(parent);
                }
            }
            if level == [0] {
                if !verdicts[0] {
                    return Err(MugsError::GlobalsUnsolvable);
                }
                break;
            }
            let parents: Vec<Mask> = level.iter().zip(&verdicts).filter(|(_, &v)| !v).map(|(&m, _)| m).collect();
            if parents.is_empty() {
                break;
            }
            let mut children: Vec<Mask> = parents
                .iter()
                .flat_map(|&p| (0..n).filter(move |i| p >> i & 1 == 1).map(move |i| p & !(1 << i)))
                .collect::<HashSet<_>>()
                .into_iter()
                .collect();
            children.sort_unstable();
            level = children;
            pending_parents = parents;
        }
        Ok(mugs)
    }

    fn bottom_up(&mut self) -> Result<Vec<Mask>, MugsError> {
        let n = self.universe.len();
        if !self.decide(&[0])?[0] {
            return Err(MugsError::GlobalsUnsolvable);
        }
        let mut solvable: HashSet<Mask> = HashSet::from([0]);
        let mut frontier: Vec<Mask> = vec![0];
        let mut mugs = Vec::new();
        while !frontier.is_empty() {
            let mut candidates: Vec<Mask> = Vec::new();
            for &s in &frontier {
                let top = if s == 0 { 0 } else { 64 - s.leading_zeros() as usize };
                for e in top..n {
                    let c = s | 1 << e;
                    let all_subsets_solvable =
                        (0..n).filter(|i| c >> i & 1 == 1).all(|i| solvable.contains(&(c & !(1 << i))));
                    if all_subsets_solvable {
                        candidates.push(c);
                    }
                }
            }
            candidates.sort_unstable();
            let verdicts = self.decide(&candidates)?;
            frontier.clear();
            for (&c, &v) in candidates.iter().zip(&verdicts) {
                if v {
                    solvable.insert(c);
                    frontier.push(c);
                } else {
                    mugs.push(c);
                }
            }
        }
        Ok(mugs)
    }
}

/// All minimal unsolvable subsets of `universe`. Aborts on the first
/// undecided oracle call rather than returning an unproven catalog.
pub fn compute_mugs<O: SolvabilityOracle + ?Sized>(
    universe: &[PropId],
    oracle: &O,
    options: &MugsOptions,
) -> Result<MugsCatalog, MugsError> {
    let start = Instant::now();
    let mut universe: Vec<PropId> = universe.to_vec();
    universe.sort();
    universe.dedup();
    if universe.len() > MAX_UNIVERSE {
        return Err(MugsError::UniverseTooLarge(universe.len()));
    }
    let mut lattice = Lattice {
        universe: &universe,
        oracle,
        parallel: options.parallel,
        verdicts: HashMap::new(),
        witnesses: Vec::new(),
        stats: MugsStats { strategy: options.strategy, ..MugsStats::default() },
    };
    let masks = match options.strategy {
        Strategy::TopDown => lattice.top_down()?,
        Strategy::BottomUp => lattice.bottom_up()?,
    };
    let mut mugs: Vec<BTreeSet<PropId>> = masks.iter().map(|&m| lattice.to_set(m)).collect();
    sort_sets(&mut mugs);
    let mut cache: Vec<CacheEntry> = lattice
        .verdicts
        .iter()
        .map(|(&m, &v)| CacheEntry {
            subset: lattice.to_set(m),
            verdict: if v { CachedVerdict::Solvable } else { CachedVerdict::Unsolvable },
        })
        .collect();
    cache.sort_by(|a, b| a.subset.len().cmp(&b.subset.len()).then_with(|| a.subset.iter().cmp(b.subset.iter())));
    let mut stats = lattice.stats;
    stats.elapsed_ms = start.elapsed().as_millis() as u64;
    Ok(MugsCatalog { schema_version: CATALOG_SCHEMA_VERSION, universe, mugs, stats, cache })
}

/// Minimal unsolvable subsets by testing every subset; exponential, for
/// cross-checking only.
pub fn brute_force_mugs<O: SolvabilityOracle + ?Sized>(
    universe: &[PropId],
    oracle: &O,
) -> Result<Vec<BTreeSet<PropId>>, MugsError> {
    let n = universe.len();
    let mut unsolvable = Vec::new();
    for mask in 0u64..1 << n {
        let set: BTreeSet<PropId> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| universe[i].clone()).collect();
        match oracle.check(&set) {
            Verdict::Solvable { .. } => {}
            Verdict::Unsolvable => unsolvable.push(set),
            Verdict::Unknown => return Err(MugsError::OracleUnknown(set.into_iter().collect())),
        }
    }
    let mut minimal: Vec<BTreeSet<PropId>> = unsolvable
        .iter()
        .filter(|s| !unsolvable.iter().any(|t| t != *s && t.is_subset(s)))
        .cloned()
        .collect();
    sort_sets(&mut minimal);
    Ok(minimal)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificationFailure {
    pub mugs: BTreeSet<PropId>,
    pub reason: String,
}

/// Re-verifies every catalog entry with fresh oracle calls: the set is
/// unsolvable and removing any one member makes it solvable.
pub fn certify<O: SolvabilityOracle + ?Sized>(catalog: &MugsCatalog, oracle: &O) -> Vec<CertificationFailure> {
    let checks: Vec<(usize, Option<PropId>)> = catalog
        .mugs
        .iter()
        .enumerate()
        .flat_map(|(i, m)| std::iter::once((i, None)).chain(m.iter().map(move |p| (i, Some(p.clone())))))
        .collect();
    let results: Vec<Option<CertificationFailure>> = checks
        .par_iter()
        .map(|(i, removed)| {
            let m = &catalog.mugs[*i];
            let mut subset = m.clone();
            if let Some(p) = removed {
                subset.remove(p);
            }
            let verdict = oracle.check(&subset);
            let ok = match removed {
                None => verdict == Verdict::Unsolvable,
                Some(_) => matches!(verdict, Verdict::Solvable { .. }),
            };
            (!ok).then(|| CertificationFailure {
                mugs: m.clone(),
                reason: match removed {
                    None => format!("set is not unsolvable: {verdict:?}"),
                    Some(p) => format!("removing {p} is not solvable: {verdict:?}"),
                },
            })
        })
        .collect();
    results.into_iter().flatten().collect()
}

/// Groups a catalog's sets by member, for display.
pub fn mugs_by_member(catalog: &MugsCatalog) -> BTreeMap<PropId, Vec<BTreeSet<PropId>>> {
    let mut out: BTreeMap<PropId, Vec<BTreeSet<PropId>>> = BTreeMap::new();
    for m in &catalog.mugs {
        for p in m {
            out.entry(p.clone()).or_default().push(m.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::properties::ids;

    /// Unsolvable iff the subset contains one of `conflicts`.
    fn oracle(conflicts: Vec<BTreeSet<PropId>>) -> impl Fn(&BTreeSet<PropId>) -> Verdict + Sync {
        move |s: &BTreeSet<PropId>| {
            if conflicts.iter().any(|c| c.is_subset(s)) {
                Verdict::Unsolvable
            } else {
                Verdict::Solvable { witness: None }
            }
        }
    }

    fn both(universe: &[PropId], o: &(impl SolvabilityOracle + ?Sized)) -> Vec<Vec<BTreeSet<PropId>>> {
        [Strategy::TopDown, Strategy::BottomUp]
            .into_iter()
            .map(|strategy| compute_mugs(universe, o, &MugsOptions { strategy, parallel: true }).unwrap().mugs)
            .collect()
    }

    #[test]
    fn solvable_universe_has_none() {
        let u: Vec<PropId> = ids(1..=4u32).into_iter().collect();
        for m in both(&u, &oracle(vec![])) {
            assert!(m.is_empty());
        }
    }

    #[test]
    fn single_unreachable() {
        let u: Vec<PropId> = ids(1..=3u32).into_iter().collect();
        for m in both(&u, &oracle(vec![ids([2u32])])) {
            assert_eq!(m, vec![ids([2u32])]);
        }
    }

    #[test]
    fn pairwise_conflict_with_free_goal() {
        let u: Vec<PropId> = ids(1..=3u32).into_iter().collect();
        let o = oracle(vec![ids([1u32, 2])]);
        assert_eq!(brute_force_mugs(&u, &o).unwrap(), vec![ids([1u32, 2])]);
        for m in both(&u, &o) {
            assert_eq!(m, vec![ids([1u32, 2])]);
        }
    }

    #[test]
    fn ten_set_catalog_recovered() {
        let sets: Vec<BTreeSet<PropId>> = vec![
            ids([2u32, 4, 9]),
            ids([2u32, 6]),
            ids([3u32, 6, 9]),
            ids([3u32, 8]),
            ids([4u32, 6, 9, 10]),
            ids([4u32, 7, 9]),
            ids([5u32, 6]),
            ids([5u32, 7]),
            ids([6u32, 8, 10]),
            ids([7u32, 8]),
        ];
        let u: Vec<PropId> = ids(2..=11u32).into_iter().collect();
        let o = oracle(sets.clone());
        let mut expected = sets;
        sort_sets(&mut expected);
        for m in both(&u, &o) {
            assert_eq!(m, expected);
        }
    }

    #[test]
    fn unknown_aborts() {
        let u: Vec<PropId> = ids(1..=2u32).into_iter().collect();
        let o = |s: &BTreeSet<PropId>| if s.len() == 2 { Verdict::Unknown } else { Verdict::Unsolvable };
        let err = compute_mugs(&u, &o, &MugsOptions::default()).unwrap_err();
        assert_eq!(err.code(), "ORACLE_UNKNOWN");
    }

    #[test]
    fn globals_unsolvable() {
        let u: Vec<PropId> = ids(1..=2u32).into_iter().collect();
        let o = |_: &BTreeSet<PropId>| Verdict::Unsolvable;
        for strategy in [Strategy::TopDown, Strategy::BottomUp] {
            let err = compute_mugs(&u, &o, &MugsOptions { strategy, parallel: false }).unwrap_err();
            assert_eq!(err, MugsError::GlobalsUnsolvable);
        }
    }

    #[test]
    fn witnesses_save_calls() {
        let u: Vec<PropId> = ids(1..=6u32).into_iter().collect();
        let all: BTreeSet<PropId> = u.iter().cloned().collect();
        let o = move |s: &BTreeSet<PropId>| {
            if s.contains(&PropId::new("1")) && s.contains(&PropId::new("2")) {
                Verdict::Unsolvable
            } else {
                let mut w = all.clone();
                w.remove(&PropId::new(if s.contains(&PropId::new("1")) { "2" } else { "1" }));
                Verdict::Solvable { witness: Some(w) }
            }
        };
        let c = compute_mugs(&u, &o, &MugsOptions { strategy: Strategy::BottomUp, parallel: false }).unwrap();
        assert_eq!(c.mugs, vec![ids([1u32, 2])]);
        assert!(c.stats.oracle_calls <= 4, "{:?}", c.stats);
    }
}
