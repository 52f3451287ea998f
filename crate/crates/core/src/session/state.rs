use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{Clock, Demo, Project, SessionError, StudyConfig, SCHEMA_VERSION};
use crate::mugs::{
    answer_question, compute_mugs, explain_unsolvable, Answer, MugsCatalog, MugsOptions, PlannerOracle, Question,
    Strategy, UnsolvableExplanation,
};
use crate::planner::{search, SearchConfig, SearchStatus};
use crate::properties::{CompiledTask, PlanProperty, PropId, PropertySet};

/// Everything a session needs besides its own state: the properties, the
/// compiled universe for scoring plans, and the conflict catalog.
pub struct SessionContext {
    pub set: PropertySet,
    pub search: SearchConfig,
    pub demo_id: Option<String>,
    pub project_id: String,
    all: CompiledTask,
    catalog: OnceLock<Result<MugsCatalog, SessionError>>,
    oracle_search: SearchConfig,
}

impl SessionContext {
    pub fn for_demo(demo: &Demo) -> Result<Self, SessionError> {
        let ctx = Self::new(demo.property_set()?, demo.search.clone(), Some(demo.id.clone()), demo.project_id.clone())?;
        let _ = ctx.catalog.set(Ok(demo.catalog.clone()));
        Ok(ctx)
    }

    /// Developer session on an unfrozen project; the catalog is computed on
    /// first use.
    pub fn for_project(project: &Project, search: SearchConfig) -> Result<Self, SessionError> {
        Self::new(project.property_set()?, search, None, project.id.clone())
    }

    fn new(set: PropertySet, search: SearchConfig, demo_id: Option<String>, project_id: String) -> Result<Self, SessionError> {
        let all = set.compile(&set.ids())?;
        Ok(SessionContext {
            set,
            search,
            demo_id,
            project_id,
            all,
            catalog: OnceLock::new(),
            oracle_search: SearchConfig { satisficing: true, ..SearchConfig::default() },
        })
    }

    pub fn catalog(&self) -> Result<&MugsCatalog, SessionError> {
        self.catalog
            .get_or_init(|| {
                let oracle = PlannerOracle::new(&self.set, self.oracle_search.clone())?;
                let universe: Vec<PropId> = self.set.selectable().into_iter().collect();
                Ok(compute_mugs(&universe, &oracle, &MugsOptions { strategy: Strategy::BottomUp, parallel: true })?)
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn properties(&self) -> &[PlanProperty] {
        &self.set.properties
    }
}

/// Sum of utilities over `satisfied`.
pub fn compute_utility(satisfied: &BTreeSet<PropId>, properties: &[PlanProperty]) -> Result<u32, SessionError> {
    satisfied.iter().try_fold(0, |sum, id| {
        let p = properties.iter().find(|p| &p.id == id).ok_or_else(|| SessionError::UnknownProperty(id.clone()))?;
        p.utility.map(|u| sum + u).ok_or_else(|| SessionError::UtilityUnassigned(id.clone()))
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IterationResult {
    Plan {
        actions: Vec<String>,
        cost: u64,
        satisfied: BTreeSet<PropId>,
        unsatisfied: BTreeSet<PropId>,
        /// Absent when some property has no utility.
        utility: Option<u32>,
    },
    Unsolvable {
        explanation: UnsolvableExplanation,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub asked: BTreeSet<PropId>,
    pub answer: Answer,
    pub at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Iteration {
    pub index: u32,
    pub selected: BTreeSet<PropId>,
    /// Selected plus global hard properties.
    pub hard: BTreeSet<PropId>,
    pub result: IterationResult,
    #[serde(default)]
    pub questions: Vec<QuestionRecord>,
    #[serde(default)]
    pub why_asked: bool,
    pub started_at: u64,
    pub finished_at: u64,
}

impl Iteration {
    pub fn is_solved(&self) -> bool {
        matches!(self.result, IterationResult::Plan { .. })
    }

    pub fn utility(&self) -> Option<u32> {
        match &self.result {
            IterationResult::Plan { utility, .. } => *utility,
            IterationResult::Unsolvable { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub at: u64,
    pub kind: String,
    /// Interface part the event belongs to, e.g. "goal-selection".
    #[serde(default)]
    pub part: Option<String>,
    #[serde(default)]
    pub data: serde_json::Value,
}

pub const VIEW_ENTERED: &str = "view-entered";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub schema_version: u32,
    pub id: String,
    pub demo_id: Option<String>,
    pub project_id: String,
    pub config: StudyConfig,
    pub started_at: u64,
    pub iterations: Vec<Iteration>,
    pub events: Vec<Event>,
}

impl Session {
    pub fn start(id: impl Into<String>, ctx: &SessionContext, config: StudyConfig, clock: &dyn Clock) -> Result<Session, SessionError> {
        config.validate()?;
        let mut s = Session {
            schema_version: SCHEMA_VERSION,
            id: id.into(),
            demo_id: ctx.demo_id.clone(),
            project_id: ctx.project_id.clone(),
            config,
            started_at: clock.now_ms(),
            iterations: Vec::new(),
            events: Vec::new(),
        };
        s.log("session-started", None, serde_json::Value::Null, clock);
        Ok(s)
    }

    pub fn current(&self) -> Option<&Iteration> {
        self.iterations.last()
    }

    fn check_time(&self, clock: &dyn Clock) -> Result<(), SessionError> {
        match self.config.time_limit {
            Some(limit) if clock.now_ms().saturating_sub(self.started_at) > limit * 1000 => Err(SessionError::TimeLimit(limit)),
            _ => Ok(()),
        }
    }

    /// Records an event. Timestamps never go backwards even if the clock does.
    pub fn log(&mut self, kind: &str, part: Option<String>, data: serde_json::Value, clock: &dyn Clock) -> &Event {
        let last = self.events.last().map_or(0, |e| e.at);
        let seq = self.events.len() as u64;
        self.events.push(Event { seq, at: clock.now_ms().max(last), kind: kind.to_string(), part, data });
        self.events.last().expect("just pushed")
    }

    pub fn submit_iteration(
        &mut self,
        ctx: &SessionContext,
        selected: &BTreeSet<PropId>,
        clock: &dyn Clock,
    ) -> Result<&Iteration, SessionError> {
        if let Some(max) = self.config.max_iterations {
            if self.iterations.len() as u32 >= max {
                return Err(SessionError::IterationLimit(max));
            }
        }
        self.check_time(clock)?;
        let known = ctx.set.ids();
        if let Some(unknown) = selected.iter().find(|p| !known.contains(*p)) {
            return Err(SessionError::UnknownProperty(unknown.clone()));
        }
        let started_at = clock.now_ms();
        let globals = ctx.set.global_hard();
        let hard: BTreeSet<PropId> = globals.union(selected).cloned().collect();
        let selected: BTreeSet<PropId> = selected.difference(&globals).cloned().collect();
        let goal = ctx.all.goal_for(&hard);
        let outcome = search(&ctx.all.task, &goal, &ctx.search);
        let result = match outcome.status {
            SearchStatus::Solved => {
                let plan = outcome.plan.expect("solved search has a plan");
                let satisfied = ctx.all.satisfied(&plan)?;
                let unsatisfied = known.difference(&satisfied).cloned().collect();
                let utility = if ctx.properties().iter().all(|p| p.utility.is_some()) {
                    Some(compute_utility(&satisfied, ctx.properties())?)
                } else {
                    None
                };
                IterationResult::Plan {
                    actions: plan.action_names(&ctx.all.task).map(str::to_string).collect(),
                    cost: plan.cost,
                    satisfied,
                    unsatisfied,
                    utility,
                }
            }
            SearchStatus::Unsolvable => {
                let previous = self.current().map(|i| &i.hard);
                IterationResult::Unsolvable { explanation: explain_unsolvable(&hard, previous, ctx.catalog()?) }
            }
            SearchStatus::ResourceLimit => return Err(SessionError::PlannerResourceLimit),
        };
        let index = self.iterations.len() as u32 + 1;
        let data = serde_json::json!({ "index": index, "selected": selected, "solved": matches!(result, IterationResult::Plan { .. }) });
        self.iterations.push(Iteration {
            index,
            selected,
            hard,
            result,
            questions: Vec::new(),
            why_asked: false,
            started_at,
            finished_at: clock.now_ms(),
        });
        self.log("iteration-submitted", None, data, clock);
        Ok(self.iterations.last().expect("just pushed"))
    }

    /// Why the current plan does not satisfy `asked`. On an unsolvable
    /// iteration the question is about selected properties instead, and the
    /// rest of the selection plays the role of the satisfied set.
    pub fn ask_question(&mut self, ctx: &SessionContext, asked: &BTreeSet<PropId>, clock: &dyn Clock) -> Result<Answer, SessionError> {
        if !self.config.questions_enabled {
            return Err(SessionError::QuestionsDisabled);
        }
        self.check_time(clock)?;
        let current = self.current().ok_or(SessionError::NoCurrentPlan)?;
        if let Some(limit) = self.config.max_question_size {
            if asked.len() > limit as usize {
                return Err(SessionError::QuestionTooLarge { size: asked.len(), limit: limit as usize });
            }
        }
        if asked.is_empty() {
            return Err(SessionError::Mugs(crate::mugs::MugsError::InvalidQuestion("no properties asked".into())));
        }
        let satisfied = match &current.result {
            IterationResult::Plan { satisfied, unsatisfied, .. } => {
                if let Some(p) = asked.iter().find(|p| !unsatisfied.contains(*p)) {
                    return Err(SessionError::NotUnsatisfied(p.clone()));
                }
                satisfied.clone()
            }
            IterationResult::Unsolvable { .. } => {
                if let Some(p) = asked.iter().find(|p| !current.selected.contains(*p)) {
                    return Err(SessionError::NotSelected(p.clone()));
                }
                current.hard.difference(asked).cloned().collect()
            }
        };
        let answer = answer_question(&Question { asked: asked.clone(), satisfied }, ctx.catalog()?, None)?;
        let at = clock.now_ms();
        self.iterations.last_mut().expect("checked above").questions.push(QuestionRecord { asked: asked.clone(), answer: answer.clone(), at });
        self.log("question-asked", None, serde_json::json!({ "asked": asked }), clock);
        Ok(answer)
    }

    pub fn ask_why_unsolvable(&mut self, clock: &dyn Clock) -> Result<UnsolvableExplanation, SessionError> {
        self.check_time(clock)?;
        let current = self.current().ok_or(SessionError::NotUnsolvable)?;
        let IterationResult::Unsolvable { explanation } = &current.result else {
            return Err(SessionError::NotUnsolvable);
        };
        let explanation = explanation.clone();
        self.iterations.last_mut().expect("checked above").why_asked = true;
        self.log("why-unsolvable", None, serde_json::Value::Null, clock);
        Ok(explanation)
    }

    /// Milliseconds spent per interface part, from each `view-entered`
    /// event to the next one or to `until`.
    pub fn dwell_times(&self, until: u64) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        let mut open: Option<(&str, u64)> = None;
        for e in self.events.iter().filter(|e| e.kind == VIEW_ENTERED) {
            if let Some((part, since)) = open {
                *out.entry(part.to_string()).or_insert(0) += e.at.saturating_sub(since);
            }
            open = e.part.as_deref().map(|p| (p, e.at));
        }
        if let Some((part, since)) = open {
            *out.entry(part.to_string()).or_insert(0) += until.saturating_sub(since);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::mugs::MugsCatalog;
    use crate::properties::ids;
    use crate::session::{ManualClock, SessionError};

    /// Micro task: one truck with one fuel unit, one package.
    fn micro_ctx() -> SessionContext {
        let mut p = Project::new("m", "micro", fixtures::NOMYSTERY_DOMAIN, fixtures::MICRO_PROBLEM).unwrap();
        p.properties = vec![
            PlanProperty::goal_fact("1", "p at l2", "(at p l2)").with_utility(0).globally_hard(),
            PlanProperty::goal_fact("2", "t back at l1", "(at t l1)").with_utility(2),
            PlanProperty::goal_fact("3", "p in t", "(in p t)").with_utility(3),
            PlanProperty::goal_fact("4", "t at l2", "(at t l2)").with_utility(1),
        ];
        SessionContext::for_project(&p, SearchConfig::default()).unwrap()
    }

    #[test]
    fn utility_sums() {
        let props = micro_ctx().set.properties.clone();
        assert_eq!(compute_utility(&BTreeSet::new(), &props).unwrap(), 0);
        assert_eq!(compute_utility(&ids([2u32, 3]), &props).unwrap(), 5);
        let mut bare = props.clone();
        bare[1].utility = None;
        assert_eq!(compute_utility(&ids([2u32]), &bare).unwrap_err(), SessionError::UtilityUnassigned("2".into()));
    }

    #[test]
    fn solved_iteration_reports_chance_goals() {
        let ctx = micro_ctx();
        let clock = ManualClock::new(1000);
        let mut s = Session::start("s", &ctx, StudyConfig::default(), &clock).unwrap();
        let it = s.submit_iteration(&ctx, &BTreeSet::new(), &clock).unwrap().clone();
        let IterationResult::Plan { satisfied, unsatisfied, utility, cost, .. } = it.result else { panic!() };
        assert_eq!(cost, 3);
        assert_eq!(satisfied, ids([1u32, 4]));
        assert_eq!(unsatisfied, ids([2u32, 3]));
        assert_eq!(utility, Some(1));
        assert_eq!(it.hard, ids([1u32]));
    }

    #[test]
    fn unsolvable_iteration_consumes_slot() {
        let ctx = micro_ctx();
        let clock = ManualClock::new(0);
        let config = StudyConfig { max_iterations: Some(2), ..StudyConfig::default() };
        let mut s = Session::start("s", &ctx, config, &clock).unwrap();
        let it = s.submit_iteration(&ctx, &ids([2u32]), &clock).unwrap();
        assert!(!it.is_solved());
        let why = s.ask_why_unsolvable(&clock).unwrap();
        assert_eq!(why.all, vec![ids([2u32])]);
        s.submit_iteration(&ctx, &BTreeSet::new(), &clock).unwrap();
        assert_eq!(s.ask_why_unsolvable(&clock).unwrap_err(), SessionError::NotUnsolvable);
        let err = s.submit_iteration(&ctx, &BTreeSet::new(), &clock).unwrap_err();
        assert_eq!(err.code(), "ITERATION_LIMIT");
        assert_eq!(s.iterations.len(), 2);
    }

    #[test]
    fn question_preconditions() {
        let ctx = micro_ctx();
        let clock = ManualClock::new(0);
        let mut s = Session::start("s", &ctx, StudyConfig::with_questions(), &clock).unwrap();
        assert_eq!(s.ask_question(&ctx, &ids([2u32]), &clock).unwrap_err(), SessionError::NoCurrentPlan);
        s.submit_iteration(&ctx, &BTreeSet::new(), &clock).unwrap();
        assert_eq!(s.ask_question(&ctx, &ids([2u32, 3]), &clock).unwrap_err().code(), "QUESTION_TOO_LARGE");
        assert_eq!(s.ask_question(&ctx, &ids([4u32]), &clock).unwrap_err(), SessionError::NotUnsatisfied("4".into()));
        let a = s.ask_question(&ctx, &ids([2u32]), &clock).unwrap();
        assert_eq!(a.entries.len(), 1);
        assert_eq!(a.entries[0].source_mugs, vec![ids([2u32])]);
        assert_eq!(s.current().unwrap().questions.len(), 1);

        let mut quiet = Session::start("q", &ctx, StudyConfig::without_questions(), &clock).unwrap();
        quiet.submit_iteration(&ctx, &BTreeSet::new(), &clock).unwrap();
        assert_eq!(quiet.ask_question(&ctx, &ids([2u32]), &clock).unwrap_err().code(), "QUESTIONS_DISABLED");
    }

    #[test]
    fn question_on_unsolvable_selection() {
        let ctx = micro_ctx();
        let clock = ManualClock::new(0);
        let mut s = Session::start("s", &ctx, StudyConfig::default(), &clock).unwrap();
        s.submit_iteration(&ctx, &ids([3u32, 4]), &clock).unwrap();
        // 3 alone is already unsolvable with the global goal.
        let a = s.ask_question(&ctx, &ids([4u32]), &clock).unwrap();
        assert!(a.compatible());
        assert_eq!(s.ask_question(&ctx, &ids([2u32]), &clock).unwrap_err().code(), "NOT_SELECTED");
    }

    #[test]
    fn time_limit() {
        let ctx = micro_ctx();
        let clock = ManualClock::new(0);
        let config = StudyConfig { time_limit: Some(60), ..StudyConfig::default() };
        let mut s = Session::start("s", &ctx, config, &clock).unwrap();
        clock.advance(60_001);
        assert_eq!(s.submit_iteration(&ctx, &BTreeSet::new(), &clock).unwrap_err().code(), "TIME_LIMIT");
    }

    #[test]
    fn zero_limits_rejected() {
        let ctx = micro_ctx();
        let clock = ManualClock::new(0);
        let config = StudyConfig { max_iterations: Some(0), ..StudyConfig::default() };
        assert_eq!(Session::start("s", &ctx, config, &clock).unwrap_err().code(), "INVALID_CONFIG");
    }

    #[test]
    fn dwell_per_part() {
        let ctx = micro_ctx();
        let clock = ManualClock::new(100);
        let mut s = Session::start("s", &ctx, StudyConfig::default(), &clock).unwrap();
        assert!(s.dwell_times(100).is_empty());
        s.log(VIEW_ENTERED, Some("goals".into()), serde_json::Value::Null, &clock);
        clock.advance(500);
        s.log(VIEW_ENTERED, Some("plan".into()), serde_json::Value::Null, &clock);
        clock.advance(200);
        s.log(VIEW_ENTERED, Some("goals".into()), serde_json::Value::Null, &clock);
        let d = s.dwell_times(900);
        assert_eq!(d["goals"], 500 + 100);
        assert_eq!(d["plan"], 200);
    }

    #[test]
    fn timestamps_never_decrease() {
        let ctx = micro_ctx();
        let clock = ManualClock::new(500);
        let mut s = Session::start("s", &ctx, StudyConfig::default(), &clock).unwrap();
        clock.set(100);
        let e = s.log("x", None, serde_json::Value::Null, &clock).clone();
        assert_eq!(e.at, 500);
    }

    #[test]
    fn preset_catalog_is_used() {
        let catalog = MugsCatalog::from_sets(ids([2u32, 3, 4]), vec![ids([2u32]), ids([3u32])]);
        let ctx = micro_ctx();
        let _ = ctx.catalog.set(Ok(catalog.clone()));
        assert_eq!(ctx.catalog().unwrap(), &catalog);
    }
}
