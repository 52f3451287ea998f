//! Projects, demos and the iterative-planning session state machine.

mod clock;
mod demo;
mod plan;
mod project;
mod record;
mod state;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mugs::MugsError;
use crate::pddl::PddlError;
use crate::properties::{PropId, PropertyError};

pub use clock::{Clock, ManualClock, SystemClock};
pub use demo::{build_demo, demo_content_hash, Demo, DemoOptions};
pub use plan::{plan_selection, PlanOutcome};
pub use project::Project;
pub use record::{replay, ReplayMismatch, StudyRecord};
pub use state::{
    compute_utility, Event, Iteration, IterationResult, QuestionRecord, Session, SessionContext,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("questions are disabled for this session")]
    QuestionsDisabled,
    #[error("no iteration has been submitted yet")]
    NoCurrentPlan,
    #[error("question asks {size} properties, limit is {limit}")]
    QuestionTooLarge { size: usize, limit: usize },
    #[error("property {0} is not unsatisfied by the current plan")]
    NotUnsatisfied(PropId),
    #[error("property {0} is not part of the current selection")]
    NotSelected(PropId),
    #[error("the current iteration is not unsolvable")]
    NotUnsolvable,
    #[error("iteration limit of {0} reached")]
    IterationLimit(u32),
    #[error("time limit of {0} s exceeded")]
    TimeLimit(u64),
    #[error("demo {0} has not been built")]
    DemoNotBuilt(String),
    #[error("property {0} has no utility")]
    UtilityUnassigned(PropId),
    #[error("planner hit its resource limit")]
    PlannerResourceLimit,
    #[error("invalid study config: {0}")]
    InvalidConfig(String),
    #[error("unknown property {0}")]
    UnknownProperty(PropId),
    #[error("catalog certification failed: {0}")]
    CertificationFailed(String),
    #[error(transparent)]
    Pddl(#[from] PddlError),
    #[error(transparent)]
    Property(#[from] PropertyError),
    #[error(transparent)]
    Mugs(#[from] MugsError),
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::QuestionsDisabled => "QUESTIONS_DISABLED",
            SessionError::NoCurrentPlan => "NO_CURRENT_PLAN",
            SessionError::QuestionTooLarge { .. } => "QUESTION_TOO_LARGE",
            SessionError::NotUnsatisfied(_) => "NOT_UNSATISFIED",
            SessionError::NotSelected(_) => "NOT_SELECTED",
            SessionError::NotUnsolvable => "NOT_UNSOLVABLE",
            SessionError::IterationLimit(_) => "ITERATION_LIMIT",
            SessionError::TimeLimit(_) => "TIME_LIMIT",
            SessionError::DemoNotBuilt(_) => "DEMO_NOT_BUILT",
            SessionError::UtilityUnassigned(_) => "UTILITY_UNASSIGNED",
            SessionError::PlannerResourceLimit => "PLANNER_RESOURCE_LIMIT",
            SessionError::InvalidConfig(_) => "INVALID_CONFIG",
            SessionError::UnknownProperty(_) => "UNKNOWN_PROPERTY",
            SessionError::CertificationFailed(_) => "CERTIFICATION_FAILED",
            SessionError::Pddl(e) => e.code(),
            SessionError::Property(e) => e.code(),
            SessionError::Mugs(e) => e.code(),
        }
    }

    /// Limits that the caller ran into, as opposed to malformed requests.
    pub fn is_limit(&self) -> bool {
        matches!(
            self,
            SessionError::QuestionsDisabled
                | SessionError::QuestionTooLarge { .. }
                | SessionError::IterationLimit(_)
                | SessionError::TimeLimit(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub questions_enabled: bool,
    pub max_iterations: Option<u32>,
    pub max_question_size: Option<u32>,
    /// Seconds from session start.
    pub time_limit: Option<u64>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig { questions_enabled: true, max_iterations: None, max_question_size: None, time_limit: None }
    }
}

impl StudyConfig {
    /// Settings of the question-less study group.
    pub fn without_questions() -> Self {
        StudyConfig { questions_enabled: false, max_iterations: Some(10), max_question_size: Some(1), time_limit: None }
    }

    /// Settings of the study group that could ask questions.
    pub fn with_questions() -> Self {
        StudyConfig { questions_enabled: true, ..Self::without_questions() }
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        if self.max_iterations == Some(0) {
            return Err(SessionError::InvalidConfig("max_iterations must be positive".into()));
        }
        if self.max_question_size == Some(0) {
            return Err(SessionError::InvalidConfig("max_question_size must be positive".into()));
        }
        if self.time_limit == Some(0) {
            return Err(SessionError::InvalidConfig("time_limit must be positive".into()));
        }
        Ok(())
    }
}
