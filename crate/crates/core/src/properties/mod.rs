//! Plan properties: goal facts, action-set properties and LTLf formulas,
//! natural-language templates, and compilation into goal conditions on an
//! augmented task.

mod compile;
pub mod formula;
pub mod ltlf;
mod property;
mod template;

use thiserror::Error;

use crate::task::TaskError;

pub use compile::{compile_action_set, compile_ltlf, compile_selection, CompiledTask, Monitor, PropertySet};
pub use formula::Formula;
pub use ltlf::{Dfa, LtlfFormula, DEFAULT_DFA_STATE_CAP};
pub use property::{
    evaluate_on_trace, ids, PlanProperty, PropId, PropertyBody, PropertyKind, ResolvedProperty, SetFormula,
    Vocabulary,
};
pub use template::{instantiate_template, PropertyTemplate, TemplateVariable};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PropertyError {
    #[error("formula syntax: {0}")]
    Syntax(String),
    #[error("automaton exceeds the cap of {cap} states")]
    FormulaTooLarge { cap: usize },
    #[error("property {property}: unknown atom {atom}")]
    UnknownAtom { property: PropId, atom: String },
    #[error("property {property}: unknown action {action}")]
    UnknownAction { property: PropId, action: String },
    #[error("property {property}: {message}")]
    KindMismatch { property: PropId, message: String },
    #[error("constraint violated: {0}")]
    ConstraintViolated(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("global hard property {0} missing from the hard goals")]
    MissingGlobalHard(PropId),
    #[error("unknown property {0}")]
    UnknownProperty(PropId),
    #[error("duplicate property id {0}")]
    DuplicateId(PropId),
    #[error("property {0} is both hard and soft")]
    HardSoftOverlap(PropId),
    #[error("property {property}: monitored variable {variable} is changed by a conditional effect")]
    MonitorConflict { property: PropId, variable: String },
    #[error(transparent)]
    Task(TaskError),
}

impl PropertyError {
    pub fn code(&self) -> &'static str {
        match self {
            PropertyError::Syntax(_) => "FORMULA_SYNTAX",
            PropertyError::FormulaTooLarge { .. } => "FORMULA_TOO_LARGE",
            PropertyError::UnknownAtom { .. } => "UNKNOWN_ATOM",
            PropertyError::UnknownAction { .. } => "UNKNOWN_ACTION",
            PropertyError::KindMismatch { .. } => "INVALID_PROPERTY",
            PropertyError::ConstraintViolated(_) => "CONSTRAINT_VIOLATED",
            PropertyError::TypeMismatch(_) => "TYPE_MISMATCH",
            PropertyError::MissingGlobalHard(_) => "MISSING_GLOBAL_HARD",
            PropertyError::UnknownProperty(_) => "UNKNOWN_PROPERTY",
            PropertyError::DuplicateId(_) => "DUPLICATE_PROPERTY",
            PropertyError::HardSoftOverlap(_) => "HARD_SOFT_OVERLAP",
            PropertyError::MonitorConflict { .. } => "MONITOR_CONFLICT",
            PropertyError::Task(TaskError::NotApplicable { .. }) => "NOT_APPLICABLE",
            PropertyError::Task(_) => "INVALID_TASK",
        }
    }
}
