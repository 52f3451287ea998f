//! Typed-STRIPS PDDL frontend: parsing, unparsing and grounding into a
//! binary-variable task.
//!
//! Supported requirements are `:strips`, `:typing`, `:negative-preconditions`
//! and `:action-costs` (constant or static-function `total-cost` increases).
//! Problem goals are ignored with a diagnostic; goals come from plan
//! properties.

mod ast;
mod ground;
mod parse;

use thiserror::Error;

pub use ast::*;
pub use ground::{
    canonical_name, ground, ground_with, static_atoms, AtomResolution, GroundAtomTable, Grounding,
    GroundingOptions, GroundingReport, DEFAULT_ACTION_CAP,
};
pub use parse::{parse_domain, parse_problem};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PddlError {
    #[error("syntax error at {line}:{col}: expected {expected}")]
    Syntax { line: usize, col: usize, expected: String },
    #[error("unsupported feature {name} at {line}:{col}")]
    UnsupportedFeature { name: String, line: usize, col: usize },
    #[error("type error: {0}")]
    Type(String),
    #[error("{0}")]
    Semantic(String),
    #[error("grounding exceeds the cap of {cap} actions")]
    GroundingBlowup { cap: usize },
}

impl PddlError {
    pub fn code(&self) -> &'static str {
        match self {
            PddlError::Syntax { .. } => "SYNTAX_ERROR",
            PddlError::UnsupportedFeature { .. } => "UNSUPPORTED_FEATURE",
            PddlError::Type(_) => "TYPE_ERROR",
            PddlError::Semantic(_) => "SEMANTIC_ERROR",
            PddlError::GroundingBlowup { .. } => "GROUNDING_BLOWUP",
        }
    }
}

/// Parses and grounds a domain/problem pair with default options.
pub fn load(domain_text: &str, problem_text: &str) -> Result<(ParsedDomain, ParsedProblem, Grounding), PddlError> {
    let domain = parse_domain(domain_text)?;
    let problem = parse_problem(problem_text, &domain)?;
    let grounding = ground(&domain, &problem)?;
    Ok((domain, problem, grounding))
}
