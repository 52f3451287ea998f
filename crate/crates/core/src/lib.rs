//! Iterative oversubscription planning with plan-space explanations.
//!
//! A task comes from typed-STRIPS PDDL ([`pddl`]), goals come from plan
//! properties ([`properties`]), plans from bounded A* ([`planner`]), and
//! explanations from minimal unsolvable goal subsets ([`mugs`]).

pub mod cli;
pub mod fixtures;
pub mod gateway;
pub mod mugs;
pub mod pddl;
pub mod planner;
pub mod properties;
pub mod session;
pub mod sexpr;
pub mod task;
