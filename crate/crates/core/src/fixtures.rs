//! Bundled NoMystery instances used by tests, the CLI demo and examples.

use crate::pddl::{self, Grounding};
use crate::properties::{PlanProperty, PropertySet, PropertyTemplate};

pub const NOMYSTERY_DOMAIN: &str = include_str!("../fixtures/nomystery/domain.pddl");
pub const NOMYSTERY_PROBLEM: &str = include_str!("../fixtures/nomystery/problem.pddl");
pub const MICRO_PROBLEM: &str = include_str!("../fixtures/nomystery/micro-problem.pddl");
pub const NOMYSTERY_PROPERTIES: &str = include_str!("../fixtures/nomystery/properties.json");
pub const NOMYSTERY_TEMPLATES: &str = include_str!("../fixtures/nomystery/templates.json");

/// Undirected roads of the bundled map; each costs one fuel unit per use.
pub const NOMYSTERY_ROADS: &[(&str, &str)] = &[
    ("cafe", "packing-station"),
    ("cafe", "blue-house"),
    ("cafe", "green-house"),
    ("packing-station", "post-office"),
    ("green-house", "orange-house"),
    ("orange-house", "post-office"),
];

pub fn nomystery_grounding() -> Grounding {
    pddl::load(NOMYSTERY_DOMAIN, NOMYSTERY_PROBLEM).expect("bundled instance").2
}

pub fn micro_grounding() -> Grounding {
    pddl::load(NOMYSTERY_DOMAIN, MICRO_PROBLEM).expect("bundled instance").2
}

pub fn nomystery_properties() -> Vec<PlanProperty> {
    serde_json::from_str(NOMYSTERY_PROPERTIES).expect("bundled properties")
}

pub fn nomystery_templates() -> Vec<PropertyTemplate> {
    serde_json::from_str(NOMYSTERY_TEMPLATES).expect("bundled templates")
}

pub fn nomystery_property_set() -> PropertySet {
    let g = nomystery_grounding();
    PropertySet::new(g.task, &g.atoms, nomystery_properties()).expect("bundled properties resolve")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roads_match_problem_file() {
        let g = nomystery_grounding();
        for (a, b) in NOMYSTERY_ROADS {
            assert!(g.atoms.static_atoms.contains(&format!("(connected {a} {b})")));
            assert!(g.atoms.static_atoms.contains(&format!("(connected {b} {a})")));
        }
    }

    #[test]
    fn study_utilities_sum_to_fourteen() {
        let total: u32 = nomystery_properties().iter().filter(|p| !p.global_hard).filter_map(|p| p.utility).sum();
        assert_eq!(total, 14);
    }
}
