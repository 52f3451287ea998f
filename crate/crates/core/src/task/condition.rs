use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Fact, State, Variable};

/// Propositional formula over facts. Goal tests accept these in addition to
/// plain fact conjunctions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    True,
    False,
    Fact(Fact),
    Not(Box<Condition>),
    And(Vec<Condition>),
    Or(Vec<Condition>),
}

impl Condition {
    pub fn holds(&self, state: &State) -> bool {
        self.eval(&|f| state.holds(f))
    }

    pub fn eval(&self, truth: &impl Fn(Fact) -> bool) -> bool {
        match self {
            Condition::True => true,
            Condition::False => false,
            Condition::Fact(f) => truth(*f),
            Condition::Not(c) => !c.eval(truth),
            Condition::And(cs) => cs.iter().all(|c| c.eval(truth)),
            Condition::Or(cs) => cs.iter().any(|c| c.eval(truth)),
        }
    }

    pub fn facts(&self) -> BTreeSet<Fact> {
        let mut out = BTreeSet::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut BTreeSet<Fact>) {
        match self {
            Condition::Fact(f) => {
                out.insert(*f);
            }
            Condition::Not(c) => c.collect(out),
            Condition::And(cs) | Condition::Or(cs) => cs.iter().for_each(|c| c.collect(out)),
            Condition::True | Condition::False => {}
        }
    }

    /// Negation-free equivalent. `¬(v=d)` becomes the disjunction of the
    /// other values of `v`.
    pub fn positive_form(&self, variables: &[Variable]) -> Condition {
        self.push_negation(false, variables)
    }

    fn push_negation(&self, negated: bool, variables: &[Variable]) -> Condition {
        match (self, negated) {
            (Condition::True, false) | (Condition::False, true) => Condition::True,
            (Condition::True, true) | (Condition::False, false) => Condition::False,
            (Condition::Fact(f), false) => Condition::Fact(*f),
            (Condition::Fact(f), true) => Condition::Or(
                (0..variables[f.var].size())
                    .filter(|&d| d != f.value)
                    .map(|d| Condition::Fact(Fact::new(f.var, d)))
                    .collect(),
            ),
            (Condition::Not(c), n) => c.push_negation(!n, variables),
            (Condition::And(cs), false) | (Condition::Or(cs), true) => {
                Condition::And(cs.iter().map(|c| c.push_negation(negated, variables)).collect())
            }
            (Condition::And(cs), true) | (Condition::Or(cs), false) => {
                Condition::Or(cs.iter().map(|c| c.push_negation(negated, variables)).collect())
            }
        }
    }

    pub fn conjunction(facts: impl IntoIterator<Item = Fact>) -> Condition {
        Condition::And(facts.into_iter().map(Condition::Fact).collect())
    }
}
