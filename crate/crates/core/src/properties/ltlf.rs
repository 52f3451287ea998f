//! LTL over finite traces: direct trace semantics and DFA construction by
//! formula progression.
//!
//! A trace of a plan `a1..an` from `s0` has positions `0..=n`. Position `i`
//! carries the state `s_i` and the action `a_i` that produced it; position 0
//! carries no action, so action atoms are false there.

use std::collections::{BTreeSet, HashMap};

use crate::task::{ActionId, Fact, State};

use super::PropertyError;

pub const DEFAULT_DFA_STATE_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LtlAtom {
    Fact(Fact),
    /// Occurrence of any of these actions at the current position.
    Action(BTreeSet<ActionId>),
}

/// Formula over indices into an atom table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ltl {
    True,
    False,
    Atom(usize),
    Not(Box<Ltl>),
    And(Vec<Ltl>),
    Or(Vec<Ltl>),
    Next(Box<Ltl>),
    WeakNext(Box<Ltl>),
    Until(Box<Ltl>, Box<Ltl>),
    Release(Box<Ltl>, Box<Ltl>),
    Eventually(Box<Ltl>),
    Always(Box<Ltl>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LtlfFormula {
    pub atoms: Vec<LtlAtom>,
    pub root: Ltl,
}

impl LtlfFormula {
    fn atom_truth(&self, index: usize, state: &State, action: Option<ActionId>) -> bool {
        match &self.atoms[index] {
            LtlAtom::Fact(f) => state.holds(*f),
            LtlAtom::Action(ids) => action.is_some_and(|a| ids.contains(&a)),
        }
    }

    /// Evaluates on the trace `states[0..]` with `actions[i-1]` producing `states[i]`.
    pub fn evaluate(&self, states: &[State], actions: &[ActionId]) -> bool {
        assert_eq!(states.len(), actions.len() + 1, "trace shape");
        let mut memo = HashMap::new();
        self.eval_at(&self.root, 0, states, actions, &mut memo)
    }

    fn eval_at(
        &self,
        f: &Ltl,
        i: usize,
        states: &[State],
        actions: &[ActionId],
        memo: &mut HashMap<(*const Ltl, usize), bool>,
    ) -> bool {
        let last = states.len() - 1;
        let key = (f as *const Ltl, i);
        if let Some(&v) = memo.get(&key) {
            return v;
        }
        let value = match f {
            Ltl::True => true,
            Ltl::False => false,
            Ltl::Atom(a) => {
                let action = if i == 0 { None } else { Some(actions[i - 1]) };
                self.atom_truth(*a, &states[i], action)
            }
            Ltl::Not(g) => !self.eval_at(g, i, states, actions, memo),
            Ltl::And(gs) => gs.iter().all(|g| self.eval_at(g, i, states, actions, memo)),
            Ltl::Or(gs) => gs.iter().any(|g| self.eval_at(g, i, states, actions, memo)),
            Ltl::Next(g) => i < last && self.eval_at(g, i + 1, states, actions, memo),
            Ltl::WeakNext(g) => i == last || self.eval_at(g, i + 1, states, actions, memo),
            Ltl::Until(a, b) => (i..=last).any(|j| {
                self.eval_at(b, j, states, actions, memo)
                    && (i..j).all(|k| self.eval_at(a, k, states, actions, memo))
            }),
            Ltl::Release(a, b) => (i..=last).all(|j| {
                self.eval_at(b, j, states, actions, memo)
                    || (i..j).any(|k| self.eval_at(a, k, states, actions, memo))
            }),
            Ltl::Eventually(g) => (i..=last).any(|j| self.eval_at(g, j, states, actions, memo)),
            Ltl::Always(g) => (i..=last).all(|j| self.eval_at(g, j, states, actions, memo)),
        };
        memo.insert(key, value);
        value
    }
}

/// Negation normal form with two extra constants used by progression:
/// `Alive` holds at every position but not on the empty suffix, `Dead` only
/// on the empty suffix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Nnf {
    False,
    True,
    Alive,
    Dead,
    Lit(usize, bool),
    And(Vec<Nnf>),
    Or(Vec<Nnf>),
    Next(Box<Nnf>),
    WeakNext(Box<Nnf>),
    Until(Box<Nnf>, Box<Nnf>),
    Release(Box<Nnf>, Box<Nnf>),
    Eventually(Box<Nnf>),
    Always(Box<Nnf>),
}

pub fn to_nnf(f: &Ltl) -> Nnf {
    nnf(f, false)
}

fn nnf(f: &Ltl, neg: bool) -> Nnf {
    let b = |g: &Ltl, n: bool| Box::new(nnf(g, n));
    match (f, neg) {
        (Ltl::True, false) | (Ltl::False, true) => Nnf::True,
        (Ltl::True, true) | (Ltl::False, false) => Nnf::False,
        (Ltl::Atom(a), n) => Nnf::Lit(*a, !n),
        (Ltl::Not(g), n) => nnf(g, !n),
        (Ltl::And(gs), false) | (Ltl::Or(gs), true) => Nnf::And(gs.iter().map(|g| nnf(g, neg)).collect()),
        (Ltl::And(gs), true) | (Ltl::Or(gs), false) => Nnf::Or(gs.iter().map(|g| nnf(g, neg)).collect()),
        (Ltl::Next(g), false) => Nnf::Next(b(g, false)),
        (Ltl::Next(g), true) => Nnf::WeakNext(b(g, true)),
        (Ltl::WeakNext(g), false) => Nnf::WeakNext(b(g, false)),
        (Ltl::WeakNext(g), true) => Nnf::Next(b(g, true)),
        (Ltl::Until(x, y), false) => Nnf::Until(b(x, false), b(y, false)),
        (Ltl::Until(x, y), true) => Nnf::Release(b(x, true), b(y, true)),
        (Ltl::Release(x, y), false) => Nnf::Release(b(x, false), b(y, false)),
        (Ltl::Release(x, y), true) => Nnf::Until(b(x, true), b(y, true)),
        (Ltl::Eventually(g), false) => Nnf::Eventually(b(g, false)),
        (Ltl::Eventually(g), true) => Nnf::Always(b(g, true)),
        (Ltl::Always(g), false) => Nnf::Always(b(g, false)),
        (Ltl::Always(g), true) => Nnf::Eventually(b(g, true)),
    }
}

/// Reduced disjunctive normal form over non-boolean leaves. Progression only
/// ever produces boolean combinations of subformulas of the start formula,
/// so normalising this way bounds the number of distinct DFA states.
pub fn simplify(f: Nnf) -> Nnf {
    let mut cs = clauses(&f);
    cs.retain(|c| {
        !c.iter().any(|g| match g {
            Nnf::Lit(a, p) => c.contains(&Nnf::Lit(*a, !p)),
            Nnf::Alive => c.contains(&Nnf::Dead),
            _ => false,
        })
    });
    cs.sort_by_key(|c| c.len());
    cs.dedup();
    let mut kept: Vec<BTreeSet<Nnf>> = Vec::new();
    for c in cs {
        if !kept.iter().any(|k| k.is_subset(&c)) {
            kept.push(c);
        }
    }
    let mut disjuncts: Vec<Nnf> = kept
        .into_iter()
        .map(|c| match c.len() {
            0 => Nnf::True,
            1 => c.into_iter().next().expect("one"),
            _ => Nnf::And(c.into_iter().collect()),
        })
        .collect();
    disjuncts.sort();
    match disjuncts.len() {
        0 => Nnf::False,
        1 => disjuncts.pop().expect("one"),
        _ => Nnf::Or(disjuncts),
    }
}

fn clauses(f: &Nnf) -> Vec<BTreeSet<Nnf>> {
    match f {
        Nnf::True => vec![BTreeSet::new()],
        Nnf::False => Vec::new(),
        Nnf::Or(gs) => gs.iter().flat_map(clauses).collect(),
        Nnf::And(gs) => gs.iter().fold(vec![BTreeSet::new()], |acc, g| {
            let right = clauses(g);
            let mut out = Vec::with_capacity(acc.len() * right.len());
            for l in &acc {
                for r in &right {
                    out.push(l.union(r).cloned().collect());
                }
            }
            out
        }),
        leaf => vec![BTreeSet::from([leaf.clone()])],
    }
}

/// Whether the remaining obligation holds on the empty suffix.
pub fn accepts_empty(f: &Nnf) -> bool {
    match f {
        Nnf::True | Nnf::Dead | Nnf::WeakNext(_) | Nnf::Release(..) | Nnf::Always(_) => true,
        Nnf::False | Nnf::Alive | Nnf::Lit(..) | Nnf::Next(_) | Nnf::Until(..) | Nnf::Eventually(_) => false,
        Nnf::And(gs) => gs.iter().all(accepts_empty),
        Nnf::Or(gs) => gs.iter().any(accepts_empty),
    }
}

/// Obligation on the suffix after reading one letter (a bitmask of true atoms).
pub fn progress(f: &Nnf, letter: u64) -> Nnf {
    let p = match f {
        Nnf::True | Nnf::Alive => Nnf::True,
        Nnf::False | Nnf::Dead => Nnf::False,
        Nnf::Lit(a, positive) => {
            if (letter >> a & 1 == 1) == *positive {
                Nnf::True
            } else {
                Nnf::False
            }
        }
        Nnf::And(gs) => Nnf::And(gs.iter().map(|g| progress(g, letter)).collect()),
        Nnf::Or(gs) => Nnf::Or(gs.iter().map(|g| progress(g, letter)).collect()),
        Nnf::Next(g) => Nnf::And(vec![(**g).clone(), Nnf::Alive]),
        Nnf::WeakNext(g) => Nnf::Or(vec![(**g).clone(), Nnf::Dead]),
        Nnf::Until(a, b) => Nnf::Or(vec![
            progress(b, letter),
            Nnf::And(vec![progress(a, letter), f.clone()]),
        ]),
        Nnf::Release(a, b) => Nnf::And(vec![
            progress(b, letter),
            Nnf::Or(vec![progress(a, letter), f.clone()]),
        ]),
        Nnf::Eventually(g) => Nnf::Or(vec![progress(g, letter), f.clone()]),
        Nnf::Always(g) => Nnf::And(vec![progress(g, letter), f.clone()]),
    };
    simplify(p)
}

/// Deterministic automaton over letters. State 0 is the initial state, which
/// has read nothing yet; every plan trace is nonempty, so the first letter is
/// always the initial task state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dfa {
    pub states: Vec<Nnf>,
    pub accepting: Vec<bool>,
    /// Letters the automaton was built over; `transitions[q][k]` is the
    /// successor of `q` on `letters[k]`.
    pub letters: Vec<u64>,
    pub transitions: Vec<Vec<usize>>,
}

impl Dfa {
    /// Builds the automaton eagerly over the given letter set.
    pub fn build(formula: &Ltl, letters: Vec<u64>, cap: usize) -> Result<Dfa, PropertyError> {
        let start = simplify(to_nnf(formula));
        let mut index: HashMap<Nnf, usize> = HashMap::new();
        let mut states = vec![start.clone()];
        index.insert(start, 0);
        let mut transitions: Vec<Vec<usize>> = Vec::new();
        let mut q = 0;
        while q < states.len() {
            let mut row = Vec::with_capacity(letters.len());
            for &letter in &letters {
                let next = progress(&states[q], letter);
                let id = match index.get(&next) {
                    Some(&id) => id,
                    None => {
                        if states.len() >= cap {
                            return Err(PropertyError::FormulaTooLarge { cap });
                        }
                        states.push(next.clone());
                        index.insert(next, states.len() - 1);
                        states.len() - 1
                    }
                };
                row.push(id);
            }
            transitions.push(row);
            q += 1;
        }
        let accepting = states.iter().map(accepts_empty).collect();
        Ok(Dfa { states, accepting, letters, transitions })
    }

    pub fn step(&self, q: usize, letter: u64) -> usize {
        let k = self
            .letters
            .iter()
            .position(|&l| l == letter)
            .expect("letter in automaton alphabet");
        self.transitions[q][k]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// States reachable after at least one letter; the pre-trace state is
    /// only included if some letter returns to it.
    pub fn live_states(&self) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<usize> = self.transitions[0].clone();
        while let Some(q) = stack.pop() {
            if seen.insert(q) {
                stack.extend(self.transitions[q].iter().copied());
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn atom(i: usize) -> Ltl {
        Ltl::Atom(i)
    }

    /// All letters over `n` atoms.
    fn letters(n: usize) -> Vec<u64> {
        (0..1u64 << n).collect()
    }

    /// Runs the DFA and the direct semantics over every word of length 1..=4.
    fn cross_check(f: &Ltl, n: usize) {
        let facts: Vec<LtlAtom> = (0..n).map(|i| LtlAtom::Fact(Fact::new(i, 1))).collect();
        let formula = LtlfFormula { atoms: facts, root: f.clone() };
        let dfa = Dfa::build(f, letters(n), 512).unwrap();
        let alphabet = letters(n);
        let mut words: Vec<Vec<u64>> = alphabet.iter().map(|&l| vec![l]).collect();
        for _ in 0..3 {
            let longer: Vec<Vec<u64>> = words
                .iter()
                .filter(|w| w.len() == words.last().unwrap().len())
                .flat_map(|w| alphabet.iter().map(move |&l| [w.clone(), vec![l]].concat()))
                .collect();
            words.extend(longer);
        }
        for w in words {
            let states: Vec<State> = w
                .iter()
                .map(|&l| State::new((0..n).map(|i| (l >> i & 1) as usize).collect()))
                .collect();
            let actions = vec![0; w.len() - 1];
            let direct = formula.evaluate(&states, &actions);
            let q = w.iter().fold(0, |q, &l| dfa.step(q, l));
            assert_eq!(dfa.accepting[q], direct, "formula {f:?} word {w:?}");
        }
    }

    #[test]
    fn always_true_single_state() {
        let dfa = Dfa::build(&Ltl::Always(Box::new(Ltl::True)), letters(1), 16).unwrap();
        assert_eq!(dfa.len(), 1);
        assert!(dfa.accepting[0]);
    }

    #[test]
    fn until_has_three_states() {
        // ¬b U a
        let f = Ltl::Until(Box::new(Ltl::Not(Box::new(atom(1)))), Box::new(atom(0)));
        let dfa = Dfa::build(&f, letters(2), 16).unwrap();
        assert_eq!(dfa.len(), 3);
        cross_check(&f, 2);
    }

    #[test]
    fn progression_matches_semantics() {
        let a = || Box::new(atom(0));
        let b = || Box::new(atom(1));
        let cases = vec![
            Ltl::Next(a()),
            Ltl::WeakNext(a()),
            Ltl::Not(Box::new(Ltl::Next(a()))),
            Ltl::Eventually(Box::new(Ltl::And(vec![atom(0), Ltl::Next(b())]))),
            Ltl::Always(Box::new(Ltl::Or(vec![Ltl::Not(a()), Ltl::Eventually(b())]))),
            Ltl::Release(a(), b()),
            Ltl::Not(Box::new(Ltl::Until(a(), b()))),
            Ltl::Always(Box::new(Ltl::Next(Ltl::True.into()))),
            Ltl::Eventually(Box::new(Ltl::Always(a()))),
        ];
        for f in cases {
            cross_check(&f, 2);
        }
    }

    #[test]
    fn cap_enforced() {
        let f = Ltl::Next(Box::new(Ltl::Next(Box::new(Ltl::Next(Box::new(atom(0)))))));
        assert_eq!(
            Dfa::build(&f, letters(1), 2).unwrap_err(),
            PropertyError::FormulaTooLarge { cap: 2 }
        );
    }

    #[test]
    fn nested_until_stays_finite() {
        // (G a) U (G b & G c)
        let g = |i| Ltl::Always(Box::new(atom(i)));
        let f = Ltl::Until(Box::new(g(0)), Box::new(Ltl::And(vec![g(1), g(2)])));
        let dfa = Dfa::build(&f, letters(3), 32).unwrap();
        assert!(dfa.len() <= 8, "{} states", dfa.len());
        cross_check(&f, 3);
    }

    fn arb_ltl() -> impl Strategy<Value = Ltl> {
        let leaf = prop_oneof![Just(Ltl::True), Just(Ltl::False), (0..3usize).prop_map(Ltl::Atom)];
        leaf.prop_recursive(3, 16, 2, |inner| {
            let b = |g: Ltl| Box::new(g);
            prop_oneof![
                inner.clone().prop_map(move |g| Ltl::Not(b(g))),
                prop::collection::vec(inner.clone(), 2).prop_map(Ltl::And),
                prop::collection::vec(inner.clone(), 2).prop_map(Ltl::Or),
                inner.clone().prop_map(move |g| Ltl::Next(b(g))),
                inner.clone().prop_map(move |g| Ltl::WeakNext(b(g))),
                (inner.clone(), inner.clone()).prop_map(move |(x, y)| Ltl::Until(b(x), b(y))),
                (inner.clone(), inner.clone()).prop_map(move |(x, y)| Ltl::Release(b(x), b(y))),
                inner.clone().prop_map(move |g| Ltl::Eventually(b(g))),
                inner.prop_map(move |g| Ltl::Always(b(g))),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn automaton_matches_trace_semantics(f in arb_ltl()) {
            cross_check(&f, 3);
        }
    }
}
