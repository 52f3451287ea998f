//! Generators and reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::cmp::Reverse;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

use planspace::fixtures;
use planspace::pddl::{self, Grounding};
use planspace::properties::{Formula, PlanProperty, PropertySet, ResolvedProperty};
use planspace::task::{apply_action, Condition, OspTask, Plan, State};

/// A small transport instance on the bundled transport domain.
#[derive(Debug, Clone)]
pub struct Transport {
    pub locations: usize,
    pub roads: Vec<(usize, usize)>,
    /// Start location and fuel per truck.
    pub trucks: Vec<(usize, usize)>,
    pub packages: Vec<usize>,
    pub max_fuel: usize,
}

impl Transport {
    pub fn random(rng: &mut StdRng) -> Transport {
        let locations = rng.gen_range(3..=4);
        let mut roads: Vec<(usize, usize)> = (1..locations).map(|i| (rng.gen_range(0..i), i)).collect();
        for _ in 0..rng.gen_range(0..=1) {
            let (a, b) = (rng.gen_range(0..locations), rng.gen_range(0..locations));
            if a != b && !roads.contains(&(a.min(b), a.max(b))) {
                roads.push((a.min(b), a.max(b)));
            }
        }
        let max_fuel = 3;
        let trucks = (0..rng.gen_range(1..=2)).map(|_| (rng.gen_range(0..locations), rng.gen_range(1..=max_fuel))).collect();
        let packages = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(0..locations)).collect();
        Transport { locations, roads, trucks, packages, max_fuel }
    }

    pub fn problem(&self) -> String {
        let locs: Vec<String> = (0..self.locations).map(|i| format!("l{i}")).collect();
        let trucks: Vec<String> = (0..self.trucks.len()).map(|i| format!("t{i}")).collect();
        let pkgs: Vec<String> = (0..self.packages.len()).map(|i| format!("p{i}")).collect();
        let fuels: Vec<String> = (0..=self.max_fuel).map(|i| format!("f{i}")).collect();
        let mut init = Vec::new();
        for (i, &(at, fuel)) in self.trucks.iter().enumerate() {
            init.push(format!("(at t{i} l{at})"));
            init.push(format!("(fuel t{i} f{fuel})"));
        }
        for (i, &at) in self.packages.iter().enumerate() {
            init.push(format!("(at p{i} l{at})"));
        }
        for &(a, b) in &self.roads {
            init.push(format!("(connected l{a} l{b})"));
            init.push(format!("(connected l{b} l{a})"));
        }
        for i in 0..self.max_fuel {
            init.push(format!("(fuel-predecessor f{i} f{})", i + 1));
        }
        format!(
            "(define (problem random) (:domain nomystery)\n (:objects {} - truck {} - package {} - location {} - fuellevel)\n (:init {}))",
            trucks.join(" "),
            pkgs.join(" "),
            locs.join(" "),
            fuels.join(" "),
            init.join(" ")
        )
    }

    pub fn ground(&self) -> Grounding {
        pddl::load(fixtures::NOMYSTERY_DOMAIN, &self.problem()).expect("generated instance grounds").2
    }

    fn truck(&self, rng: &mut StdRng) -> String {
        format!("t{}", rng.gen_range(0..self.trucks.len()))
    }

    fn package(&self, rng: &mut StdRng) -> String {
        format!("p{}", rng.gen_range(0..self.packages.len()))
    }

    fn location(&self, rng: &mut StdRng) -> String {
        format!("l{}", rng.gen_range(0..self.locations))
    }

    /// One random property of any kind, referring to this instance's objects.
    pub fn random_property(&self, rng: &mut StdRng, id: u32) -> PlanProperty {
        let text = format!("property {id}");
        match rng.gen_range(0..7) {
            0 | 1 => PlanProperty::goal_fact(id, text, format!("(at {} {})", self.package(rng), self.location(rng))),
            2 => PlanProperty::goal_fact(id, text, format!("(at {} {})", self.truck(rng), self.location(rng))),
            3 => {
                let &(a, b) = self.roads.choose(rng).expect("connected map");
                let t = self.truck(rng);
                let road = vec![format!("(drive {t} l{a} l{b} * *)"), format!("(drive {t} l{b} l{a} * *)")];
                PlanProperty::action_set(id, text, "(not (used road))", [("road".to_string(), road)])
            }
            4 => {
                let sets = [
                    ("a".to_string(), vec![format!("(load {} {} *)", self.package(rng), self.truck(rng))]),
                    ("b".to_string(), vec![format!("(drive {} * {} * *)", self.truck(rng), self.location(rng))]),
                ];
                let formula = ["(used a)", "(and (used a) (not (used b)))", "(or (used a) (used b))"].choose(rng).unwrap();
                PlanProperty::action_set(id, text, *formula, sets)
            }
            5 => {
                let (p, q) = (self.package(rng), self.package(rng));
                let (l1, l2) = (self.location(rng), self.location(rng));
                PlanProperty::ltlf(id, text, format!("(until (not (holds (at {p} {l1}))) (holds (at {q} {l2})))"))
            }
            _ => {
                let (t, l) = (self.truck(rng), self.location(rng));
                let f = ["(always (not (holds (at {t} {l}))))", "(eventually (occurs (unload * {t} {l})))"].choose(rng).unwrap();
                PlanProperty::ltlf(id, text, f.replace("{t}", &t).replace("{l}", &l))
            }
        }
    }

    /// `n` resolvable properties with ids 1..=n.
    pub fn random_properties(&self, rng: &mut StdRng, g: &Grounding, n: u32) -> Vec<PlanProperty> {
        (1..=n)
            .map(|id| loop {
                let p = self.random_property(rng, id).with_utility(1);
                if ResolvedProperty::resolve(&p, &g.atoms).is_ok() {
                    break p;
                }
            })
            .collect()
    }
}

/// A transport instance with `n` random soft properties, resampled until
/// the property set builds.
pub fn random_task(rng: &mut StdRng, n: u32) -> (Transport, PropertySet) {
    loop {
        let t = Transport::random(rng);
        let g = t.ground();
        let props = t.random_properties(rng, &g, n);
        if let Ok(set) = PropertySet::new(g.task, &g.atoms, props) {
            return (t, set);
        }
    }
}

/// Optimal plan cost by uniform-cost search over explicit states, ignoring
/// any bound; `None` if the goal is unreachable or more than `cap` states
/// are reachable.
pub fn ucs(task: &OspTask, goal: &Condition, cap: usize) -> Option<Option<u64>> {
    let mut dist: HashMap<State, u64> = HashMap::new();
    let mut queue = BinaryHeap::new();
    dist.insert(task.initial.clone(), 0);
    queue.push(Reverse((0u64, task.initial.clone())));
    while let Some(Reverse((d, s))) = queue.pop() {
        if dist.get(&s).is_some_and(|&best| best < d) {
            continue;
        }
        if goal.holds(&s) {
            return Some(Some(d));
        }
        for a in &task.actions {
            if !a.is_applicable(&s) {
                continue;
            }
            let next = apply_action(&s, a).expect("applicable");
            let nd = d + a.cost;
            if dist.get(&next).is_none_or(|&best| nd < best) {
                if dist.len() >= cap {
                    return None;
                }
                dist.insert(next.clone(), nd);
                queue.push(Reverse((nd, next)));
            }
        }
    }
    Some(None)
}

/// A random applicable action sequence of up to `max_len` steps.
pub fn random_walk(rng: &mut StdRng, task: &OspTask, max_len: usize) -> Plan {
    let mut s = task.initial.clone();
    let mut steps = Vec::new();
    for _ in 0..rng.gen_range(0..=max_len) {
        let applicable: Vec<_> = task.actions.iter().filter(|a| a.is_applicable(&s)).collect();
        let Some(a) = applicable.choose(rng) else { break };
        s = apply_action(&s, a).expect("applicable");
        steps.push(a.id);
    }
    Plan::new(task, steps).expect("walk is valid")
}

/// Fluent atoms (those some action changes) and ground action names.
pub fn vocabulary(g: &Grounding) -> (Vec<String>, Vec<String>) {
    let atoms = g.atoms.var_to_atom.clone();
    let actions = g.task.actions.iter().map(|a| a.name.clone()).collect();
    (atoms, actions)
}

/// Random LTLf formula over `atoms` (static facts are excluded by the
/// caller) and action names, with occasional wildcards.
pub fn random_ltlf(rng: &mut StdRng, atoms: &[String], actions: &[String], depth: u32) -> Formula {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..10) {
            0 => Formula::True,
            1 => Formula::False,
            2..=5 => Formula::Holds(atoms.choose(rng).unwrap().clone()),
            _ => {
                let name = actions.choose(rng).unwrap();
                let mut parts: Vec<String> = name.trim_matches(|c| c == '(' || c == ')').split(' ').map(str::to_string).collect();
                for p in parts.iter_mut().skip(1) {
                    if rng.gen_bool(0.3) {
                        *p = "*".into();
                    }
                }
                Formula::Occurs(format!("({})", parts.join(" ")))
            }
        };
    }
    let sub = |rng: &mut StdRng| Box::new(random_ltlf(rng, atoms, actions, depth - 1));
    match rng.gen_range(0..11) {
        0 => Formula::Not(sub(rng)),
        1 => Formula::And(vec![*sub(rng), *sub(rng)]),
        2 => Formula::Or(vec![*sub(rng), *sub(rng)]),
        3 => Formula::Implies(sub(rng), sub(rng)),
        4 => Formula::Next(sub(rng)),
        5 => Formula::WeakNext(sub(rng)),
        6 => Formula::Until(sub(rng), sub(rng)),
        7 => Formula::Release(sub(rng), sub(rng)),
        8 => Formula::Eventually(sub(rng)),
        _ => Formula::Always(sub(rng)),
    }
}

/// Random ACTION_SET property: up to three named sets of patterns and a
/// random Boolean formula over `(used ...)`.
pub fn random_action_set(rng: &mut StdRng, id: u32, actions: &[String]) -> PlanProperty {
    let n = rng.gen_range(1..=3);
    let mut sets = BTreeMap::new();
    for k in 0..n {
        let members = (0..rng.gen_range(1..=3)).map(|_| actions.choose(rng).unwrap().clone()).collect();
        sets.insert(format!("s{k}"), members);
    }
    let names: Vec<String> = sets.keys().cloned().collect();
    let formula = random_set_formula(rng, &names, 2);
    PlanProperty::action_set(id, format!("random {id}"), formula.to_string(), sets)
}

fn random_set_formula(rng: &mut StdRng, names: &[String], depth: u32) -> Formula {
    if depth == 0 || rng.gen_bool(0.35) {
        return Formula::Used(names.choose(rng).unwrap().clone());
    }
    match rng.gen_range(0..4) {
        0 => Formula::Not(Box::new(random_set_formula(rng, names, depth - 1))),
        1 => Formula::And(vec![random_set_formula(rng, names, depth - 1), random_set_formula(rng, names, depth - 1)]),
        2 => Formula::Or(vec![random_set_formula(rng, names, depth - 1), random_set_formula(rng, names, depth - 1)]),
        _ => Formula::Implies(
            Box::new(random_set_formula(rng, names, depth - 1)),
            Box::new(random_set_formula(rng, names, depth - 1)),
        ),
    }
}

pub fn set(ids: &[u32]) -> BTreeSet<planspace::properties::PropId> {
    planspace::properties::ids(ids.iter().copied())
}

/// The ten-set catalog used by the question-answering fixtures.
pub fn reference_catalog() -> planspace::mugs::MugsCatalog {
    let sets: Vec<&[u32]> = vec![
        &[2, 4, 9],
        &[2, 6],
        &[3, 6, 9],
        &[3, 8],
        &[4, 6, 9, 10],
        &[4, 7, 9],
        &[5, 6],
        &[5, 7],
        &[6, 8, 10],
        &[7, 8],
    ];
    planspace::mugs::MugsCatalog::from_sets(set(&[2, 3, 4, 5, 6, 7, 8, 9, 10, 11]), sets.into_iter().map(set).collect())
}

/// Sends one request to the router and returns status and JSON body
/// (`Null` when the body is not JSON).
pub async fn call(
    app: &axum::Router,
    method: &str,
    uri: &str,
    body: Option<serde_json::Value>,
) -> (axum::http::StatusCode, serde_json::Value) {
    use tower::ServiceExt;
    let req = axum::http::Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or(axum::body::Body::empty(), |b| axum::body::Body::from(b.to_string()))).expect("request");
    let resp = app.clone().oneshot(req).await.expect("infallible");
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.expect("body");
    (status, serde_json::from_slice(&bytes).unwrap_or(serde_json::Value::Null))
}

/// Properties for the one-truck, one-package micro instance: 1 is global,
/// 2 needs fuel the truck does not have after delivering, 3 is free.
pub fn micro_properties() -> Vec<PlanProperty> {
    vec![
        PlanProperty::goal_fact("1", "p at l2", "(at p l2)").with_utility(0).globally_hard(),
        PlanProperty::goal_fact("2", "t back at l1", "(at t l1)").with_utility(2),
        PlanProperty::goal_fact("3", "t at l2", "(at t l2)").with_utility(1),
    ]
}
