mod support;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use planspace::mugs::{brute_force_mugs, certify, compute_mugs, MugsOptions, Strategy as MugsStrategy, Verdict};
use planspace::planner::{search, SearchConfig, SearchStatus};
use planspace::properties::{PropId, PropertySet};

use support::{random_action_set, random_task, random_walk, ucs, vocabulary, Transport};

fn universe(n: u32) -> Vec<PropId> {
    (1..=n).map(PropId::from).collect()
}

/// Random antichain-generating families: a subset is unsolvable when it
/// contains one of the blocks. With `witness`, solvable answers report the
/// maximal solvable superset reachable greedily, as a real planner might.
fn blocks_oracle(blocks: Vec<BTreeSet<PropId>>, all: Vec<PropId>, witness: bool) -> impl Fn(&BTreeSet<PropId>) -> Verdict + Sync {
    move |s: &BTreeSet<PropId>| {
        let bad = |s: &BTreeSet<PropId>| blocks.iter().any(|b| b.is_subset(s));
        if bad(s) {
            return Verdict::Unsolvable;
        }
        if !witness {
            return Verdict::Solvable { witness: None };
        }
        let mut w = s.clone();
        for p in &all {
            w.insert(p.clone());
            if bad(&w) {
                w.remove(p);
            }
        }
        Verdict::Solvable { witness: Some(w) }
    }
}

fn arb_blocks() -> impl Strategy<Value = (u32, Vec<BTreeSet<PropId>>)> {
    (1u32..=8).prop_flat_map(|n| {
        let block = prop::collection::btree_set(1..=n, 1..=n.min(4) as usize)
            .prop_map(|s| s.into_iter().map(PropId::from).collect::<BTreeSet<_>>());
        (Just(n), prop::collection::vec(block, 0..5))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn mugs_equal_brute_force((n, blocks) in arb_blocks(), witness in any::<bool>()) {
        let u = universe(n);
        let oracle = blocks_oracle(blocks, u.clone(), witness);
        let expected = brute_force_mugs(&u, &oracle).unwrap();
        for strategy in [MugsStrategy::TopDown, MugsStrategy::BottomUp] {
            for parallel in [false, true] {
                let catalog = compute_mugs(&u, &oracle, &MugsOptions { strategy, parallel }).unwrap();
                prop_assert_eq!(&catalog.mugs, &expected);
                prop_assert!(certify(&catalog, &oracle).is_empty());
            }
        }
    }

    #[test]
    fn planner_matches_uniform_cost(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let (_, set) = random_task(&mut rng, 3);
        let subset: BTreeSet<PropId> = set.ids().into_iter().filter(|_| rng.gen_bool(0.5)).collect();
        let compiled = set.compile(&set.ids()).unwrap();
        let goal = compiled.goal_for(&subset);
        if let Some(reference) = ucs(&compiled.task, &goal, 100_000) {
            let r = search(&compiled.task, &goal, &SearchConfig::default());
            match reference {
                None => prop_assert_eq!(r.status, SearchStatus::Unsolvable),
                Some(cost) => {
                    prop_assert_eq!(r.status, SearchStatus::Solved);
                    prop_assert_eq!(r.plan.unwrap().cost, cost);
                }
            }
        }
    }

    #[test]
    fn compiled_goal_agrees_with_trace(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let t = Transport::random(&mut rng);
        let g = t.ground();
        let (_, actions) = vocabulary(&g);
        let property = random_action_set(&mut rng, 1, &actions);
        let set = PropertySet::new(g.task.clone(), &g.atoms, vec![property]).unwrap();
        let compiled = set.compile(&set.ids()).unwrap();
        let id = PropId::from(1u32);
        for _ in 0..4 {
            let plan = random_walk(&mut rng, &g.task, 6);
            prop_assert_eq!(set.evaluate(&id, &plan).unwrap(), compiled.satisfied(&plan).unwrap().contains(&id));
        }
    }
}
