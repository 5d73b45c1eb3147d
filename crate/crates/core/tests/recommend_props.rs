mod common;

use common::oracle::rng;
use drivesafe::domain::{AffectiveState, ContentId};
use drivesafe::recommend::{
    candidate_contents, learn_transitions_in, plan_repair, StateSpace, Target,
};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn viterbi_matches_exhaustive_enumeration() {
    let checked = common::viterbi_sweep(0x5eed).unwrap();
    assert!(checked > 5000);
}

fn random_history(
    r: &mut impl Rng,
    len: usize,
) -> Vec<(AffectiveState, ContentId, AffectiveState)> {
    let mut state = AffectiveState::new(r.random_range(1..=9), r.random_range(1..=9)).unwrap();
    (0..len)
        .map(|_| {
            let c = ContentId(r.random_range(1..=4));
            let next = AffectiveState::new(r.random_range(1..=9), r.random_range(1..=9)).unwrap();
            let step = (state, c, next);
            state = next;
            step
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn argmax_survives_count_scaling(seed in any::<u64>(), k in 2u64..20, coarse in any::<bool>()) {
        let mut r = rng(seed);
        let space = if coarse { StateSpace::Coarse } else { StateSpace::Full };
        let model = learn_transitions_in(&random_history(&mut r, 40), 1.0, space).unwrap();
        let scaled = model.scaled(k).unwrap();
        let start = AffectiveState::new(r.random_range(1..=4), r.random_range(1..=9)).unwrap();
        let ids: Vec<ContentId> = (1..=4).map(ContentId).collect();
        let a = plan_repair(&model, start, &Target::default(), 3, &ids).unwrap();
        let b = plan_repair(&scaled, start, &Target::default(), 3, &ids).unwrap();
        prop_assert_eq!(a.map(|p| p.contents), b.map(|p| p.contents));
    }

    #[test]
    fn learned_conditionals_are_distributions(seed in any::<u64>(), alpha in 0.1f64..3.0, coarse in any::<bool>()) {
        let mut r = rng(seed);
        let space = if coarse { StateSpace::Coarse } else { StateSpace::Full };
        let model = learn_transitions_in(&random_history(&mut r, 60), alpha, space).unwrap();
        for _ in 0..10 {
            let from = space.state(r.random_range(0..space.size())).unwrap();
            let c = ContentId(r.random_range(1..=5));
            let total: f64 = (0..space.size()).map(|i| model.probability(from, c, space.state(i).unwrap())).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn plans_are_reproducible(seed in any::<u64>()) {
        let mut r = rng(seed);
        let history = random_history(&mut r, 30);
        let ids: Vec<ContentId> = (1..=4).map(ContentId).collect();
        let start = AffectiveState::new(2, 8).unwrap();
        let once = |h: &[_]| {
            let m = learn_transitions_in(h, 1.0, StateSpace::Full).unwrap();
            serde_json::to_string(&plan_repair(&m, start, &Target::default(), 4, &ids).unwrap()).unwrap()
        };
        prop_assert_eq!(once(&history), once(&history));
    }

    #[test]
    fn candidates_are_deduplicated_and_ranked(seed in any::<u64>()) {
        use common::oracle::random_db;
        let db = random_db(&mut rng(seed), 12);
        let rules = drivesafe::mining::mine_rules(&db, 0.1, 0.0).unwrap();
        let catalog: Vec<ContentId> = [5, 20, 33].map(ContentId).to_vec();
        for tx in &db {
            let context = tx.context_only();
            let got = candidate_contents(&rules, &context, &catalog);
            let mut seen = std::collections::BTreeSet::new();
            prop_assert!(got.iter().all(|c| seen.insert(*c)));
            let matched: Vec<_> = rules.iter().filter(|r| r.applies_to(&context)).collect();
            if matched.is_empty() {
                prop_assert_eq!(&got, &catalog);
            } else {
                let best = matched.iter().map(|r| r.confidence).fold(f64::MIN, f64::max);
                let top = matched
                    .iter()
                    .filter(|r| r.confidence == best)
                    .min_by(|a, b| b.support.total_cmp(&a.support).then(a.consequent.cmp(&b.consequent)))
                    .unwrap();
                prop_assert_eq!(got[0], top.consequent);
            }
        }
    }
}
