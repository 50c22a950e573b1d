use std::collections::BTreeSet;

use proptest::prelude::*;
use rrimpute::data::{missing_profile, DataMatrix, SubsetSpec, VariableKind, VariableMeta};
use rrimpute::evaluation::{kl_per_variable, paired_t_test, BinningPolicy};
use rrimpute::orderer::{containment_ok, plan_order, PlanMode};
use rrimpute::regressors::RegressorSpec;
use rrimpute::roundrobin::{self, RoundRobinConfig};

/// An `n x p` matrix where every column keeps at least two observed cells.
fn matrix(max_n: usize, max_p: usize) -> impl Strategy<Value = DataMatrix> {
    (4..=max_n, 1..=max_p).prop_flat_map(|(n, p)| {
        (
            prop::collection::vec(-50.0f64..50.0, n * p),
            prop::collection::vec(prop::bool::weighted(0.3), n * p),
        )
            .prop_map(move |(values, mut mask)| {
                for j in 0..p {
                    mask[j] = false;
                    mask[p + j] = false;
                }
                DataMatrix::new(n, p, values, mask).unwrap()
            })
    })
}

fn strategy_name() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["mean", "median", "br", "dt", "et", "knn"])
}

fn quick() -> RoundRobinConfig {
    RoundRobinConfig { max_rounds: 4, ..RoundRobinConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn observed_cells_survive_imputation(d in matrix(14, 4), name in strategy_name(), seed in any::<u64>()) {
        let spec = RegressorSpec::from_pairs(name, &Default::default(), seed).unwrap();
        let out = roundrobin::run(&d, &spec, &VariableMeta::defaults(d.p()), &quick()).unwrap();
        prop_assert_eq!(out.imputed.missing_count(), 0);
        for i in 0..d.n() {
            for j in 0..d.p() {
                let got = out.imputed.get(i, j).unwrap();
                prop_assert!(got.is_finite());
                if let Some(v) = d.get(i, j) {
                    prop_assert_eq!(got.to_bits(), v.to_bits());
                }
            }
        }
    }

    #[test]
    fn runs_are_deterministic(d in matrix(12, 3), name in strategy_name(), seed in any::<u64>()) {
        let spec = RegressorSpec::from_pairs(name, &Default::default(), seed).unwrap();
        let vars = VariableMeta::defaults(d.p());
        let a = roundrobin::run(&d, &spec, &vars, &quick()).unwrap();
        let b = roundrobin::run(&d, &spec, &vars, &quick()).unwrap();
        let bits = |m: &DataMatrix| m.raw_values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a.imputed), bits(&b.imputed));
        prop_assert_eq!(a.per_round_delta, b.per_round_delta);
    }

    #[test]
    fn integer_columns_come_back_whole(d in matrix(12, 3)) {
        let mut vars = VariableMeta::defaults(d.p());
        vars[0].kind = VariableKind::Integer;
        let spec = RegressorSpec::named("br").unwrap();
        let out = roundrobin::run(&d, &spec, &vars, &quick()).unwrap();
        for i in 0..d.n() {
            if d.is_missing(i, 0) {
                let v = out.imputed.get(i, 0).unwrap();
                prop_assert_eq!(v, v.round());
            }
        }
    }

    #[test]
    fn missing_profile_counts_agree(d in matrix(20, 6)) {
        let prof = missing_profile(&d);
        let total = d.mask().iter().filter(|&&m| m).count();
        prop_assert_eq!(prof.per_variable.iter().sum::<usize>(), total);
        prop_assert_eq!(prof.per_participant.iter().sum::<usize>(), total);
        prop_assert_eq!(prof.per_variable.len(), d.p());
        prop_assert_eq!(prof.per_participant.len(), d.n());
    }

    #[test]
    fn divergence_is_non_negative(
        obs in prop::collection::vec(-1e3f64..1e3, 1..80),
        imp in prop::collection::vec(-1e3f64..1e3, 1..80),
        fixed in prop::option::of(1usize..20),
    ) {
        let policy = fixed.map_or(BinningPolicy::Auto, BinningPolicy::Fixed);
        let kl = kl_per_variable(&obs, &imp, policy).unwrap();
        prop_assert!(kl.is_finite() && kl >= 0.0);
        prop_assert_eq!(kl_per_variable(&obs, &obs, policy).unwrap(), 0.0);
    }

    #[test]
    fn swapping_t_test_arguments_flips_the_sign(
        pairs in prop::collection::vec((0.0f64..5.0, 0.0f64..5.0), 2..40),
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let fwd = paired_t_test(&a, &b).unwrap();
        let back = paired_t_test(&b, &a).unwrap();
        prop_assert_eq!(fwd.t, -back.t);
        prop_assert_eq!(fwd.p, back.p);
        prop_assert!((0.0..=1.0).contains(&fwd.p));
    }
}

fn family() -> impl Strategy<Value = Vec<SubsetSpec>> {
    prop::collection::vec((prop::collection::btree_set(0u8..8, 1..8), 1usize..4), 1..=5).prop_map(|blocks| {
        blocks
            .into_iter()
            .enumerate()
            .map(|(k, (members, p))| {
                SubsetSpec::new(
                    k as u32 + 1,
                    members.into_iter().map(|m| format!("p{m}")),
                    (0..p).map(|v| format!("s{k}_{v}")),
                )
            })
            .collect()
    })
}

/// Best achievable score over every permutation, conditioning each target on
/// every earlier subset that contains it.
fn brute_force_best(subsets: &[SubsetSpec]) -> f64 {
    fn walk(subsets: &[SubsetSpec], done: &mut Vec<usize>, best: &mut f64) {
        if done.len() == subsets.len() {
            let mut score = 0.0;
            for (k, &t) in done.iter().enumerate() {
                let target = &subsets[t];
                let vars: usize = done[..k]
                    .iter()
                    .filter(|&&c| target.participant_ids.is_subset(&subsets[c].participant_ids))
                    .map(|&c| subsets[c].p())
                    .sum();
                score += (target.n() * vars) as f64;
            }
            *best = best.max(score);
            return;
        }
        for t in 0..subsets.len() {
            if !done.contains(&t) {
                done.push(t);
                walk(subsets, done, best);
                done.pop();
            }
        }
    }
    let mut best = 0.0;
    walk(subsets, &mut Vec::new(), &mut best);
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exhaustive_plan_is_optimal_and_greedy_never_beats_it(subsets in family()) {
        let exhaustive = plan_order(&subsets, PlanMode::Exhaustive).unwrap();
        let greedy = plan_order(&subsets, PlanMode::Greedy).unwrap();
        let best = brute_force_best(&subsets);
        prop_assert!((exhaustive.score - best).abs() <= 1e-9, "{} vs {}", exhaustive.score, best);
        prop_assert!(greedy.score <= exhaustive.score + 1e-9);

        for plan in [&exhaustive, &greedy] {
            let targets: BTreeSet<u32> = plan.steps.iter().map(|s| s.target).collect();
            prop_assert_eq!(targets.len(), subsets.len());
            let mut seen = Vec::new();
            for step in &plan.steps {
                let target = subsets.iter().find(|s| s.id == step.target).unwrap();
                for c in &step.conditioning {
                    prop_assert!(seen.contains(c));
                    let cond = subsets.iter().find(|s| s.id == *c).unwrap();
                    prop_assert!(containment_ok(target, cond));
                }
                seen.push(step.target);
            }
        }
    }
}
