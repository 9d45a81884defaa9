mod common;

use narrowops::narrowness::Optimality;
use narrowops::operators::{identity_like, integration, s_coordinate_partition};
use narrowops::{
    build_small_tree, counterexample_operator, epsilon_schedule, hpp_defect, is_sign, sign_defect, DyadicSpace,
    Error, NormedTarget, PartitionSampler, SignOptions,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn exact_matches_full_enumeration(seed in any::<u64>(), q_idx in 0usize..3) {
        let q = [1.0, 2.0, 3.0][q_idx];
        let s = DyadicSpace::<f64>::new(4, 1.0).unwrap();
        let mut r = common::rng(seed);
        let t = common::random_operator(&s, NormedTarget::ellq(3, q).unwrap(), &mut r);
        let set = narrowops::AtomSet::new(s, (0..12).collect()).unwrap();
        let res = sign_defect(&t, &set, &SignOptions::exact()).unwrap();
        prop_assert!(is_sign(&res.sign, &set));
        prop_assert_eq!(res.optimality, Optimality::Exact);
        let oracle = common::brute_force_defect(&t, &set);
        prop_assert!((res.value.lower - oracle).abs() <= 1e-12 * (1.0 + oracle));
        let heuristic = sign_defect(&t, &set, &SignOptions::heuristic().with_seed(seed)).unwrap();
        prop_assert!(is_sign(&heuristic.sign, &set));
        prop_assert!(heuristic.value.lower >= res.value.lower - 1e-12);
    }

    #[test]
    fn defect_is_invariant_under_negation(seed in any::<u64>()) {
        let s = DyadicSpace::<f64>::new(3, 1.0).unwrap();
        let t = common::random_operator(&s, NormedTarget::ellq(2, 1.0).unwrap(), &mut common::rng(seed));
        let a = sign_defect(&t, &s.full(), &SignOptions::exact()).unwrap();
        let b = sign_defect(&t.scaled(-1.0), &s.full(), &SignOptions::exact()).unwrap();
        prop_assert_eq!(a.value.lower, b.value.lower);
    }

    #[test]
    fn heuristic_is_deterministic(seed in any::<u64>()) {
        let s = DyadicSpace::<f64>::new(6, 1.0).unwrap();
        let t = common::random_operator(&s, NormedTarget::ellq(4, 2.0).unwrap(), &mut common::rng(seed));
        let opts = SignOptions::heuristic().with_seed(seed);
        let a = sign_defect(&t, &s.full(), &opts).unwrap();
        let b = sign_defect(&t, &s.full(), &opts).unwrap();
        prop_assert_eq!(a.sign, b.sign);
    }
}

#[test]
fn integration_operators_get_zero_trees() {
    let s = DyadicSpace::<f64>::new(5, 1.0).unwrap();
    let t = integration(&s, &[1.0, -2.0, 0.5], NormedTarget::ellq(3, 2.0).unwrap()).unwrap();
    let schedule = epsilon_schedule(0.1, 4, 1.0, 1.0).unwrap();
    let tree = build_small_tree(&t, &s.full(), &schedule, 4, &SignOptions::default()).unwrap();
    assert!(tree.achieved.iter().all(|e| e.upper == 0.0));
}

#[test]
fn identity_fails_at_the_root_with_full_defect() {
    let s = DyadicSpace::<f64>::new(3, 1.0).unwrap();
    let t = identity_like(&s).unwrap();
    let schedule = epsilon_schedule(0.1, 2, 1.0, 1.0).unwrap();
    match build_small_tree(&t, &s.full(), &schedule, 2, &SignOptions::default()) {
        Err(Error::ToleranceUnachievable { node, achieved, .. }) => {
            assert_eq!(node.level(), 0);
            assert_eq!(achieved, 1.0);
        }
        other => panic!("expected a failure at the root, got {other:?}"),
    }
}

#[test]
fn counterexample_separates_the_two_defects() {
    let t = counterexample_operator::<f64>(2, 2, 1.0).unwrap();
    let full = t.source().full();
    let pp = sign_defect(&t, &full, &SignOptions::default()).unwrap();
    assert_eq!(pp.value.lower, 0.0);
    let partition = s_coordinate_partition(t.source(), 2).unwrap();
    let hpp = hpp_defect(&t, &full, &PartitionSampler::Fixed(vec![partition]), 4, &SignOptions::default()).unwrap();
    assert_eq!(hpp.estimate.lower, full.measure());
    assert!(hpp.estimate.is_exact());
}
