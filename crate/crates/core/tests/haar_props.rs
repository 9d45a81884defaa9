mod common;

use narrowops::haar::reconstruct_partial;
use narrowops::{
    classical_tree, expand, haar_norm, haar_system, natural_order, reconstruct, telescope, DyadicSpace, MultiIndex,
    SubsetTree,
};
use proptest::prelude::*;

fn space(depth: u32, p: f64) -> DyadicSpace<f64> {
    DyadicSpace::new(depth, p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn haar_norms_match_the_formula(depth in 1u32..=6, seed in any::<u64>(), p_idx in 0usize..4) {
        let p = [1.0, 1.5, 2.0, 4.0][p_idx];
        let s = space(depth, p);
        let levels = depth as usize;
        let sys = haar_system(common::random_tree(&s, levels, &mut common::rng(seed)));
        for (alpha, h) in natural_order(levels - 1).iter().zip(sys.functions()) {
            let expected = haar_norm(1.0, alpha.level(), p);
            prop_assert!((h.norm() - expected).abs() <= 1e-12 * expected);
        }
    }

    #[test]
    fn telescoping_along_every_branch(depth in 1u32..=6, seed in any::<u64>()) {
        let s = space(depth, 1.0);
        let levels = depth as usize;
        let sys = haar_system(common::random_tree(&s, levels, &mut common::rng(seed)));
        for alpha in natural_order(levels) {
            let f = telescope(&alpha, &sys).unwrap();
            prop_assert!(f.norm_p(1.0) <= 2.0);
        }
    }

    #[test]
    fn expansion_round_trips(depth in 1u32..=6, seed in any::<u64>()) {
        let s = space(depth, 2.0);
        let levels = depth as usize;
        let sys = haar_system(common::random_tree(&s, levels, &mut common::rng(seed)));
        let mut r = common::rng(seed ^ 1);
        let coeffs: Vec<f64> = (0..sys.len()).map(|_| rand::Rng::gen_range(&mut r, -4i32..=4) as f64 / 8.0).collect();
        let f = reconstruct(&narrowops::Coefficients(coeffs.clone()), &sys).unwrap();
        prop_assert_eq!(f.integral(), 0.0);
        let back = expand(&f, &sys).unwrap();
        prop_assert_eq!(back.0, coeffs);
    }

    #[test]
    fn system_is_orthogonal(depth in 1u32..=5, seed in any::<u64>()) {
        let s = space(depth, 2.0);
        let sys = haar_system(common::random_tree(&s, depth as usize, &mut common::rng(seed)));
        let h = sys.functions();
        for i in 0..h.len() {
            for j in 0..i {
                prop_assert_eq!(h[i].inner(&h[j]), 0.0);
            }
        }
    }

    #[test]
    fn partial_sums_are_monotone_projections(depth in 1u32..=5, seed in any::<u64>()) {
        // In L_2 the natural-order partial sums are orthogonal projections.
        let s = space(depth, 2.0);
        let sys = haar_system(common::random_tree(&s, depth as usize, &mut common::rng(seed)));
        let mut r = common::rng(seed ^ 2);
        let coeffs: Vec<f64> = (0..sys.len()).map(|_| rand::Rng::gen_range(&mut r, -1.0..1.0)).collect();
        let c = narrowops::Coefficients(coeffs);
        let mut prev = 0.0;
        for k in 0..=sys.len() {
            let n = reconstruct_partial(&c, &sys, k).norm();
            prop_assert!(n >= prev - 1e-12);
            prev = n;
        }
    }
}

#[test]
fn tree_json_round_trip() {
    let s = space(4, 1.0);
    let tree = common::random_tree(&s, 3, &mut common::rng(11));
    let back = SubsetTree::from_json(&tree.to_json()).unwrap();
    assert_eq!(back, tree);
}

#[test]
fn classical_tree_matches_intervals() {
    let s = space(3, 1.0);
    let tree = classical_tree(&s, 3).unwrap();
    assert_eq!(tree.node(&MultiIndex::new(vec![-1]).unwrap()).unwrap().atoms(), &[0, 1, 2, 3]);
    assert_eq!(tree.node(&MultiIndex::new(vec![1, -1]).unwrap()).unwrap().atoms(), &[4, 5]);
    assert_eq!(tree.leaves().len(), 8);
}

#[test]
fn natural_order_is_level_by_level() {
    let order: Vec<Vec<i8>> = natural_order(2).into_iter().map(|m| m.entries().to_vec()).collect();
    assert_eq!(
        order,
        vec![vec![], vec![-1], vec![1], vec![-1, -1], vec![-1, 1], vec![1, -1], vec![1, 1]]
    );
}
