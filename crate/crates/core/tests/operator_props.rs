mod common;

use nalgebra::DMatrix;
use narrowops::{op_norm, DyadicSpace, FiniteOperator, NormedTarget, SearchBudget, Subspace};
use proptest::prelude::*;
use rand::Rng;

fn budget() -> SearchBudget {
    SearchBudget::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn l1_norm_is_the_largest_normalized_column(depth in 1u32..=5, dim in 1usize..=5, seed in any::<u64>()) {
        let s = DyadicSpace::<f64>::new(depth, 1.0).unwrap();
        let t = common::random_operator(&s, NormedTarget::ellq(dim, 2.0).unwrap(), &mut common::rng(seed));
        let e = op_norm(&t, Subspace::All, budget());
        let oracle = (0..t.cols())
            .map(|i| t.column(i).iter().map(|x| x * x).sum::<f64>().sqrt() / s.atom_measure())
            .fold(0.0, f64::max);
        prop_assert!(e.is_exact());
        prop_assert!((e.lower - oracle).abs() <= 1e-12 * oracle);
    }

    #[test]
    fn l2_norm_is_the_largest_singular_value(depth in 1u32..=4, dim in 1usize..=5, seed in any::<u64>()) {
        let s = DyadicSpace::<f64>::new(depth, 2.0).unwrap();
        let t = common::random_operator(&s, NormedTarget::ellq(dim, 2.0).unwrap(), &mut common::rng(seed));
        let e = op_norm(&t, Subspace::All, budget());
        let scale = s.atom_measure().sqrt().recip();
        let m = DMatrix::from_fn(dim, t.cols(), |r, i| t.column(i)[r] * scale);
        let oracle = m.singular_values().max();
        prop_assert!(e.is_exact());
        prop_assert!((e.lower - oracle).abs() <= 1e-10 * oracle.max(1.0));
    }

    #[test]
    fn searched_bounds_bracket_random_ratios(depth in 1u32..=4, seed in any::<u64>(), p_idx in 0usize..3) {
        let p = [1.5, 3.0, 4.0][p_idx];
        let s = DyadicSpace::<f64>::new(depth, p).unwrap();
        let target = NormedTarget::lq(vec![0.25; 4], 1.5).unwrap();
        let mut r = common::rng(seed);
        let t = common::random_operator(&s, target, &mut r);
        let e = op_norm(&t, Subspace::All, budget());
        prop_assert!(e.lower <= e.upper);
        for _ in 0..32 {
            let f = s.function_from_fn(|_| r.gen_range(-1.0..1.0));
            let ratio = t.image_norm(&f).unwrap() / f.norm();
            prop_assert!(ratio <= e.upper * (1.0 + 1e-12));
        }
    }

    #[test]
    fn norms_scale_by_powers_of_two(depth in 1u32..=4, seed in any::<u64>(), k in -3i32..=3) {
        let s = DyadicSpace::<f64>::new(depth, 1.0).unwrap();
        let t = common::random_operator(&s, NormedTarget::ellq(3, 1.0).unwrap(), &mut common::rng(seed));
        let c = 2f64.powi(k);
        let a = op_norm(&t, Subspace::All, budget());
        let b = op_norm(&t.scaled(-c), Subspace::All, budget());
        prop_assert_eq!(b.lower, a.lower * c);
    }

    #[test]
    fn subspace_norms_are_nested(depth in 2u32..=4, seed in any::<u64>()) {
        let s = DyadicSpace::<f64>::new(depth, 1.0).unwrap();
        let mut r = common::rng(seed);
        let t = common::random_operator(&s, NormedTarget::ellq(2, 1.0).unwrap(), &mut r);
        let tree = common::random_tree(&s, depth as usize - 1, &mut r);
        let sys = narrowops::haar_system(tree);
        let all = op_norm(&t, Subspace::All, budget()).lower;
        let mean_zero = op_norm(&t, Subspace::MeanZero, budget()).lower;
        let span = op_norm(&t, Subspace::Span(&sys), budget()).lower;
        prop_assert!(span <= mean_zero * (1.0 + 1e-12) && mean_zero <= all * (1.0 + 1e-12));
    }

    #[test]
    fn apply_is_linear(depth in 1u32..=4, seed in any::<u64>()) {
        let s = DyadicSpace::<f64>::new(depth, 2.0).unwrap();
        let mut r = common::rng(seed);
        let t = common::random_operator(&s, NormedTarget::ellq(3, 2.0).unwrap(), &mut r);
        let f = s.function_from_fn(|_| f64::from(r.gen_range(-8i32..8)) / 4.0);
        let g = s.function_from_fn(|_| f64::from(r.gen_range(-8i32..8)) / 4.0);
        let lhs = t.apply(&f.axpy(2.0, &g)).unwrap();
        let tf = t.apply(&f).unwrap();
        let tg = t.apply(&g).unwrap();
        for ((a, b), c) in lhs.iter().zip(&tf).zip(&tg) {
            prop_assert!((a - (b + 2.0 * c)).abs() <= 1e-12);
        }
    }
}

#[test]
fn json_round_trip_preserves_bits() {
    let s = DyadicSpace::<f64>::new(3, 1.5).unwrap();
    let t = common::random_operator(&s, NormedTarget::ellq(2, 3.0).unwrap(), &mut common::rng(5));
    let back = FiniteOperator::from_json(&t.to_json()).unwrap();
    assert_eq!(back, t);
}
