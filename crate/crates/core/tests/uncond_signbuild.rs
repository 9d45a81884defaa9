mod common;

use narrowops::signbuilder::active_nodes;
use narrowops::{
    bounded_sign, burkholder_beta, classical_tree, complete_to_sign, haar_system, is_sign, uncond_constant,
    BasicSequence, DyadicSpace, NormedTarget, SearchBudget, SignOptions,
};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bounded_sign_invariants(depth in 1u32..=9, m in 1u64..=12, seed in any::<u64>()) {
        let s = DyadicSpace::<f64>::new(depth, 1.0).unwrap();
        let sys = haar_system(common::random_tree(&s, depth as usize, &mut common::rng(seed)));
        let res = bounded_sign(&sys, 1.0 / m as f64).unwrap();
        prop_assert_eq!(res.m, m);
        prop_assert!(res.numerators.iter().all(|k| k.unsigned_abs() <= m));
        // Exact in units of 1/m; the float integral is exact for dyadic m.
        prop_assert_eq!(res.numerators.iter().sum::<i64>(), 0);
        if m.is_power_of_two() {
            prop_assert_eq!(res.function.integral(), 0.0);
        }
        prop_assert!(res.coefficients.sup_abs() <= 1.0 / m as f64);
        let mut prev = f64::INFINITY;
        for l in &res.levels {
            prop_assert!(l.residual_measure <= m as f64 * l.increment_l1 * (1.0 + 1e-12));
            prop_assert!(l.increment_l1 <= prev);
            prev = l.increment_l1;
        }
        let c = complete_to_sign(&res, sys.base(), None, &SignOptions::default()).unwrap();
        prop_assert!(is_sign(&c.sign, sys.base()));
        prop_assert_eq!(c.sign.integral(), 0.0);
        prop_assert!(c.slack <= 2.0 * res.residual_measure);
        prop_assert!(active_nodes(&res).len() <= sys.len());
    }

    #[test]
    fn constant_ignores_signs_and_scale(seed in any::<u64>(), k in 2usize..=3) {
        let mut r = common::rng(seed);
        let target = NormedTarget::ellq(3, 3.0).unwrap();
        let vectors: Vec<Vec<f64>> = (0..k).map(|_| (0..3).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
        let flipped: Vec<Vec<f64>> = vectors
            .iter()
            .enumerate()
            .map(|(i, v)| v.iter().map(|x| if i % 2 == 0 { -x * 4.0 } else { x * 4.0 }).collect())
            .collect();
        let a = uncond_constant(&BasicSequence::new(target.clone(), vectors).unwrap(), SearchBudget::default()).unwrap();
        let b = uncond_constant(&BasicSequence::new(target, flipped).unwrap(), SearchBudget::default()).unwrap();
        prop_assert!(a.lower >= 1.0 - 1e-12);
        prop_assert!((a.lower - b.lower).abs() <= 1e-9 * a.lower);
    }
}

#[test]
fn burkholder_table() {
    for (p, beta) in [(1.5, 2.0), (2.0, 1.0), (3.0, 2.0), (4.0, 3.0)] {
        assert_eq!(burkholder_beta(p).unwrap(), beta);
    }
    assert!(burkholder_beta(1.0f64).unwrap().is_infinite());
    assert!(burkholder_beta(0.5f64).is_err());
}

#[test]
fn classical_haar_is_one_unconditional_in_l2() {
    for depth in 1..=6u32 {
        let s = DyadicSpace::<f64>::new(depth, 2.0).unwrap();
        let sys = haar_system(classical_tree(&s, depth as usize).unwrap());
        let c = uncond_constant(&BasicSequence::from_system(&sys).unwrap(), SearchBudget::default()).unwrap();
        assert_eq!(c.lower, 1.0, "depth {depth}");
    }
}

#[test]
fn haar_constant_at_p4_stays_below_burkholder() {
    let mut prev = 1.0;
    for depth in 1..=5u32 {
        let s = DyadicSpace::<f64>::new(depth, 4.0).unwrap();
        let sys = haar_system(classical_tree(&s, depth as usize).unwrap());
        let c = uncond_constant(&BasicSequence::from_system(&sys).unwrap(), SearchBudget::default()).unwrap();
        assert!(c.lower >= prev && c.lower <= 3.0 + 1e-9, "depth {depth}: {}", c.lower);
        prev = c.lower;
    }
}
