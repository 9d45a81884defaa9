mod common;

use narrowops::factorization::random_operator;
use narrowops::signbuilder::lemma41_bound_check;
use narrowops::{
    bounded_sign, factorize, haar_slicing, rank1_series, theorem43_pipeline, Coefficients, DyadicSpace, Error,
    NormedTarget, SearchBudget, SeriesRep, SignOptions, TargetBasis,
};
use proptest::prelude::*;
use rand::Rng;

fn series(seed: u64, depth: u32, dim: usize, q: f64) -> SeriesRep<f64> {
    let s = DyadicSpace::new(depth, 1.0).unwrap();
    let t = random_operator(&s, NormedTarget::ellq(dim, q).unwrap(), 1.0, seed).unwrap();
    rank1_series(&t, &TargetBasis::Coordinate, SearchBudget::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn factorization_postconditions(seed in any::<u64>(), levels in 1usize..=3) {
        let sr = series(seed, 5, 4, 1.0);
        let s = *sr.terms()[0].source();
        match factorize(&sr, &s.full(), 0.2, levels, &SignOptions::default()) {
            Ok(res) => {
                res.recheck().unwrap();
                let d = res.lift.summation.dim;
                // Each U-image's norm is that of its own block range.
                for (r, u) in res.u_images.iter().enumerate() {
                    let lo = (res.starts[r] - 1) * d;
                    let hi = ((res.cuts[r] - 1) * d).min(u.len());
                    let (base, _) = res.lift.space.as_uncond().unwrap();
                    let own = narrowops::NormedTarget::uncond_sum(base.clone(), (hi - lo) / d.max(1)).ok();
                    if let Some(own) = own {
                        let a = res.lift.space.norm(u);
                        let b = own.norm(&u[lo..hi]);
                        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
                    }
                }
                let v = res.v_norm(SearchBudget::default()).unwrap();
                prop_assert!(v.upper <= res.epsilon + 1e-12);
            }
            Err(Error::ToleranceUnachievable { achieved, required, .. }) => prop_assert!(achieved > required),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }
}

#[test]
fn coefficient_bound_on_random_coefficients() {
    let sr = series(17, 5, 3, 1.0);
    let s = *sr.terms()[0].source();
    let res = factorize(&sr, &s.full(), 0.2, 2, &SignOptions::default()).unwrap();
    let u_norm = narrowops::op_norm(&res.u_operator().unwrap(), narrowops::Subspace::Span(&res.system), SearchBudget::default()).upper;
    let seq = res.u_sequence().unwrap();
    let mut r = common::rng(99);
    for _ in 0..10_000 {
        let a: Vec<f64> = (0..res.system.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
        let rep = lemma41_bound_check(&seq, &res.system, &Coefficients(a), u_norm, 1.0).unwrap();
        assert!(rep.holds, "{rep:?}");
    }
    let zero = lemma41_bound_check(&seq, &res.system, &Coefficients(vec![0.0; res.system.len()]), u_norm, 1.0).unwrap();
    assert_eq!(zero.lhs.upper, 0.0);
    let b = bounded_sign(&res.system, 0.25).unwrap();
    assert!(lemma41_bound_check(&seq, &res.system, &b.coefficients, u_norm, 1.0).unwrap().holds);
}

#[test]
fn pipeline_on_rank_one_operator_is_trivial() {
    let s = DyadicSpace::<f64>::new(5, 1.0).unwrap();
    let t = narrowops::operators::integration(&s, &[0.5, -0.25], NormedTarget::ellq(2, 2.0).unwrap()).unwrap();
    let sr = rank1_series(&t, &TargetBasis::Coordinate, SearchBudget::default()).unwrap();
    let rep = theorem43_pipeline(&sr, &s.full(), 0.2, 2, &SignOptions::default(), SearchBudget::default()).unwrap();
    assert_eq!(rep.measured.upper, 0.0);
    assert!(rep.factorization.head_defects.iter().all(|e| e.upper == 0.0));
}

#[test]
fn identity_slicing_chain_in_l2() {
    let s = DyadicSpace::<f64>::new(3, 2.0).unwrap();
    let h = haar_slicing(&s, 8, SearchBudget::default()).unwrap();
    assert!((h.m.lower - 1.0).abs() < 1e-12);
    let res = factorize(&h.series, &s.full(), 0.1, 2, &SignOptions::default()).unwrap();
    assert!(res.v_images.iter().flatten().all(|&x| x == 0.0));
    let rep = narrowops::check_lower_bound(&res, 1.0, h.m, SearchBudget::default()).unwrap();
    assert_eq!(rep.haar_constant.lower, 1.0);
    assert!(rep.holds && rep.bound >= 1.0);
}
