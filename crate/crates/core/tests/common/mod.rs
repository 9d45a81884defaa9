#![allow(dead_code)]

use narrowops::{build_tree, AtomSet, DyadicSpace, FiniteOperator, NormedTarget, SplitStrategy, SubsetTree};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A tree whose every split is a uniformly random equal half.
pub fn random_tree(space: &DyadicSpace<f64>, levels: usize, rng: &mut ChaCha8Rng) -> SubsetTree<f64> {
    let base = space.full();
    let mut nodes = vec![base.clone()];
    let mut splits = Vec::new();
    for rank in 0..(1usize << levels) - 1 {
        let mut atoms = nodes[rank].atoms().to_vec();
        atoms.shuffle(rng);
        let half = atoms.len() / 2;
        let plus = AtomSet::from_unsorted(*space, atoms[..half].to_vec()).unwrap();
        let minus = AtomSet::from_unsorted(*space, atoms[half..].to_vec()).unwrap();
        nodes.push(minus);
        nodes.push(plus.clone());
        splits.push(plus);
    }
    build_tree(&base, levels, SplitStrategy::Explicit(splits)).unwrap()
}

pub fn random_operator(space: &DyadicSpace<f64>, target: NormedTarget<f64>, rng: &mut ChaCha8Rng) -> FiniteOperator<f64> {
    let d = target.dim();
    let columns = (0..space.atom_count())
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    FiniteOperator::new(*space, target, columns).unwrap()
}

/// Minimum of `‖T s‖` over balanced signs on `set`, by plain enumeration of
/// all `2^n` vectors.
pub fn brute_force_defect(t: &FiniteOperator<f64>, set: &AtomSet<f64>) -> f64 {
    let n = set.len();
    let mut best = f64::INFINITY;
    for mask in 0u64..1 << n {
        if mask.count_ones() as usize * 2 != n {
            continue;
        }
        let mut y = vec![0.0; t.rows()];
        for (k, &a) in set.atoms().iter().enumerate() {
            let s = if mask >> k & 1 == 1 { 1.0 } else { -1.0 };
            y.iter_mut().zip(t.column(a)).for_each(|(o, &x)| *o += s * x);
        }
        best = best.min(t.target().norm(&y));
    }
    best
}
