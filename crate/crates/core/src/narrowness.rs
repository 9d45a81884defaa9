//! Sign defects, the greedy small-tree construction, HPP defects over
//! equal-block partitions, and the sum-stability pipeline.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{AtomSet, Partition, SimpleFunction};
use crate::error::{Error, Result};
use crate::haar::{build_tree, count_below, haar_norm, haar_system, HaarLikeSystem, MultiIndex, SplitStrategy};
use crate::operators::{combination, extension_bound, FiniteOperator};
use crate::scalar::Scalar;
use crate::search;
use crate::target::{Method, NormEstimate, NormedTarget};

/// Largest set for which exhaustive enumeration is allowed.
pub const DEFAULT_EXACT_CAP: usize = 24;
const HARD_EXACT_CAP: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignMode {
    Exact,
    Heuristic,
    /// Exact up to the cap, heuristic above it.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimality {
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignOptions {
    pub mode: SignMode,
    /// Evaluation budget of the heuristic; restarts = budget / |A|^2.
    pub budget: usize,
    pub seed: u64,
    pub exact_cap: usize,
}

impl Default for SignOptions {
    fn default() -> Self {
        SignOptions {
            mode: SignMode::Auto,
            budget: 20_000,
            seed: 0,
            exact_cap: DEFAULT_EXACT_CAP,
        }
    }
}

impl SignOptions {
    pub fn exact() -> Self {
        SignOptions {
            mode: SignMode::Exact,
            ..Default::default()
        }
    }

    pub fn heuristic() -> Self {
        SignOptions {
            mode: SignMode::Heuristic,
            ..Default::default()
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        SignOptions { seed, ..self }
    }

    fn use_exact(&self, n: usize) -> Result<bool> {
        match self.mode {
            SignMode::Exact if n > self.exact_cap.min(HARD_EXACT_CAP) => Err(Error::invalid(format!(
                "exact enumeration over {n} atoms exceeds the cap {}",
                self.exact_cap
            ))),
            SignMode::Exact => Ok(true),
            SignMode::Heuristic => Ok(false),
            SignMode::Auto => Ok(n <= self.exact_cap.min(HARD_EXACT_CAP)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignSearchResult<S> {
    pub sign: SimpleFunction<S>,
    /// `‖T(sign)‖`.
    pub value: NormEstimate<S>,
    pub optimality: Optimality,
    pub evaluations: u64,
}

/// Outcome of a cardinality-constrained ±1 assignment.
#[derive(Debug, Clone)]
pub(crate) struct Assignment<S> {
    /// `true` = +1, aligned with the input columns.
    pub plus: Vec<bool>,
    pub image: Vec<S>,
    pub optimality: Optimality,
    pub evaluations: u64,
}

/// Minimizes `‖offset + Σ s_i c_i‖` over `s ∈ {±1}^n` with exactly
/// `plus_count` entries equal to `+1`.
pub(crate) fn assign_signs<S: Scalar>(
    columns: &[Vec<S>],
    offset: &[S],
    plus_count: usize,
    target: &NormedTarget<S>,
    opts: &SignOptions,
) -> Result<Assignment<S>> {
    let n = columns.len();
    if plus_count > n {
        return Err(Error::infeasible(format!("{plus_count} plus signs among {n} atoms")));
    }
    let image_of = |plus: &[bool]| {
        let signs = plus.iter().map(|&p| if p { S::one() } else { -S::one() });
        combination(offset, signs.zip(columns.iter().map(Vec::as_slice)))
    };
    if columns.iter().all(|c| c.iter().all(|&x| x == S::zero())) {
        // Every assignment has the same image; take the lexicographically first.
        let plus: Vec<bool> = (0..n).map(|i| i < plus_count).collect();
        let image = image_of(&plus);
        return Ok(Assignment {
            image,
            plus,
            optimality: Optimality::Exact,
            evaluations: 1,
        });
    }
    let (plus, evaluations, optimality) = if opts.use_exact(n)? {
        let (mask, evals) = enumerate_exact(columns, offset, plus_count, target);
        ((0..n).map(|i| mask >> i & 1 == 1).collect(), evals, Optimality::Exact)
    } else {
        let (plus, evals) = heuristic(columns, offset, plus_count, target, opts);
        (plus, evals, Optimality::Heuristic)
    };
    let image = image_of(&plus);
    Ok(Assignment {
        image,
        plus,
        optimality,
        evaluations,
    })
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// The `rank`-th `k`-subset of `0..` in colexicographic order, i.e. the
/// order in which Gosper's hack visits masks.
fn unrank_colex(mut rank: u64, k: usize) -> u64 {
    let mut mask = 0u64;
    for i in (1..=k).rev() {
        let mut c = i - 1;
        while binomial(c + 1, i) <= rank {
            c += 1;
        }
        mask |= 1 << c;
        rank -= binomial(c, i);
    }
    mask
}

fn next_combination(x: u64) -> u64 {
    let c = x & x.wrapping_neg();
    let r = x + c;
    (((r ^ x) >> 2) / c) | r
}

/// Lexicographic order on sign vectors with `+1 < -1`, bit `i` = atom `i` is `+1`.
fn lex_less(a: u64, b: u64) -> bool {
    let d = a ^ b;
    d != 0 && a & d & d.wrapping_neg() != 0
}

fn better<S: Scalar>(a: (S, u64), b: (S, u64)) -> (S, u64) {
    if a.0 < b.0 || (a.0 == b.0 && lex_less(a.1, b.1)) {
        a
    } else {
        b
    }
}

fn enumerate_exact<S: Scalar>(columns: &[Vec<S>], offset: &[S], plus_count: usize, target: &NormedTarget<S>) -> (u64, u64) {
    let n = columns.len();
    let rows = offset.len();
    // With no offset a balanced sign and its negation have equal norms, so
    // the first atom may be fixed at +1.
    let symmetric = 2 * plus_count == n && n > 0 && offset.iter().all(|&v| v == S::zero());
    let (free, choose, shift) = if symmetric {
        (n - 1, plus_count - 1, 1)
    } else {
        (n, plus_count, 0)
    };
    let total = binomial(free, choose);
    let mut base = offset.to_vec();
    for c in columns {
        base.iter_mut().zip(c).for_each(|(o, &x)| *o -= x);
    }
    let two = S::of(2.0);
    let eval = |mask: u64, y: &mut Vec<S>| {
        y.copy_from_slice(&base);
        let mut m = mask;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            m &= m - 1;
            y.iter_mut().zip(&columns[i]).for_each(|(o, &x)| *o += two * x);
        }
        target.norm(y)
    };
    let full = |sub: u64| if symmetric { sub << shift | 1 } else { sub };
    if choose == 0 {
        let mask = full(0);
        return (mask, 1);
    }
    let chunks = total.min(512);
    let best = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = total * c / chunks;
            let end = total * (c + 1) / chunks;
            let mut y = vec![S::zero(); rows];
            let mut sub = unrank_colex(start, choose);
            let mut best = (S::infinity(), u64::MAX);
            for k in start..end {
                let mask = full(sub);
                best = better((eval(mask, &mut y), mask), best);
                if k + 1 < end {
                    sub = next_combination(sub);
                }
            }
            best
        })
        .reduce_with(better)
        .expect("at least one chunk");
    (best.1, total)
}

fn heuristic<S: Scalar>(
    columns: &[Vec<S>],
    offset: &[S],
    plus_count: usize,
    target: &NormedTarget<S>,
    opts: &SignOptions,
) -> (Vec<bool>, u64) {
    let n = columns.len();
    let seed_plus = if 2 * plus_count == n && offset.iter().all(|&v| v == S::zero()) {
        differencing_seed(columns, target)
    } else {
        greedy_seed(columns, offset, plus_count, target)
    };
    let (seed_plus, seed_val, mut evals) = pair_swap(columns, offset, seed_plus, target);
    let restarts = opts.budget / (n * n).max(1);
    let results: Vec<(Vec<bool>, S, u64)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = search::rng(opts.seed, 0x5167_0000 + r as u64);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let mut plus = vec![false; n];
            idx[..plus_count].iter().for_each(|&i| plus[i] = true);
            pair_swap(columns, offset, plus, target)
        })
        .collect();
    let mut best = (seed_plus, seed_val);
    for (plus, v, e) in results {
        evals += e;
        if v < best.1 {
            best = (plus, v);
        }
    }
    (best.0, evals)
}

/// Largest-first pairing into opposite signs, then vector differencing on
/// the pair differences to orient the pairs.
fn differencing_seed<S: Scalar>(columns: &[Vec<S>], target: &NormedTarget<S>) -> Vec<bool> {
    let n = columns.len();
    let norms: Vec<S> = columns.iter().map(|c| target.norm(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let pairs: Vec<(usize, usize)> = order.chunks(2).map(|p| (p[0], p[1])).collect();
    // Each item: (vector, members as (pair, orientation)).
    let mut items: Vec<(Vec<S>, Vec<(usize, bool)>)> = pairs
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let d = columns[a].iter().zip(&columns[b]).map(|(&x, &y)| x - y).collect();
            (d, vec![(k, true)])
        })
        .collect();
    while items.len() > 1 {
        items.sort_by(|a, b| target.norm(&b.0).partial_cmp(&target.norm(&a.0)).unwrap_or(std::cmp::Ordering::Equal));
        let (vb, mb) = items.remove(1);
        let (va, ma) = &mut items[0];
        va.iter_mut().zip(&vb).for_each(|(x, &y)| *x -= y);
        ma.extend(mb.into_iter().map(|(k, o)| (k, !o)));
    }
    let mut plus = vec![false; n];
    for &(k, orient) in &items[0].1 {
        let (a, b) = pairs[k];
        plus[if orient { a } else { b }] = true;
    }
    plus
}

fn greedy_seed<S: Scalar>(columns: &[Vec<S>], offset: &[S], plus_count: usize, target: &NormedTarget<S>) -> Vec<bool> {
    let n = columns.len();
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<S> = columns.iter().map(|c| target.norm(c)).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let mut plus = vec![false; n];
    let mut y = offset.to_vec();
    let (mut plus_left, mut minus_left) = (plus_count, n - plus_count);
    let mut trial = y.clone();
    for i in order {
        let mut choice = plus_left > 0;
        if plus_left > 0 && minus_left > 0 {
            trial.iter_mut().zip(&y).zip(&columns[i]).for_each(|((t, &a), &x)| *t = a + x);
            let vp = target.norm(&trial);
            trial.iter_mut().zip(&y).zip(&columns[i]).for_each(|((t, &a), &x)| *t = a - x);
            choice = vp <= target.norm(&trial);
        }
        let s = if choice { S::one() } else { -S::one() };
        y.iter_mut().zip(&columns[i]).for_each(|(o, &x)| *o += s * x);
        plus[i] = choice;
        if choice {
            plus_left -= 1;
        } else {
            minus_left -= 1;
        }
    }
    plus
}

/// Best-improvement local search over swaps of one `+1` and one `-1`.
fn pair_swap<S: Scalar>(
    columns: &[Vec<S>],
    offset: &[S],
    mut plus: Vec<bool>,
    target: &NormedTarget<S>,
) -> (Vec<bool>, S, u64) {
    let mut y = offset.to_vec();
    for (c, &p) in columns.iter().zip(&plus) {
        let s = if p { S::one() } else { -S::one() };
        y.iter_mut().zip(c).for_each(|(o, &x)| *o += s * x);
    }
    let mut value = target.norm(&y);
    let mut evals = 1u64;
    let two = S::of(2.0);
    let mut trial = y.clone();
    loop {
        let mut best: Option<(usize, usize, S)> = None;
        for i in (0..plus.len()).filter(|&i| plus[i]) {
            for j in (0..plus.len()).filter(|&j| !plus[j]) {
                trial
                    .iter_mut()
                    .zip(&y)
                    .zip(columns[i].iter().zip(&columns[j]))
                    .for_each(|((t, &a), (&ci, &cj))| *t = a - two * ci + two * cj);
                let v = target.norm(&trial);
                evals += 1;
                if v < best.map_or(value, |b| b.2) {
                    best = Some((i, j, v));
                }
            }
        }
        match best {
            Some((i, j, v)) if v < value => {
                y.iter_mut()
                    .zip(columns[i].iter().zip(&columns[j]))
                    .for_each(|(a, (&ci, &cj))| *a += two * (cj - ci));
                plus[i] = false;
                plus[j] = true;
                value = v;
            }
            _ => break,
        }
    }
    (plus, target.norm(&y), evals)
}

/// Minimum of `‖T f‖` over signs `f` supported on `set`, with a witness.
pub fn sign_defect<S: Scalar>(
    t: &FiniteOperator<S>,
    set: &AtomSet<S>,
    opts: &SignOptions,
) -> Result<SignSearchResult<S>> {
    if set.space() != t.source() {
        return Err(Error::SpaceMismatch("sign set lives on another space".into()));
    }
    if set.len() < 2 || set.len() % 2 != 0 {
        return Err(Error::infeasible(format!(
            "a sign needs an even, nonzero atom count; got {}",
            set.len()
        )));
    }
    let columns: Vec<Vec<S>> = set.atoms().iter().map(|&a| t.column(a).to_vec()).collect();
    let offset = vec![S::zero(); t.rows()];
    let out = assign_signs(&columns, &offset, set.len() / 2, t.target(), opts)?;
    let mut values = t.source().zero().into_values();
    for (&a, &p) in set.atoms().iter().zip(&out.plus) {
        values[a] = if p { S::one() } else { -S::one() };
    }
    let sign = SimpleFunction::new(*t.source(), values)?;
    let bounds = t.target().norm_bounds(&out.image);
    let value = match out.optimality {
        Optimality::Exact if bounds.is_exact() => bounds,
        _ => NormEstimate::interval(bounds.lower, bounds.upper, Method::Search),
    };
    Ok(SignSearchResult {
        sign,
        value,
        optimality: out.optimality,
        evaluations: out.evaluations,
    })
}

/// Per-node tolerances `ε_α = c 4^{-n} ‖h_α‖` with `Σ ε_α / ‖h_α‖ = ε / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct EpsilonSchedule<S> {
    pub epsilon: S,
    pub levels: usize,
    pub exponent: S,
    pub base_measure: S,
    /// Indexed by natural-order rank.
    pub values: Vec<S>,
}

pub fn epsilon_schedule<S: Scalar>(epsilon: S, levels: usize, p: S, mu_a: S) -> Result<EpsilonSchedule<S>> {
    if !(epsilon > S::zero()) || !epsilon.is_finite() {
        return Err(Error::invalid("epsilon must be positive"));
    }
    if levels == 0 || levels > 40 {
        return Err(Error::invalid("schedule needs between 1 and 40 levels"));
    }
    if !(p >= S::one()) || !(mu_a > S::zero()) {
        return Err(Error::invalid("schedule needs p >= 1 and positive measure"));
    }
    let two = S::of(2.0);
    // Σ_{n<D'} 2^n 4^{-n} = 2 - 2^{1-D'}
    let geometric = two - two.powi(1 - levels as i32);
    let c = epsilon / (two * geometric);
    let values = (0..count_below(levels))
        .map(|r| {
            let n = MultiIndex::from_rank(r).level();
            c * S::of(4.0).powi(-(n as i32)) * haar_norm(mu_a, n, p)
        })
        .collect();
    Ok(EpsilonSchedule {
        epsilon,
        levels,
        exponent: p,
        base_measure: mu_a,
        values,
    })
}

impl<S: Scalar> EpsilonSchedule<S> {
    pub fn get(&self, alpha: &MultiIndex) -> Option<S> {
        self.values.get(alpha.rank()).copied()
    }

    /// `Σ ε_α / ‖h_α‖`.
    pub fn weighted_total(&self) -> S {
        self.values
            .iter()
            .enumerate()
            .map(|(r, &e)| e / haar_norm(self.base_measure, MultiIndex::from_rank(r).level(), self.exponent))
            .sum()
    }

    pub fn scaled(&self, factor: S) -> EpsilonSchedule<S> {
        EpsilonSchedule {
            epsilon: self.epsilon * factor,
            values: self.values.iter().map(|&v| v * factor).collect(),
            ..self.clone()
        }
    }
}

/// A Haar-like system with `‖T h_α‖ ≤ ε_α` at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallTree<S> {
    pub system: HaarLikeSystem<S>,
    /// `‖T h_α‖` by natural-order rank.
    pub achieved: Vec<NormEstimate<S>>,
    pub optimality: Vec<Optimality>,
}

impl<S: Scalar> SmallTree<S> {
    /// `2 Σ ‖T h_α‖ / ‖h_α‖`, an upper bound for `T` on the system's span.
    pub fn extension_bound(&self) -> S {
        let uppers: Vec<S> = self.achieved.iter().map(|e| e.upper).collect();
        extension_bound(&self.system, &uppers)
    }
}

/// Builds the tree node by node in natural order, each `h_α` a minimal
/// sign on `A_α`, failing at the first node whose defect exceeds `ε_α`.
pub fn build_small_tree<S: Scalar>(
    t: &FiniteOperator<S>,
    set: &AtomSet<S>,
    schedule: &EpsilonSchedule<S>,
    levels: usize,
    opts: &SignOptions,
) -> Result<SmallTree<S>> {
    if levels > schedule.levels {
        return Err(Error::invalid("schedule is shallower than the requested tree"));
    }
    if set.is_empty() || set.len() % (1usize << levels) != 0 {
        return Err(Error::infeasible(format!(
            "{} atoms cannot be halved {levels} times",
            set.len()
        )));
    }
    let internal = count_below(levels);
    let mut nodes = vec![set.clone()];
    let mut splits = Vec::with_capacity(internal);
    let mut achieved = Vec::with_capacity(internal);
    let mut optimality = Vec::with_capacity(internal);
    for rank in 0..internal {
        let alpha = MultiIndex::from_rank(rank);
        let node = nodes[rank].clone();
        let res = sign_defect(t, &node, &opts.with_seed(opts.seed ^ rank as u64))?;
        let required = schedule.values[rank];
        if res.value.upper > required {
            return Err(Error::ToleranceUnachievable {
                node: alpha,
                achieved: res.value.upper.as_f64(),
                required: required.as_f64(),
            });
        }
        let (plus, minus): (Vec<usize>, Vec<usize>) = node.atoms().iter().partition(|&&a| res.sign.value(a) > S::zero());
        let plus = AtomSet::new(*set.space(), plus)?;
        let minus = AtomSet::new(*set.space(), minus)?;
        nodes.push(minus);
        nodes.push(plus.clone());
        splits.push(plus);
        achieved.push(res.value);
        optimality.push(res.optimality);
    }
    let tree = build_tree(set, levels, SplitStrategy::Explicit(splits))?;
    Ok(SmallTree {
        system: haar_system(tree),
        achieved,
        optimality,
    })
}

#[derive(Debug, Clone)]
pub enum PartitionSampler<S> {
    /// Every partition into equal blocks (small sets only).
    Enumerate,
    Random { count: usize, seed: u64 },
    Fixed(Vec<Partition<S>>),
}

#[derive(Debug, Clone)]
pub struct HppDefect<S> {
    /// Max over the sampled partitions of the restricted sign defect.
    pub estimate: NormEstimate<S>,
    pub worst: Option<Partition<S>>,
    pub partitions: usize,
    /// Whether the sample covers the whole equal-block family.
    pub exhaustive: bool,
}

const HPP_ENUM_ATOMS: usize = 12;
const HPP_ENUM_BLOCKS: usize = 8;

/// All partitions of `atoms` into blocks of `size`, canonical: each block
/// starts with the smallest remaining atom.
fn equal_block_partitions(atoms: &[usize], size: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(rest: &[usize], size: usize, current: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if rest.is_empty() {
            out.push(current.clone());
            return;
        }
        let first = rest[0];
        let others = &rest[1..];
        let k = size - 1;
        let total = binomial(others.len(), k);
        let mut mask = if k == 0 { 0 } else { (1u64 << k) - 1 };
        for idx in 0..total {
            let mut block = vec![first];
            let mut remaining = Vec::with_capacity(others.len() - k);
            for (i, &a) in others.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    block.push(a);
                } else {
                    remaining.push(a);
                }
            }
            current.push(block);
            rec(&remaining, size, current, out);
            current.pop();
            if idx + 1 < total {
                mask = next_combination(mask);
            }
        }
    }
    let mut out = Vec::new();
    rec(atoms, size, &mut Vec::new(), &mut out);
    out
}

/// Lower bound for the sup over sub-σ-algebras on `set` of the restricted
/// sign defect, taken over equal-cardinality block partitions.
pub fn hpp_defect<S: Scalar>(
    t: &FiniteOperator<S>,
    set: &AtomSet<S>,
    sampler: &PartitionSampler<S>,
    block_count: usize,
    opts: &SignOptions,
) -> Result<HppDefect<S>> {
    if set.space() != t.source() {
        return Err(Error::SpaceMismatch("hpp set lives on another space".into()));
    }
    let feasible = block_count >= 2 && block_count.is_power_of_two() && set.len() % block_count == 0;
    if !feasible {
        return Err(Error::infeasible(format!(
            "{} atoms cannot form {block_count} equal blocks (need a power of two >= 2 dividing the count)",
            set.len()
        )));
    }
    let size = set.len() / block_count;
    let space = *set.space();
    let to_partition = |blocks: Vec<Vec<usize>>| -> Result<Partition<S>> {
        let blocks = blocks
            .into_iter()
            .map(|b| AtomSet::from_unsorted(space, b))
            .collect::<Result<Vec<_>>>()?;
        Partition::new(set.clone(), blocks)
    };
    let (partitions, exhaustive) = match sampler {
        PartitionSampler::Enumerate => {
            if set.len() > HPP_ENUM_ATOMS || block_count > HPP_ENUM_BLOCKS {
                return Err(Error::invalid(format!(
                    "enumeration is limited to {HPP_ENUM_ATOMS} atoms in at most {HPP_ENUM_BLOCKS} blocks"
                )));
            }
            let all = equal_block_partitions(set.atoms(), size)
                .into_iter()
                .map(to_partition)
                .collect::<Result<Vec<_>>>()?;
            (all, true)
        }
        PartitionSampler::Random { count, seed } => {
            let mut rng = search::rng(*seed, 0x4850_5000);
            let mut out = Vec::with_capacity(*count);
            for _ in 0..*count {
                let mut atoms = set.atoms().to_vec();
                atoms.shuffle(&mut rng);
                out.push(to_partition(atoms.chunks(size).map(<[usize]>::to_vec).collect())?);
            }
            (out, false)
        }
        PartitionSampler::Fixed(list) => {
            for p in list {
                if p.base() != set || p.blocks().len() != block_count || p.equal_block_size() != Some(size) {
                    return Err(Error::invalid("fixed partition does not match the set and block count"));
                }
            }
            (list.clone(), false)
        }
    };
    let mut best: Option<(NormEstimate<S>, usize)> = None;
    let mut all_exact = true;
    for (k, p) in partitions.iter().enumerate() {
        let r = t.restrict(p)?;
        let res = sign_defect(&r, &r.source().full(), opts)?;
        all_exact &= res.optimality == Optimality::Exact && res.value.is_exact();
        if best.as_ref().map_or(true, |(b, _)| res.value.lower > b.lower) {
            best = Some((res.value, k));
        }
    }
    let (estimate, worst) = match best {
        Some((v, k)) if all_exact => (NormEstimate::exact(v.lower), Some(partitions[k].clone())),
        Some((v, k)) => (NormEstimate::interval(v.lower, S::infinity(), Method::Search), Some(partitions[k].clone())),
        None => (NormEstimate::interval(S::zero(), S::infinity(), Method::Search), None),
    };
    Ok(HppDefect {
        estimate,
        worst,
        partitions: partitions.len(),
        exhaustive,
    })
}

/// A sign `f` on `set` with `‖(U+V) f‖ ≤ ε μ(A)^{1/p} + ε`, built from a
/// small tree for `U` and a leaf-measurable small sign for `V`.
#[derive(Debug, Clone)]
pub struct SumNarrowCertificate<S> {
    pub sign: SimpleFunction<S>,
    pub tree: SmallTree<S>,
    /// Bound for `U` on the tree's mean-zero span.
    pub u_span_bound: S,
    pub u_value: S,
    pub v_value: NormEstimate<S>,
    pub sum_value: NormEstimate<S>,
    /// `ε μ(A)^{1/p} + ε`.
    pub bound: S,
}

pub fn sum_narrow_demo<S: Scalar>(
    u: &FiniteOperator<S>,
    v: &FiniteOperator<S>,
    set: &AtomSet<S>,
    epsilon: S,
    levels: usize,
    opts: &SignOptions,
) -> Result<SumNarrowCertificate<S>> {
    if u.source() != v.source() || u.target() != v.target() {
        return Err(Error::SpaceMismatch("both operators need one source and target".into()));
    }
    let p = u.source().exponent();
    let schedule = epsilon_schedule(epsilon, levels, p, set.measure())?;
    let tree = build_small_tree(u, set, &schedule, levels, opts)?;
    let u_span_bound = tree.extension_bound();
    let leaves = tree.system.tree().leaf_partition();
    let restricted = v.restrict(&leaves)?;
    let coarse = sign_defect(&restricted, &restricted.source().full(), opts)?;
    if coarse.value.upper > epsilon {
        return Err(Error::ToleranceUnachievable {
            node: MultiIndex::root(),
            achieved: coarse.value.upper.as_f64(),
            required: epsilon.as_f64(),
        });
    }
    let sign = leaves.embed(&coarse.sign)?;
    let sum = u.axpy(S::one(), v)?;
    let u_value = u.image_norm(&sign)?;
    let sum_value = sum.target().norm_bounds(&sum.apply(&sign)?);
    let bound = epsilon * set.measure().powf(p.recip()) + epsilon;
    let slack = S::rel_tol() * S::of(64.0) * (S::one() + bound);
    if u_value > u_span_bound * sign.norm() + slack || sum_value.lower > bound + slack {
        return Err(Error::certificate(
            "sum of narrow operators",
            format!("measured {} exceeds the bound {bound}", sum_value.lower),
        ));
    }
    Ok(SumNarrowCertificate {
        sign,
        tree,
        u_span_bound,
        u_value,
        v_value: coarse.value,
        sum_value,
        bound,
    })
}
