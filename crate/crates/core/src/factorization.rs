//! The blocking factorization `T̃ = U + V` through the sign-sum space `Y`,
//! the lower-bound chain for the unconditional constant, and the end-to-end
//! experiments built on them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dyadic::{is_sign, AtomSet, DyadicSpace, SimpleFunction};
use crate::error::{Error, Result};
use crate::haar::{
    build_tree, classical_tree, count_below, haar_system, HaarLikeSystem, MultiIndex, SplitStrategy, SubsetTree,
};
use crate::narrowness::{epsilon_schedule, sign_defect, EpsilonSchedule, Optimality, SignOptions};
use crate::operators::{extension_bound, keep_blocks, op_norm, FiniteOperator, Subspace};
use crate::scalar::Scalar;
use crate::search::{self, SearchBudget};
use crate::signbuilder::{bounded_sign, complete_to_sign, lemma41_bound_check, BoundedSignResult, Completion, Lemma41Report};
use crate::target::{Method, NormEstimate, NormedTarget};
use crate::uncond::{
    make_y, rank1_series, uncond_constant, uncond_constant_search, BasicSequence, SeriesRep,
    TargetBasis, YLift,
};

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationResult<S> {
    pub system: HaarLikeSystem<S>,
    pub epsilon: S,
    pub schedule: EpsilonSchedule<S>,
    /// `n_prev` per node (natural-order rank); `U h_α` lives on blocks
    /// `starts[r]..cuts[r]` (1-based, end exclusive).
    pub starts: Vec<usize>,
    /// `n_α` per node. May exceed `N + 1`: blocks past `N` are zero.
    pub cuts: Vec<usize>,
    pub u_images: Vec<Vec<S>>,
    pub v_images: Vec<Vec<S>>,
    /// `‖P_{1,n_prev} T̃ h_α‖`, the head defect of the chosen sign.
    pub head_defects: Vec<NormEstimate<S>>,
    /// `‖P_{n_α,∞} T̃ h_α‖`.
    pub tail_norms: Vec<NormEstimate<S>>,
    /// `‖V h_α‖`, upper end certified.
    pub v_node_norms: Vec<NormEstimate<S>>,
    pub optimality: Vec<Optimality>,
    /// `2 Σ ‖V h_α‖ / ‖h_α‖ ≥ ‖V‖` on the span.
    pub v_bound: S,
    pub disjoint: bool,
    pub lift: YLift<S>,
}

impl<S: Scalar> FactorizationResult<S> {
    fn block_dim(&self) -> usize {
        self.lift.summation.dim
    }

    /// `U` extended to the whole source by the orthogonal projection onto
    /// the span of the system.
    pub fn u_operator(&self) -> Result<FiniteOperator<S>> {
        span_operator(&self.system, &self.u_images, &self.lift.space)
    }

    pub fn v_operator(&self) -> Result<FiniteOperator<S>> {
        span_operator(&self.system, &self.v_images, &self.lift.space)
    }

    /// Independent interval for `‖V‖` on the span.
    pub fn v_norm(&self, budget: SearchBudget) -> Result<NormEstimate<S>> {
        Ok(op_norm(&self.v_operator()?, Subspace::Span(&self.system), budget))
    }

    pub fn u_sequence(&self) -> Result<BasicSequence<S>> {
        BasicSequence::new(self.lift.space.clone(), self.u_images.clone())
    }

    /// The operator `Σ T_n = W T̃`.
    pub fn sum_operator(&self) -> Result<FiniteOperator<S>> {
        let (base, _) = self.lift.space.as_uncond().expect("Y is an unconditional sum");
        self.lift.summation.compose(&self.lift.lift, base.clone())
    }

    /// Rechecks the four postconditions from the stored data: `U + V = T̃`
    /// exactly, increasing cuts, disjoint block ranges, `‖V h_α‖ ≤ ε_α`.
    pub fn recheck(&self) -> Result<()> {
        let k = self.system.len();
        let d = self.block_dim();
        let fail = |name: &str, detail: String| Err(Error::certificate(name, detail));
        if [self.starts.len(), self.cuts.len(), self.u_images.len(), self.v_images.len()]
            .iter()
            .any(|&l| l != k)
        {
            return fail("shape", "per-node records do not match the system".into());
        }
        for (r, h) in self.system.functions().iter().enumerate() {
            let y = self.lift.lift.apply(h)?;
            let exact = y
                .iter()
                .zip(&self.u_images[r])
                .zip(&self.v_images[r])
                .all(|((&y, &u), &v)| u + v == y);
            if !exact {
                return fail("U + V = T̃", format!("node {}", MultiIndex::from_rank(r)));
            }
        }
        let mut prev = 1;
        for r in 0..k {
            if self.starts[r] != prev || self.cuts[r] <= prev {
                return fail(
                    "increasing cuts",
                    format!("node {}: range {}..{}", MultiIndex::from_rank(r), self.starts[r], self.cuts[r]),
                );
            }
            prev = self.cuts[r];
        }
        for (r, u) in self.u_images.iter().enumerate() {
            let (lo, hi) = (self.starts[r], self.cuts[r]);
            let outside = u.chunks(d).enumerate().any(|(b, block)| {
                let n = b + 1;
                (n < lo || n >= hi) && block.iter().any(|&x| x != S::zero())
            });
            if outside {
                return fail("block disjointness", format!("node {}", MultiIndex::from_rank(r)));
            }
        }
        let slack = tolerance(self.epsilon);
        for (r, v) in self.v_images.iter().enumerate() {
            let eps = self.schedule.values[r];
            let bound = v_upper(&self.lift.space, v, d, self.starts[r], self.cuts[r]);
            if bound > eps + slack {
                return fail(
                    "‖V h_α‖ ≤ ε_α",
                    format!("node {}: {bound} > {eps}", MultiIndex::from_rank(r)),
                );
            }
        }
        if self.v_bound > self.epsilon + slack {
            return fail("‖V‖ ≤ ε", format!("{} > {}", self.v_bound, self.epsilon));
        }
        Ok(())
    }
}

impl<S: Scalar> FactorizationResult<S> {
    /// Rebuilds the factors from a tree and its cut indices without any
    /// search, e.g. to recheck a stored result. `optimality` is left empty.
    pub fn from_cuts(series: &SeriesRep<S>, tree: SubsetTree<S>, cuts: &[usize], epsilon: S) -> Result<Self> {
        let lift = make_y(series)?;
        if tree.space() != lift.lift.source() {
            return Err(Error::SpaceMismatch("tree lives on another space".into()));
        }
        let levels = tree.max_level();
        if cuts.len() != count_below(levels) {
            return Err(Error::invalid(format!("expected {} cuts, got {}", count_below(levels), cuts.len())));
        }
        let schedule = epsilon_schedule(epsilon, levels, tree.space().exponent(), tree.base().measure())?;
        let system = haar_system(tree);
        let d = lift.summation.dim;
        let mut res = FactorizationResult {
            epsilon,
            schedule,
            starts: Vec::new(),
            cuts: cuts.to_vec(),
            u_images: Vec::new(),
            v_images: Vec::new(),
            head_defects: Vec::new(),
            tail_norms: Vec::new(),
            v_node_norms: Vec::new(),
            optimality: Vec::new(),
            v_bound: S::zero(),
            disjoint: true,
            system,
            lift,
        };
        let mut prev = 1;
        for (h, &cut) in res.system.functions().iter().zip(cuts) {
            let y = res.lift.lift.apply(h)?;
            let (u, v) = split_blocks(&y, d, prev, cut);
            let space = &res.lift.space;
            let head = space.norm_bounds(&keep_blocks(&y, d, 1, prev));
            let tail = space.norm_bounds(&keep_blocks(&y, d, cut, usize::MAX));
            res.v_node_norms.push(v_estimate(space, &v, head, tail));
            res.head_defects.push(head);
            res.tail_norms.push(tail);
            res.starts.push(prev);
            res.u_images.push(u);
            res.v_images.push(v);
            prev = cut;
        }
        let uppers: Vec<S> = res.v_node_norms.iter().map(|e| e.upper).collect();
        res.v_bound = extension_bound(&res.system, &uppers);
        Ok(res)
    }
}

/// `(P_{start,cut} y, y - P_{start,cut} y)`, split without arithmetic.
fn split_blocks<S: Scalar>(y: &[S], d: usize, start: usize, cut: usize) -> (Vec<S>, Vec<S>) {
    let u = keep_blocks(y, d, start, cut);
    let mut v = y.to_vec();
    for n in start.max(1)..cut.min(y.len() / d.max(1) + 1) {
        v[(n - 1) * d..n * d].iter_mut().for_each(|x| *x = S::zero());
    }
    (u, v)
}

fn v_estimate<S: Scalar>(y: &NormedTarget<S>, v: &[S], head: NormEstimate<S>, tail: NormEstimate<S>) -> NormEstimate<S> {
    let direct = y.norm_bounds(v);
    if direct.is_exact() {
        direct
    } else {
        NormEstimate::interval(direct.lower, direct.upper.min(head.upper + tail.upper), Method::Bound)
    }
}

fn tolerance<S: Scalar>(scale: S) -> S {
    S::rel_tol() * S::of(64.0) * (S::one() + scale)
}

/// Best certified upper bound for `‖v‖` where `v` is `T̃ h` with the blocks
/// `start..cut` removed: direct evaluation or the sum of head and tail.
fn v_upper<S: Scalar>(y: &NormedTarget<S>, v: &[S], d: usize, start: usize, cut: usize) -> S {
    let direct = y.norm_bounds(v).upper;
    let head = y.norm_bounds(&keep_blocks(v, d, 1, start)).upper;
    let tail = y.norm_bounds(&keep_blocks(v, d, cut, usize::MAX)).upper;
    direct.min(head + tail)
}

/// `χ_i ↦ Σ_α ⟨χ_i, h_α⟩ / ‖h_α‖_2² · images[α]`.
fn span_operator<S: Scalar>(sys: &HaarLikeSystem<S>, images: &[Vec<S>], target: &NormedTarget<S>) -> Result<FiniteOperator<S>> {
    let space = *sys.space();
    let mu = space.atom_measure();
    let rows = target.dim();
    let mut columns = vec![vec![S::zero(); rows]; space.atom_count()];
    for (r, (h, img)) in sys.functions().iter().zip(images).enumerate() {
        let norm2 = sys.tree().node_by_rank(r).measure();
        for &a in sys.tree().node_by_rank(r).atoms() {
            let w = h.value(a) * mu / norm2;
            columns[a].iter_mut().zip(img).for_each(|(c, &x)| *c += w * x);
        }
    }
    FiniteOperator::new(space, target.clone(), columns)
}

/// Builds the tree node by node in natural order: `h_α` is a sign on `A_α`
/// with small head `P_{1,n_prev} T̃ h_α` (the root's head is empty, so its
/// sign is the interval split), and `n_α` is the smallest cut after
/// `n_prev` whose tail is at most `ε_α / 2`.
pub fn factorize<S: Scalar>(
    series: &SeriesRep<S>,
    set: &AtomSet<S>,
    epsilon: S,
    levels: usize,
    opts: &SignOptions,
) -> Result<FactorizationResult<S>> {
    let half = S::of(0.5);
    if !(epsilon > S::zero() && epsilon < half) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
    }
    let lift = make_y(series)?;
    let space = *lift.lift.source();
    if set.space() != &space {
        return Err(Error::SpaceMismatch("atom set lives on another space".into()));
    }
    if levels == 0 || set.is_empty() || set.len() % (1usize << levels) != 0 {
        return Err(Error::infeasible(format!(
            "{} atoms cannot be halved {levels} times",
            set.len()
        )));
    }
    let schedule = epsilon_schedule(epsilon, levels, space.exponent(), set.measure())?;
    let (base, n_blocks) = lift.space.as_uncond().expect("Y is an unconditional sum");
    let base = base.clone();
    let d = base.dim();
    let internal = count_below(levels);

    let mut nodes = vec![set.clone()];
    let mut splits = Vec::with_capacity(internal);
    let mut starts = Vec::with_capacity(internal);
    let mut cuts = Vec::with_capacity(internal);
    let mut u_images = Vec::with_capacity(internal);
    let mut v_images = Vec::with_capacity(internal);
    let mut head_defects = Vec::with_capacity(internal);
    let mut tail_norms = Vec::with_capacity(internal);
    let mut v_node_norms = Vec::with_capacity(internal);
    let mut optimality = Vec::with_capacity(internal);
    let mut prev = 1usize;
    for rank in 0..internal {
        let alpha = MultiIndex::from_rank(rank);
        let node = nodes[rank].clone();
        let eps = schedule.values[rank];
        let head_blocks = (prev - 1).min(n_blocks);
        let (sign, head, opt) = if head_blocks == 0 {
            let (minus, plus) = node.split_at(node.len() / 2);
            let h = space.indicator(&plus).axpy(-S::one(), &space.indicator(&minus));
            (h, NormEstimate::exact(S::zero()), Optimality::Exact)
        } else {
            let head_target = NormedTarget::uncond_sum(base.clone(), head_blocks)?;
            let rows = head_blocks * d;
            let columns = (0..space.atom_count()).map(|i| lift.lift.column(i)[..rows].to_vec()).collect();
            let head_op = FiniteOperator::new(space, head_target, columns)?;
            let res = sign_defect(&head_op, &node, &opts.with_seed(opts.seed ^ rank as u64))?;
            if res.value.upper > eps * half {
                return Err(Error::ToleranceUnachievable {
                    node: alpha,
                    achieved: res.value.upper.as_f64(),
                    required: (eps * half).as_f64(),
                });
            }
            (res.sign, res.value, res.optimality)
        };
        let y = lift.lift.apply(&sign)?;
        let last = (n_blocks + 1).max(prev + 1);
        let mut cut = last;
        let mut tail = NormEstimate::exact(S::zero());
        for n in prev + 1..last {
            let t = lift.space.norm_bounds(&keep_blocks(&y, d, n, usize::MAX));
            if t.upper <= eps * half {
                cut = n;
                tail = t;
                break;
            }
        }
        let (u, v) = split_blocks(&y, d, prev, cut);
        let v_norm = v_estimate(&lift.space, &v, head, tail);

        let (minus, plus): (Vec<usize>, Vec<usize>) = node.atoms().iter().partition(|&&a| sign.value(a) < S::zero());
        let plus = AtomSet::new(space, plus)?;
        nodes.push(AtomSet::new(space, minus)?);
        nodes.push(plus.clone());
        splits.push(plus);
        starts.push(prev);
        cuts.push(cut);
        u_images.push(u);
        v_images.push(v);
        head_defects.push(head);
        tail_norms.push(tail);
        v_node_norms.push(v_norm);
        optimality.push(opt);
        prev = cut;
    }
    let system = haar_system(build_tree(set, levels, SplitStrategy::Explicit(splits))?);
    let uppers: Vec<S> = v_node_norms.iter().map(|e| e.upper).collect();
    let v_bound = extension_bound(&system, &uppers);
    let res = FactorizationResult {
        system,
        epsilon,
        schedule,
        starts,
        cuts,
        u_images,
        v_images,
        head_defects,
        tail_norms,
        v_node_norms,
        optimality,
        v_bound,
        disjoint: true,
        lift,
    };
    res.recheck()?;
    Ok(res)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct LowerBoundReport<S> {
    pub c: S,
    pub epsilon: S,
    pub m: NormEstimate<S>,
    /// Functions of the span on which the claim `‖Tf‖ ≥ c‖f‖` was tested.
    pub samples: usize,
    pub min_ratio: S,
    /// `‖U‖ ≤ M + ε`.
    pub u_bound: S,
    /// `‖U^{-1}‖ ≤ 1 / (c - ε)`.
    pub u_inverse_bound: S,
    /// Extremes of `‖Uf‖ / ‖f‖` over the samples.
    pub u_ratio_range: (S, S),
    pub haar_constant: NormEstimate<S>,
    /// `(M + ε) / (c - ε)`.
    pub bound: S,
    pub holds: bool,
}

const CLAIM_SAMPLES: usize = 256;
const VERTEX_ENUM: usize = 10;

/// Validates the caller's claim `‖Tf‖ ≥ c‖f‖` on the span of the system by
/// sampling, then checks that the unconditional constant of the system does
/// not exceed `(M + ε)/(c - ε)`.
pub fn check_lower_bound<S: Scalar>(
    res: &FactorizationResult<S>,
    c: S,
    m: NormEstimate<S>,
    budget: SearchBudget,
) -> Result<LowerBoundReport<S>> {
    let eps = res.epsilon;
    if !(c > eps) {
        return Err(Error::invalid(format!("c = {c} must exceed epsilon = {eps}")));
    }
    let t = res.sum_operator()?;
    let sys = &res.system;
    let space = *sys.space();
    let k = sys.len();
    let mut samples: Vec<Vec<S>> = Vec::new();
    for r in 0..k {
        let mut a = vec![S::zero(); k];
        a[r] = S::one();
        samples.push(a);
    }
    if k <= VERTEX_ENUM {
        for pattern in 0u32..1 << k {
            samples.push((0..k).map(|i| if pattern >> i & 1 == 1 { -S::one() } else { S::one() }).collect());
        }
    }
    let mut rng = search::rng(budget.seed, 0x6c62);
    for _ in 0..CLAIM_SAMPLES {
        samples.push((0..k).map(|_| search::uniform(&mut rng)).collect());
    }
    let u_seq = res.u_sequence()?;
    let tol = S::of(1e-9);
    let mut min_ratio = S::infinity();
    let (mut u_lo, mut u_hi) = (S::infinity(), S::zero());
    for a in &samples {
        let mut values = space.zero().into_values();
        for (h, &x) in sys.functions().iter().zip(a) {
            values.iter_mut().zip(h.values()).for_each(|(v, &h)| *v += x * h);
        }
        let f = SimpleFunction::new(space, values)?;
        let norm = f.norm();
        if norm == S::zero() {
            continue;
        }
        let ratio = t.target().norm(&t.apply(&f)?) / norm;
        if ratio < c * (S::one() - tol) {
            return Err(Error::ClaimRejected {
                claim: format!("‖Tf‖ ≥ {c}‖f‖ on the span (found ratio {ratio})"),
                witness: f.values().iter().map(|v| v.as_f64()).collect(),
            });
        }
        min_ratio = min_ratio.min(ratio);
        let u = u_seq.target().norm_bounds(&u_seq.combination(a));
        u_lo = u_lo.min(u.upper / norm);
        u_hi = u_hi.max(u.lower / norm);
    }
    let u_bound = m.upper + eps;
    let u_inverse_bound = S::one() / (c - eps);
    // Sampled consequences of the two bounds.
    if u_hi > u_bound * (S::one() + tol) + tol || u_lo < (c - eps) * (S::one() - tol) - tol {
        return Err(Error::certificate(
            "‖U‖ and ‖U^{-1}‖ bounds",
            format!("sampled ‖Uf‖/‖f‖ in [{u_lo}, {u_hi}] against [{}, {u_bound}]", c - eps),
        ));
    }
    let haar_constant = uncond_constant(&BasicSequence::from_system(sys)?, budget)?;
    let bound = u_bound * u_inverse_bound;
    Ok(LowerBoundReport {
        c,
        epsilon: eps,
        m,
        samples: samples.len(),
        min_ratio,
        u_bound,
        u_inverse_bound,
        u_ratio_range: (u_lo, u_hi),
        haar_constant,
        bound,
        holds: haar_constant.lower <= bound + tol,
    })
}

/// The identity of a dyadic `L_p` cut into `n_slices` orthogonal projections:
/// constants first, then one classical Haar function per slice in natural
/// order, the last slice taking all remaining Haar directions.
pub fn haar_slices<S: Scalar>(space: &DyadicSpace<S>, n_slices: usize) -> Result<Vec<FiniteOperator<S>>> {
    let n = space.atom_count();
    if n_slices == 0 || n_slices > n {
        return Err(Error::invalid(format!("slice count must lie in 1..={n}")));
    }
    let target = NormedTarget::lq(vec![space.atom_measure(); n], space.exponent())?;
    let sys = haar_system(classical_tree(space, space.depth() as usize)?);
    let mu = space.atom_measure();
    let constant: Vec<Vec<S>> = (0..n).map(|_| vec![mu / space.total_measure(); n]).collect();
    let projection = |r: usize| -> Vec<Vec<S>> {
        let h = sys.functions()[r].values();
        let norm2 = sys.tree().node_by_rank(r).measure();
        (0..n).map(|i| h.iter().map(|&x| mu * h[i] / norm2 * x).collect()).collect()
    };
    let mut pieces = vec![constant];
    pieces.extend((0..n - 1).map(projection));
    let mut slices: Vec<Vec<Vec<S>>> = pieces.drain(..n_slices - 1).collect();
    let mut rest = vec![vec![S::zero(); n]; n];
    for p in pieces {
        for (col, pc) in rest.iter_mut().zip(p) {
            col.iter_mut().zip(pc).for_each(|(c, x)| *c += x);
        }
    }
    slices.push(rest);
    slices
        .into_iter()
        .map(|cols| FiniteOperator::new(*space, target.clone(), cols))
        .collect()
}

/// Haar functions that own a slice of [`haar_slices`].
fn own_slices(atoms: usize, n_slices: usize) -> usize {
    if n_slices == atoms {
        atoms - 1
    } else {
        n_slices.saturating_sub(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Theorem33Row<S> {
    pub p: S,
    /// Unconditional norm of the Haar slicing of the identity on `L_p`.
    pub m: NormEstimate<S>,
    /// Unconditional constant of the Haar functions owning a slice.
    pub haar_constant: NormEstimate<S>,
    pub beta: S,
    pub consistent: bool,
}

/// The Haar slicing of the identity on one `L_p` together with its
/// unconditional norm `M` and the unconditional constant of the Haar
/// functions that own a slice.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarSlicing<S> {
    pub series: SeriesRep<S>,
    pub m: NormEstimate<S>,
    pub haar_constant: NormEstimate<S>,
}

/// `M` for [`haar_slices`]; the witness of the Haar constant is pushed
/// through the signed slice sum, so `M.lower` is never below the constant's
/// lower bound.
pub fn haar_slicing<S: Scalar>(space: &DyadicSpace<S>, n_slices: usize, budget: SearchBudget) -> Result<HaarSlicing<S>> {
    let slices = haar_slices(space, n_slices)?;
    let series = SeriesRep::new(slices, budget)?;
    let mut m = series.m();
    let own = own_slices(space.atom_count(), n_slices);
    let haar_constant = if own == 0 {
        NormEstimate::exact(S::one())
    } else {
        let sys = haar_system(classical_tree(space, space.depth() as usize)?);
        let target = NormedTarget::lq(vec![space.atom_measure(); space.atom_count()], space.exponent())?;
        let vectors = sys.functions()[..own].iter().map(|h| h.values().to_vec()).collect();
        let seq = BasicSequence::new(target, vectors)?;
        let found = uncond_constant_search(&seq, budget, None)?;
        if let Some(w) = &found.witness {
            let mut signs = vec![1i8; n_slices];
            signs[1..=own].copy_from_slice(&w.signs);
            let f = seq.combination(&w.coefficients);
            let g = slices_signed(series.terms(), &signs).apply_values(&f);
            let ratio = seq.target().norm(&g) / seq.target().norm(&f);
            if ratio > m.lower {
                m = NormEstimate::interval(ratio, m.upper, m.method);
            }
        }
        found.estimate
    };
    Ok(HaarSlicing { series, m, haar_constant })
}

/// The unconditional norm of the identity sliced along the Haar system, per
/// `L_{p_j}` summand of `L_{p_1} ⊕_2 L_{p_2} ⊕_2 …`. The summands are
/// invariant under the slicing, so each block is computed on its own.
pub fn theorem33_experiment<S: Scalar>(
    p_list: &[S],
    depth: u32,
    n_slices: usize,
    budget: SearchBudget,
) -> Result<Vec<Theorem33Row<S>>> {
    if p_list.is_empty() || p_list.iter().any(|&p| !(p > S::one())) {
        return Err(Error::invalid("every exponent must exceed 1"));
    }
    p_list
        .iter()
        .map(|&p| {
            let h = haar_slicing(&DyadicSpace::new(depth, p)?, n_slices, budget)?;
            Ok(Theorem33Row {
                p,
                m: h.m,
                haar_constant: h.haar_constant,
                beta: crate::uncond::burkholder_beta(p)?,
                consistent: h.m.lower >= h.haar_constant.lower - S::of(1e-9),
            })
        })
        .collect()
}

fn slices_signed<S: Scalar>(slices: &[FiniteOperator<S>], signs: &[i8]) -> FiniteOperator<S> {
    let mut acc = slices[0].scaled(if signs[0] < 0 { -S::one() } else { S::one() });
    for (s, &e) in slices.iter().zip(signs).skip(1) {
        acc = acc
            .axpy(if e < 0 { -S::one() } else { S::one() }, s)
            .expect("slices share shape");
    }
    acc
}

#[derive(Debug, Clone)]
pub struct Theorem43Report<S> {
    pub epsilon: S,
    /// The exact sign produced.
    pub sign: SimpleFunction<S>,
    /// `‖T sign‖`.
    pub measured: NormEstimate<S>,
    /// `‖T f‖` for the bounded-coefficient function before completion.
    pub pre_completion: NormEstimate<S>,
    pub u_part: NormEstimate<S>,
    pub v_part: NormEstimate<S>,
    pub u_bound: S,
    /// `2 ‖U‖ μ(A)`.
    pub constant: S,
    pub delta: S,
    pub lemma41: Lemma41Report<S>,
    pub bounded: BoundedSignResult<S>,
    pub completion: Completion<S>,
    pub factorization: FactorizationResult<S>,
    /// `measured ≤ ε` without the completion slack.
    pub within_epsilon: bool,
}

/// Factorization at `ε/2`, a bounded-coefficient function on the resulting
/// system with `sup|a_α| ≤ ε/(2C)`, and its completion to an exact sign.
pub fn theorem43_pipeline<S: Scalar>(
    series: &SeriesRep<S>,
    set: &AtomSet<S>,
    epsilon: S,
    levels: usize,
    opts: &SignOptions,
    budget: SearchBudget,
) -> Result<Theorem43Report<S>> {
    let t = series.sum();
    if t.source().exponent() != S::one() {
        return Err(Error::invalid("the pipeline needs an L_1 source"));
    }
    if !(epsilon > S::zero()) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let two = S::of(2.0);
    let fact = factorize(series, set, epsilon / two, levels, opts)?;
    let sys = &fact.system;
    let u_bound = op_norm(&fact.u_operator()?, Subspace::Span(sys), budget).upper;
    let constant = two * u_bound * set.measure();
    let delta = if constant > S::zero() {
        (epsilon / (two * constant)).min(S::one())
    } else {
        S::one()
    };
    let bounded = bounded_sign(sys, delta)?;
    let coeffs = &bounded.coefficients;
    let u_seq = fact.u_sequence()?;
    let lemma41 = lemma41_bound_check(&u_seq, sys, coeffs, u_bound, S::one())?;
    if !lemma41.holds {
        return Err(Error::certificate(
            "coefficient bound",
            format!("{} > {}", lemma41.lhs.lower, lemma41.rhs),
        ));
    }
    let v_seq = BasicSequence::new(fact.lift.space.clone(), fact.v_images.clone())?;
    let u_part = u_seq.target().norm_bounds(&u_seq.combination(&coeffs.0));
    let v_part = v_seq.target().norm_bounds(&v_seq.combination(&coeffs.0));
    let pre_completion = t.target().norm_bounds(&t.apply(&bounded.function)?);
    let slack = tolerance(epsilon);
    if pre_completion.lower > u_part.upper + v_part.upper + slack {
        return Err(Error::certificate(
            "‖Tf‖ ≤ ‖Uf‖ + ‖Vf‖",
            format!("{} > {} + {}", pre_completion.lower, u_part.upper, v_part.upper),
        ));
    }
    let completion = complete_to_sign(&bounded, set, Some(&t), opts)?;
    let sign = completion.sign.clone();
    if !is_sign(&sign, set) || sign.integral() != S::zero() {
        return Err(Error::certificate("completion", "result is not a mean-zero sign"));
    }
    let measured = t.target().norm_bounds(&t.apply(&sign)?);
    let correction = completion.correction_image.map_or(S::zero(), |e| e.upper);
    if measured.lower > epsilon + correction + slack {
        return Err(Error::certificate(
            "‖Tf‖ ≤ ε + completion slack",
            format!("{} > {epsilon} + {correction}", measured.lower),
        ));
    }
    Ok(Theorem43Report {
        epsilon,
        within_epsilon: measured.upper <= epsilon,
        sign,
        measured,
        pre_completion,
        u_part,
        v_part,
        u_bound,
        constant,
        delta,
        lemma41,
        bounded,
        completion,
        factorization: fact,
    })
}

/// Slices `T` along a 1-unconditional basis of its target and runs the
/// pipeline on the slices.
pub fn corollary44_demo<S: Scalar>(
    t: &FiniteOperator<S>,
    basis: &TargetBasis<S>,
    set: &AtomSet<S>,
    epsilon: S,
    levels: usize,
    opts: &SignOptions,
    budget: SearchBudget,
) -> Result<Theorem43Report<S>> {
    let d = t.rows();
    let vectors = match basis {
        TargetBasis::Blocks => None,
        TargetBasis::Coordinate => Some(
            (0..d)
                .map(|n| (0..d).map(|i| if i == n { S::one() } else { S::zero() }).collect())
                .collect(),
        ),
        TargetBasis::Explicit(v) => Some(v.clone()),
    };
    if let Some(vectors) = vectors {
        let seq = BasicSequence::new(t.target().clone(), vectors)?;
        let k = uncond_constant(&seq, budget)?;
        if k.lower > S::one() + S::of(1e-9) {
            return Err(Error::invalid(format!(
                "target basis is not 1-unconditional (constant at least {})",
                k.lower
            )));
        }
    }
    let series = rank1_series(t, basis, budget)?;
    theorem43_pipeline(&series, set, epsilon, levels, opts, budget)
}

/// A random operator into `target`: columns drawn uniformly, then scaled so
/// that the largest `‖T χ_i‖ / μ_i` is `scale` (the norm of `T` when `p = 1`).
pub fn random_operator<S: Scalar>(
    space: &DyadicSpace<S>,
    target: NormedTarget<S>,
    scale: S,
    seed: u64,
) -> Result<FiniteOperator<S>> {
    let mut rng = search::rng(seed, 0x7231);
    let d = target.dim();
    let mut columns: Vec<Vec<S>> = (0..space.atom_count())
        .map(|_| (0..d).map(|_| S::of(rng.gen_range(-1.0..1.0))).collect())
        .collect();
    let mu = space.atom_measure();
    let worst = columns.iter().fold(S::zero(), |m, c| m.max(target.norm_bounds(c).upper / mu));
    if worst > S::zero() {
        let k = scale / worst;
        columns.iter_mut().for_each(|c| c.iter_mut().for_each(|x| *x *= k));
    }
    FiniteOperator::new(*space, target, columns)
}

/// `terms` random rank-one operators `f ↦ (∫ f g_k) x_k` with uniform
/// densities and vectors, each rescaled so that `max_i ‖T_k χ_i‖ / μ_i = scale`.
pub fn random_rank_one_series<S: Scalar>(
    space: &DyadicSpace<S>,
    target: NormedTarget<S>,
    terms: usize,
    scale: S,
    seed: u64,
) -> Result<Vec<FiniteOperator<S>>> {
    if terms == 0 {
        return Err(Error::invalid("a series needs at least one term"));
    }
    let mut rng = search::rng(seed, 0x7232);
    (0..terms)
        .map(|_| {
            let g: Vec<S> = (0..space.atom_count()).map(|_| S::of(rng.gen_range(-1.0..1.0))).collect();
            let x: Vec<S> = (0..target.dim()).map(|_| S::of(rng.gen_range(-1.0..1.0))).collect();
            let peak = g.iter().fold(S::zero(), |m, v| m.max(v.abs())) * target.norm_bounds(&x).upper;
            let k = if peak > S::zero() { scale / peak } else { S::zero() };
            let g: Vec<S> = g.into_iter().map(|v| v * k).collect();
            crate::operators::rank_one(space, &g, &x, target.clone())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::identity_like;

    fn l1_space(depth: u32) -> DyadicSpace<f64> {
        DyadicSpace::new(depth, 1.0).unwrap()
    }

    #[test]
    fn zero_series_gives_zero_factors() {
        let s = l1_space(4);
        let zero = FiniteOperator::zero(s, NormedTarget::ellq(3, 1.0).unwrap()).unwrap();
        let series = SeriesRep::new(vec![zero.clone(), zero], SearchBudget::default()).unwrap();
        let res = factorize(&series, &s.full(), 0.1, 3, &SignOptions::default()).unwrap();
        assert!(res.u_images.iter().chain(&res.v_images).all(|v| v.iter().all(|&x| x == 0.0)));
        assert_eq!(res.v_bound, 0.0);
        assert_eq!(res.v_norm(SearchBudget::default()).unwrap().upper, 0.0);
    }

    #[test]
    fn rank_one_slices_factorize_and_recheck() {
        let s = l1_space(5);
        let t = random_operator(&s, NormedTarget::ellq(4, 1.0).unwrap(), 0.5, 7).unwrap();
        let series = rank1_series(&t, &TargetBasis::Coordinate, SearchBudget::default()).unwrap();
        match factorize(&series, &s.full(), 0.2, 2, &SignOptions::default()) {
            Ok(res) => {
                res.recheck().unwrap();
                let v = res.v_norm(SearchBudget::default()).unwrap();
                assert!(v.upper <= res.v_bound + 1e-12 && res.v_bound <= 0.2 + 1e-12);
                // W (U + V) = Σ T_n on the span
                let sum = res.sum_operator().unwrap();
                let w = res.lift.summation;
                for (r, h) in res.system.functions().iter().enumerate() {
                    let uv: Vec<f64> = res.u_images[r].iter().zip(&res.v_images[r]).map(|(a, b)| a + b).collect();
                    let lhs = w.apply(&uv);
                    let rhs = sum.apply(h).unwrap();
                    assert!(lhs.iter().zip(&rhs).all(|(a, b)| (a - b).abs() <= 1e-12));
                }
            }
            Err(Error::ToleranceUnachievable { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn rebuilding_from_cuts_reproduces_the_factors() {
        let s = DyadicSpace::<f64>::new(3, 2.0).unwrap();
        let series = SeriesRep::new(haar_slices(&s, 8).unwrap(), SearchBudget::default()).unwrap();
        let res = factorize(&series, &s.full(), 0.1, 2, &SignOptions::default()).unwrap();
        let back = FactorizationResult::from_cuts(&series, res.system.tree().clone(), &res.cuts, 0.1).unwrap();
        back.recheck().unwrap();
        assert_eq!(back.u_images, res.u_images);
        assert_eq!(back.v_images, res.v_images);
        let mut bad = res.cuts.clone();
        bad.swap(0, 1);
        let broken = FactorizationResult::from_cuts(&series, res.system.tree().clone(), &bad, 0.1).unwrap();
        assert!(matches!(broken.recheck(), Err(Error::Certificate { .. })));
    }

    #[test]
    fn identity_slices_are_rejected() {
        let s = l1_space(3);
        let t = identity_like(&s).unwrap();
        let series = rank1_series(&t, &TargetBasis::Coordinate, SearchBudget::default()).unwrap();
        let err = factorize(&series, &s.full(), 0.1, 2, &SignOptions::default()).unwrap_err();
        assert!(matches!(err, Error::ToleranceUnachievable { .. }), "{err}");
    }

    #[test]
    fn haar_slices_sum_to_identity() {
        let s = DyadicSpace::<f64>::new(3, 3.0).unwrap();
        for n in [1, 3, 8] {
            let slices = haar_slices(&s, n).unwrap();
            assert_eq!(slices.len(), n);
            let id = slices_signed(&slices, &vec![1; n]);
            for i in 0..8 {
                for (r, &x) in id.column(i).iter().enumerate() {
                    assert!((x - if r == i { 1.0 } else { 0.0 }).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn theorem33_trivial_cases() {
        let rows = theorem33_experiment::<f64>(&[2.0], 3, 8, SearchBudget::default()).unwrap();
        assert!((rows[0].m.lower - 1.0).abs() < 1e-12 && (rows[0].m.upper - 1.0).abs() < 1e-12);
        let rows = theorem33_experiment::<f64>(&[3.0], 3, 1, SearchBudget::default()).unwrap();
        assert!((rows[0].m.lower - 1.0).abs() < 1e-12);
        assert!(rows[0].consistent);
    }

    #[test]
    fn lower_bound_claim_is_rejected_above_the_norm() {
        let s = DyadicSpace::<f64>::new(3, 4.0).unwrap();
        let series = SeriesRep::new(haar_slices(&s, 8).unwrap(), SearchBudget::default()).unwrap();
        let res = factorize(&series, &s.full(), 0.1, 2, &SignOptions::default()).unwrap();
        let err = check_lower_bound(&res, 1.5, series.m(), SearchBudget::default()).unwrap_err();
        assert!(matches!(err, Error::ClaimRejected { .. }));
        let ok = check_lower_bound(&res, 1.0, series.m(), SearchBudget::default()).unwrap();
        assert!(ok.holds);
    }

    #[test]
    fn pipeline_on_small_operator() {
        let s = l1_space(6);
        let t = random_operator(&s, NormedTarget::ellq(3, 2.0).unwrap(), 1.0, 3).unwrap();
        let rep = corollary44_demo(&t, &TargetBasis::Coordinate, &s.full(), 0.2, 2, &SignOptions::default(), SearchBudget::default())
            .unwrap();
        assert!(is_sign(&rep.sign, &s.full()));
        assert_eq!(rep.sign.integral(), 0.0);
        assert!(rep.measured.lower <= 0.2 + rep.completion.correction_image.unwrap().upper);
    }
}
