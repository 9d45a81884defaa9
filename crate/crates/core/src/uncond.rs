//! Unconditional constants of finite sequences, Burkholder's constant,
//! unconditional norms of operator series, the sign-sum space `Y` with its
//! lift and summation map, and rank-one slicing along a target basis.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::haar::HaarLikeSystem;
use crate::linalg;
use crate::operators::{op_norm, FiniteOperator, RatioSearch, Subspace};
use crate::scalar::Scalar;
use crate::search::{self, SearchBudget};
use crate::target::{Method, NormEstimate, NormedTarget, UNCOND_EXACT_BLOCKS};

/// Euclidean sequences up to this length are solved exactly over all sign patterns.
const EUCLID_ENUM: usize = 12;
/// General sequences up to this length get a climb for every sign pattern.
const PATTERN_ENUM: usize = 8;
const ALTERNATIONS: usize = 24;

/// `max(p - 1, 1/(p - 1))`, infinite at `p = 1`.
pub fn burkholder_beta<S: Scalar>(p: S) -> Result<S> {
    if !(p >= S::one()) {
        return Err(Error::invalid(format!("Burkholder's constant needs p >= 1, got {p}")));
    }
    if p == S::one() {
        return Ok(S::infinity());
    }
    let q = p - S::one();
    Ok(q.max(q.recip()))
}

/// Vectors `x_k` in a normed target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct BasicSequence<S> {
    target: NormedTarget<S>,
    vectors: Vec<Vec<S>>,
}

impl<S: Scalar> BasicSequence<S> {
    pub fn new(target: NormedTarget<S>, vectors: Vec<Vec<S>>) -> Result<Self> {
        target.validate()?;
        if vectors.iter().any(|v| v.len() != target.dim()) {
            return Err(Error::invalid("sequence vector has the wrong dimension"));
        }
        Ok(BasicSequence { target, vectors })
    }

    /// The functions of a Haar-like system as elements of `L_p`.
    pub fn from_system(sys: &HaarLikeSystem<S>) -> Result<Self> {
        let space = sys.space();
        let target = NormedTarget::lq(vec![space.atom_measure(); space.atom_count()], space.exponent())?;
        Self::new(target, sys.functions().iter().map(|h| h.values().to_vec()).collect())
    }

    pub fn target(&self) -> &NormedTarget<S> {
        &self.target
    }

    pub fn vectors(&self) -> &[Vec<S>] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `Σ a_k x_k`.
    pub fn combination(&self, coeffs: &[S]) -> Vec<S> {
        let mut y = vec![S::zero(); self.target.dim()];
        for (x, &a) in self.vectors.iter().zip(coeffs) {
            if a != S::zero() {
                y.iter_mut().zip(x).for_each(|(o, &v)| *o += a * v);
            }
        }
        y
    }

    /// `‖Σ ε_k a_k x_k‖ / ‖Σ a_k x_k‖` (0 when the denominator vanishes).
    pub fn ratio(&self, signs: &[i8], coeffs: &[S]) -> S {
        let signed: Vec<S> = coeffs
            .iter()
            .zip(signs)
            .map(|(&a, &e)| if e < 0 { -a } else { a })
            .collect();
        let den = self.target.norm(&self.combination(coeffs));
        if den > S::zero() {
            self.target.norm(&self.combination(&signed)) / den
        } else {
            S::zero()
        }
    }
}

/// A sign pattern and coefficients attaining a ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct UncondWitness<S> {
    pub signs: Vec<i8>,
    pub coefficients: Vec<S>,
    pub ratio: S,
}

impl<S: Scalar> UncondWitness<S> {
    /// Extends with zero coefficients, e.g. from a subsystem to the full system.
    pub fn padded(&self, len: usize) -> UncondWitness<S> {
        let mut w = self.clone();
        w.signs.resize(len, 1);
        w.coefficients.resize(len, S::zero());
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UncondResult<S> {
    pub estimate: NormEstimate<S>,
    pub witness: Option<UncondWitness<S>>,
}

/// Unconditional constant `sup_{ε, a} ‖Σ ε_k a_k x_k‖ / ‖Σ a_k x_k‖`.
pub fn uncond_constant<S: Scalar>(seq: &BasicSequence<S>, budget: SearchBudget) -> Result<NormEstimate<S>> {
    Ok(uncond_constant_search(seq, budget, None)?.estimate)
}

/// As [`uncond_constant`], optionally warm-started from a witness of a
/// subsystem (the first vectors of `seq`); its ratio then carries over as a
/// lower bound.
pub fn uncond_constant_search<S: Scalar>(
    seq: &BasicSequence<S>,
    budget: SearchBudget,
    start: Option<&UncondWitness<S>>,
) -> Result<UncondResult<S>> {
    let k = seq.len();
    if seq.vectors.iter().any(|v| v.iter().all(|&x| x == S::zero())) {
        return Err(Error::invalid("unconditional constants need nonzero vectors"));
    }
    if k <= 1 {
        return Ok(UncondResult {
            estimate: NormEstimate::exact(S::one()),
            witness: None,
        });
    }
    if let Some(w) = start {
        if w.signs.len() > k || w.coefficients.len() != w.signs.len() {
            return Err(Error::invalid("warm start is longer than the sequence"));
        }
    }
    // Flip each vector so its first nonzero entry is positive: the constant
    // is invariant and the search then sees identical data.
    let flips: Vec<bool> = seq
        .vectors
        .iter()
        .map(|v| v.iter().find(|&&x| x != S::zero()).is_some_and(|&x| x < S::zero()))
        .collect();
    let canon: Vec<Vec<S>> = seq
        .vectors
        .iter()
        .zip(&flips)
        .map(|(v, &f)| if f { v.iter().map(|&x| -x).collect() } else { v.clone() })
        .collect();
    let canon_seq = BasicSequence {
        target: seq.target.clone(),
        vectors: canon,
    };
    let start = start.map(|w| {
        let mut w = w.padded(k);
        for (a, &f) in w.coefficients.iter_mut().zip(&flips) {
            if f {
                *a = -*a;
            }
        }
        w
    });
    let mut res = match seq.target.euclidean_weights() {
        Some(w) => euclidean_constant(&canon_seq, &w, budget)?,
        None => general_constant(&canon_seq, budget, start.as_ref()),
    };
    if let Some(s) = &start {
        if s.ratio > res.estimate.lower {
            res.estimate = NormEstimate::interval(s.ratio, res.estimate.upper, Method::Search);
            res.witness = Some(s.clone());
        }
    }
    if let Some(w) = &mut res.witness {
        for (a, &f) in w.coefficients.iter_mut().zip(&flips) {
            if f {
                *a = -*a;
            }
        }
    }
    Ok(res)
}

fn euclidean_constant<S: Scalar>(seq: &BasicSequence<S>, weights: &[S], budget: SearchBudget) -> Result<UncondResult<S>> {
    let k = seq.len();
    let gram = DMatrix::from_fn(k, k, |i, j| {
        seq.vectors[i]
            .iter()
            .zip(&seq.vectors[j])
            .zip(weights)
            .map(|((&a, &b), &w)| (a * b * w).as_f64())
            .sum::<f64>()
    });
    let orthogonal = (0..k).all(|i| (0..k).all(|j| i == j || gram[(i, j)] == 0.0));
    if orthogonal {
        return Ok(UncondResult {
            estimate: NormEstimate::exact(S::one()),
            witness: None,
        });
    }
    let (lo, hi) = linalg::symmetric_extremes(gram.clone());
    if !(lo > 0.0) {
        return Err(Error::invalid("sequence vectors are linearly dependent"));
    }
    let value = |signs: &[i8]| {
        let d = DMatrix::from_fn(k, k, |i, j| gram[(i, j)] * f64::from(signs[i] * signs[j]));
        linalg::generalized_max_eigenvalue(&d, &gram).unwrap_or(1.0).max(1.0).sqrt()
    };
    if k <= EUCLID_ENUM {
        let best = (0..1u64 << (k - 1))
            .into_par_iter()
            .map(|pattern| {
                let signs = pattern_signs(pattern, k);
                value(&signs)
            })
            .reduce(|| 1.0, f64::max);
        return Ok(UncondResult {
            estimate: NormEstimate::exact(S::of(best)),
            witness: None,
        });
    }
    let mut best = 1.0f64;
    let mut rng = search::rng(budget.seed, 0x7563_0000);
    for _ in 0..budget.restarts.max(1) {
        let mut signs: Vec<i8> = (0..k).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        let mut current = value(&signs);
        loop {
            let mut improved = false;
            for i in 0..k {
                signs[i] = -signs[i];
                let v = value(&signs);
                if v > current {
                    current = v;
                    improved = true;
                } else {
                    signs[i] = -signs[i];
                }
            }
            if !improved {
                break;
            }
        }
        best = best.max(current);
    }
    Ok(UncondResult {
        estimate: NormEstimate::interval(S::of(best), S::of((hi / lo).sqrt()), Method::Search),
        witness: None,
    })
}

/// `ε_0 = +1`, `ε_i` from bit `i - 1` of the pattern.
fn pattern_signs(pattern: u64, k: usize) -> Vec<i8> {
    (0..k)
        .map(|i| if i > 0 && pattern >> (i - 1) & 1 == 1 { -1 } else { 1 })
        .collect()
}

/// Climbs over coefficients with the signs fixed, then flips single signs
/// while that helps, until neither move improves.
fn alternate<S: Scalar>(seq: &BasicSequence<S>, signs: &mut [i8], coeffs: &mut [S], sweeps: usize) -> S {
    let norm = |y: &[S]| seq.target.norm(y);
    let mut current = seq.ratio(signs, coeffs);
    for _ in 0..ALTERNATIONS {
        let search = RatioSearch {
            images: seq
                .vectors
                .iter()
                .zip(signs.iter())
                .map(|(v, &e)| if e < 0 { v.iter().map(|&x| -x).collect() } else { v.clone() })
                .collect(),
            domain: &seq.vectors,
            num: norm,
            den: norm,
        };
        let mut trial = coeffs.to_vec();
        let climbed = search.climb(&mut trial, sweeps);
        if climbed > current {
            current = climbed;
            coeffs.copy_from_slice(&trial);
        }
        let mut flipped = false;
        for i in 0..signs.len() {
            signs[i] = -signs[i];
            let r = seq.ratio(signs, coeffs);
            if r > current {
                current = r;
                flipped = true;
            } else {
                signs[i] = -signs[i];
            }
        }
        if !flipped {
            break;
        }
    }
    current
}

fn general_constant<S: Scalar>(
    seq: &BasicSequence<S>,
    budget: SearchBudget,
    start: Option<&UncondWitness<S>>,
) -> UncondResult<S> {
    let k = seq.len();
    let mut starts: Vec<(Vec<i8>, Vec<S>)> = Vec::new();
    if let Some(w) = start {
        starts.push((w.signs.clone(), w.coefficients.clone()));
    }
    if k <= PATTERN_ENUM {
        for pattern in 0..1u64 << (k - 1) {
            starts.push((pattern_signs(pattern, k), vec![S::one(); k]));
        }
    } else {
        starts.push((vec![1; k], vec![S::one(); k]));
        starts.push(((0..k).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect(), vec![S::one(); k]));
    }
    let mut rng = search::rng(budget.seed, 0x7563_0001);
    for _ in 0..budget.restarts {
        let signs = (0..k).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        let coeffs = (0..k).map(|_| search::uniform::<S>(&mut rng)).collect();
        starts.push((signs, coeffs));
    }
    let results: Vec<(S, Vec<i8>, Vec<S>)> = starts
        .into_par_iter()
        .map(|(mut signs, mut coeffs)| {
            let r = alternate(seq, &mut signs, &mut coeffs, budget.sweeps);
            (r, signs, coeffs)
        })
        .collect();
    let mut best = UncondWitness {
        signs: vec![1; k],
        coefficients: vec![S::one(); k],
        ratio: S::one(),
    };
    for (_, signs, coeffs) in results {
        // Recompute so the reported ratio is exactly reproducible from the witness.
        let r = seq.ratio(&signs, &coeffs);
        if r > best.ratio {
            best = UncondWitness {
                signs,
                coefficients: coeffs,
                ratio: r,
            };
        }
    }
    UncondResult {
        estimate: NormEstimate::interval(best.ratio, S::infinity(), Method::Search),
        witness: Some(best),
    }
}

fn signed_sum<S: Scalar>(terms: &[FiniteOperator<S>], signs: &[i8]) -> FiniteOperator<S> {
    let mut data = vec![S::zero(); terms[0].data().len()];
    for (t, &e) in terms.iter().zip(signs) {
        let s = if e < 0 { -S::one() } else { S::one() };
        data.iter_mut().zip(t.data()).for_each(|(o, &x)| *o += s * x);
    }
    FiniteOperator::from_column_major(*terms[0].source(), terms[0].target().clone(), data)
        .expect("terms share shape")
}

const SEARCHED_PATTERN_BITS: usize = 10;

/// `M = sup_± ‖Σ ± T_n‖`.
pub fn uncond_norm<S: Scalar>(terms: &[FiniteOperator<S>], budget: SearchBudget) -> Result<NormEstimate<S>> {
    let n = terms.len();
    if n == 0 {
        return Err(Error::invalid("an operator series needs at least one term"));
    }
    check_compatible(terms)?;
    let norm_of = |signs: &[i8]| op_norm(&signed_sum(terms, signs), Subspace::All, budget);
    // Enumerating every pattern only pays when each norm is exact; searched
    // norms get the greedy ascent beyond a small number of patterns.
    let first = norm_of(&vec![1i8; n]);
    if n <= UNCOND_EXACT_BLOCKS && (first.is_exact() || n - 1 <= SEARCHED_PATTERN_BITS) {
        let all: Vec<NormEstimate<S>> = (0..1u64 << (n - 1))
            .into_par_iter()
            .map(|pattern| norm_of(&pattern_signs(pattern, n)))
            .collect();
        let exact = all.iter().all(NormEstimate::is_exact);
        let lower = all.iter().fold(S::zero(), |m, e| m.max(e.lower));
        let upper = all.iter().fold(S::zero(), |m, e| m.max(e.upper));
        return Ok(if exact {
            NormEstimate::exact(lower)
        } else {
            NormEstimate::interval(lower, upper, Method::Search)
        });
    }
    let mut signs = vec![1i8; n];
    let mut best = first.lower;
    loop {
        let mut improved = false;
        for i in 1..n {
            signs[i] = -signs[i];
            let v = norm_of(&signs).lower;
            if v > best {
                best = v;
                improved = true;
            } else {
                signs[i] = -signs[i];
            }
        }
        if !improved {
            break;
        }
    }
    let upper = terms.iter().map(|t| op_norm(t, Subspace::All, budget).upper).sum();
    Ok(NormEstimate::interval(best, upper, Method::Search))
}

fn check_compatible<S: Scalar>(terms: &[FiniteOperator<S>]) -> Result<()> {
    let first = &terms[0];
    if terms.iter().any(|t| t.source() != first.source() || t.target() != first.target()) {
        return Err(Error::SpaceMismatch("series terms must share source and target".into()));
    }
    Ok(())
}

/// A finite operator series `T_1, …, T_N` with its unconditional norm.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRep<S> {
    terms: Vec<FiniteOperator<S>>,
    m: NormEstimate<S>,
}

impl<S: Scalar> SeriesRep<S> {
    pub fn new(terms: Vec<FiniteOperator<S>>, budget: SearchBudget) -> Result<Self> {
        let m = uncond_norm(&terms, budget)?;
        Ok(SeriesRep { terms, m })
    }

    /// A series whose unconditional norm is already known, e.g. read back
    /// from a stored run.
    pub fn from_parts(terms: Vec<FiniteOperator<S>>, m: NormEstimate<S>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::invalid("an operator series needs at least one term"));
        }
        check_compatible(&terms)?;
        Ok(SeriesRep { terms, m })
    }

    pub fn terms(&self) -> &[FiniteOperator<S>] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn m(&self) -> NormEstimate<S> {
        self.m
    }

    pub fn sum(&self) -> FiniteOperator<S> {
        signed_sum(&self.terms, &vec![1; self.terms.len()])
    }

    pub fn signed_sum(&self, signs: &[i8]) -> FiniteOperator<S> {
        signed_sum(&self.terms, signs)
    }
}

/// `W y = Σ y_n` on an unconditional sum of `blocks` copies of a `dim`-dimensional target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SummationMap {
    pub dim: usize,
    pub blocks: usize,
}

impl SummationMap {
    pub fn apply<S: Scalar>(&self, y: &[S]) -> Vec<S> {
        assert_eq!(y.len(), self.dim * self.blocks, "vector does not live in Y");
        let mut out = vec![S::zero(); self.dim];
        for block in y.chunks(self.dim) {
            out.iter_mut().zip(block).for_each(|(o, &v)| *o += v);
        }
        out
    }

    /// `W ∘ op` for an operator into `Y`.
    pub fn compose<S: Scalar>(&self, op: &FiniteOperator<S>, target: NormedTarget<S>) -> Result<FiniteOperator<S>> {
        let columns = (0..op.cols()).map(|i| self.apply(op.column(i))).collect();
        FiniteOperator::new(*op.source(), target, columns)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct YLift<S> {
    /// `Y`: the sign-sum space over the series target.
    pub space: NormedTarget<S>,
    /// `T̃ f = (T_1 f, …, T_N f)`.
    pub lift: FiniteOperator<S>,
    pub summation: SummationMap,
}

pub fn make_y<S: Scalar>(series: &SeriesRep<S>) -> Result<YLift<S>> {
    let terms = series.terms();
    let base = terms[0].target().clone();
    let dim = base.dim();
    let y = NormedTarget::uncond_sum(base, terms.len())?;
    let cols = terms[0].cols();
    let mut data = Vec::with_capacity(cols * dim * terms.len());
    for i in 0..cols {
        for t in terms {
            data.extend_from_slice(t.column(i));
        }
    }
    let lift = FiniteOperator::from_column_major(*terms[0].source(), y.clone(), data)?;
    Ok(YLift {
        space: y,
        lift,
        summation: SummationMap {
            dim,
            blocks: terms.len(),
        },
    })
}

/// How the target of an operator is split into unconditional pieces.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetBasis<S> {
    /// Unit vectors of the target coordinates.
    Coordinate,
    /// Basis vectors `b_n` (each of target dimension).
    Explicit(Vec<Vec<S>>),
    /// The blocks of an unconditional-sum target (a decomposition into
    /// finite-dimensional pieces rather than a basis).
    Blocks,
}

const SPOT_CHECKS: usize = 24;

/// `(P_n - P_{n-1}) T` for the partial-sum projections `P_n` of the basis.
pub fn rank1_series<S: Scalar>(t: &FiniteOperator<S>, basis: &TargetBasis<S>, budget: SearchBudget) -> Result<SeriesRep<S>> {
    let d = t.rows();
    let target = t.target();
    // Each piece: (coefficient extractor, reassembly) as a d x d projection.
    let projections: Vec<DMatrix<f64>> = match basis {
        TargetBasis::Coordinate => (0..d)
            .map(|n| DMatrix::from_fn(d, d, |i, j| if i == n && j == n { 1.0 } else { 0.0 }))
            .collect(),
        TargetBasis::Explicit(vectors) => {
            if vectors.len() != d || vectors.iter().any(|v| v.len() != d) {
                return Err(Error::invalid("basis must consist of exactly dim vectors of length dim"));
            }
            let b = DMatrix::from_fn(d, d, |i, n| vectors[n][i].as_f64());
            let inv = linalg::invert(b.clone()).ok_or_else(|| Error::invalid("basis vectors do not span the target"))?;
            (0..d).map(|n| b.column(n) * inv.row(n)).collect()
        }
        TargetBasis::Blocks => {
            let (base, blocks) = target
                .as_uncond()
                .ok_or_else(|| Error::invalid("block slicing needs an unconditional-sum target"))?;
            let bd = base.dim();
            (0..blocks)
                .map(|n| DMatrix::from_fn(d, d, |i, j| if i == j && i / bd == n { 1.0 } else { 0.0 }))
                .collect()
        }
    };
    // Sign-invariance spot checks: ‖Σ ε_n P_n y‖ = ‖y‖.
    let mut rng = search::rng(budget.seed, 0x7231_0000);
    for _ in 0..SPOT_CHECKS {
        let y: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut flipped = vec![0.0f64; d];
        for p in &projections {
            let e = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let py = p * nalgebra::DVector::from_column_slice(&y);
            flipped.iter_mut().zip(py.iter()).for_each(|(o, &v)| *o += e * v);
        }
        let a = target.norm(&y.iter().map(|&v| S::of(v)).collect::<Vec<_>>());
        let b = target.norm(&flipped.iter().map(|&v| S::of(v)).collect::<Vec<_>>());
        if (a - b).abs() > S::of(1e-9) * a.max(S::one()) {
            return Err(Error::invalid("target norm is not 1-unconditional for this basis"));
        }
    }
    let terms = projections
        .iter()
        .map(|p| {
            let columns = (0..t.cols())
                .map(|i| {
                    let c = nalgebra::DVector::from_iterator(d, t.column(i).iter().map(|v| v.as_f64()));
                    match basis {
                        // Exact coordinate slicing: copy, don't multiply.
                        TargetBasis::Coordinate | TargetBasis::Blocks => t
                            .column(i)
                            .iter()
                            .enumerate()
                            .map(|(r, &v)| if p[(r, r)] == 1.0 { v } else { S::zero() })
                            .collect(),
                        TargetBasis::Explicit(_) => (p * c).iter().map(|&v| S::of(v)).collect(),
                    }
                })
                .collect();
            FiniteOperator::new(*t.source(), target.clone(), columns)
        })
        .collect::<Result<Vec<_>>>()?;
    SeriesRep::new(terms, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::DyadicSpace;
    use crate::haar::{classical_tree, haar_system};
    use crate::operators::identity_like;

    #[test]
    fn burkholder_values() {
        assert_eq!(burkholder_beta(2.0f64).unwrap(), 1.0);
        assert_eq!(burkholder_beta(3.0f64).unwrap(), 2.0);
        assert_eq!(burkholder_beta(1.5f64).unwrap(), 2.0);
        assert_eq!(burkholder_beta(4.0f64).unwrap(), 3.0);
        assert!(burkholder_beta(1.0f64).unwrap().is_infinite());
        assert!(burkholder_beta(0.5f64).is_err());
    }

    #[test]
    fn orthogonal_and_block_sequences_are_one_unconditional() {
        let s = DyadicSpace::<f64>::new(3, 2.0).unwrap();
        let sys = haar_system(classical_tree(&s, 3).unwrap());
        let seq = BasicSequence::from_system(&sys).unwrap();
        assert_eq!(uncond_constant(&seq, SearchBudget::default()).unwrap(), NormEstimate::exact(1.0));
        let y = NormedTarget::uncond_sum(NormedTarget::ellq(2, 1.0).unwrap(), 3).unwrap();
        let seq = BasicSequence::new(
            y,
            vec![
                vec![1.0, 2.0, 0.0, 0.0, 0.0, 0.0],
                vec![0.0, 0.0, -1.0, 1.0, 0.0, 0.0],
                vec![0.0, 0.0, 0.0, 0.0, 3.0, 1.0],
            ],
        )
        .unwrap();
        let c: NormEstimate<f64> = uncond_constant(&seq, SearchBudget::default()).unwrap();
        assert!((c.lower - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_orthogonal_euclidean_pair() {
        // x1 = e1, x2 = e1 + e2: sup ratio is sqrt of the generalized eigenvalue.
        let seq = BasicSequence::new(
            NormedTarget::<f64>::ellq(2, 2.0).unwrap(),
            vec![vec![1.0, 0.0], vec![1.0, 1.0]],
        )
        .unwrap();
        let c = uncond_constant(&seq, SearchBudget::default()).unwrap();
        assert!(c.is_exact());
        // ‖a e1 - b(e1+e2)‖ / ‖a e1 + b(e1+e2)‖ peaks at 1 + sqrt 2.
        assert!((c.lower - (1.0 + 2f64.sqrt())).abs() < 1e-9, "{c:?}");
    }

    #[test]
    fn series_norm_examples() {
        let s = DyadicSpace::<f64>::new(2, 1.0).unwrap();
        let id = identity_like(&s).unwrap();
        let one = uncond_norm(&[id.clone()], SearchBudget::default()).unwrap();
        assert_eq!(one, NormEstimate::exact(1.0));
        let two = uncond_norm(&[id.clone(), id.scaled(-1.0)], SearchBudget::default()).unwrap();
        assert_eq!(two, NormEstimate::exact(2.0));
        let series = rank1_series(&id, &TargetBasis::Coordinate, SearchBudget::default()).unwrap();
        assert_eq!(series.len(), 4);
        assert_eq!(series.sum(), id);
        let lift = make_y(&series).unwrap();
        let w = lift.summation.compose(&lift.lift, id.target().clone()).unwrap();
        assert_eq!(w, id);
    }
}
