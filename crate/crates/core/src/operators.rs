//! Finite operators from a dyadic `L_p` into a [`NormedTarget`].
//!
//! Column `i` of the matrix is the image of the unnormalized atom indicator
//! `chi_i`, so `T f = Σ_i v_i column_i`.

use serde::{Deserialize, Serialize};

use crate::dyadic::{DyadicSpace, Partition, SimpleFunction};
use crate::error::{Error, Result};
use crate::haar::{classical_tree, haar_system, HaarLikeSystem};
use crate::linalg;
use crate::scalar::Scalar;
use crate::search::{self, SearchBudget};
use crate::target::{Method, NormEstimate, NormedTarget};

/// Exhaustive sign-vector candidates are tried for spaces up to this many atoms.
const SIGN_VERTEX_ATOMS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteOperator<S> {
    source: DyadicSpace<S>,
    target: NormedTarget<S>,
    rows: usize,
    data: Vec<S>,
}

impl<S: Scalar> FiniteOperator<S> {
    pub fn new(source: DyadicSpace<S>, target: NormedTarget<S>, columns: Vec<Vec<S>>) -> Result<Self> {
        if columns.len() != source.atom_count() {
            return Err(Error::invalid(format!(
                "expected {} columns, got {}",
                source.atom_count(),
                columns.len()
            )));
        }
        let rows = target.dim();
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::invalid(format!("every column must have {rows} entries")));
        }
        Self::from_column_major(source, target, columns.concat())
    }

    pub fn from_column_major(source: DyadicSpace<S>, target: NormedTarget<S>, data: Vec<S>) -> Result<Self> {
        target.validate()?;
        let rows = target.dim();
        if data.len() != rows * source.atom_count() {
            return Err(Error::invalid("matrix size does not match source and target"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        Ok(FiniteOperator {
            source,
            target,
            rows,
            data,
        })
    }

    pub fn zero(source: DyadicSpace<S>, target: NormedTarget<S>) -> Result<Self> {
        let n = target.dim() * source.atom_count();
        Self::from_column_major(source, target, vec![S::zero(); n])
    }

    pub fn source(&self) -> &DyadicSpace<S> {
        &self.source
    }

    pub fn target(&self) -> &NormedTarget<S> {
        &self.target
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.source.atom_count()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn column(&self, i: usize) -> &[S] {
        &self.data[i * self.rows..(i + 1) * self.rows]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == S::zero())
    }

    pub fn apply(&self, f: &SimpleFunction<S>) -> Result<Vec<S>> {
        if f.space() != &self.source {
            return Err(Error::SpaceMismatch("operator applied off its source".into()));
        }
        Ok(self.apply_values(f.values()))
    }

    /// Linear image of a raw value vector (length = atom count).
    pub fn apply_values(&self, v: &[S]) -> Vec<S> {
        let start = vec![S::zero(); self.rows];
        combination(&start, v.iter().enumerate().map(|(i, &c)| (c, self.column(i))))
    }

    /// `‖T f‖` in the target.
    pub fn image_norm(&self, f: &SimpleFunction<S>) -> Result<S> {
        Ok(self.target.norm(&self.apply(f)?))
    }

    fn check_compatible(&self, other: &FiniteOperator<S>) -> Result<()> {
        if self.source != other.source || self.target != other.target {
            return Err(Error::SpaceMismatch("operators have different source or target".into()));
        }
        Ok(())
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: S, other: &FiniteOperator<S>) -> Result<FiniteOperator<S>> {
        self.check_compatible(other)?;
        Ok(FiniteOperator {
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + c * b).collect(),
            ..self.clone()
        })
    }

    pub fn scaled(&self, c: S) -> FiniteOperator<S> {
        FiniteOperator {
            data: self.data.iter().map(|&a| a * c).collect(),
            ..self.clone()
        }
    }

    /// Same matrix read into a different target of equal dimension.
    pub fn with_target(&self, target: NormedTarget<S>) -> Result<FiniteOperator<S>> {
        if target.dim() != self.rows {
            return Err(Error::invalid("target dimension differs"));
        }
        Self::from_column_major(self.source, target, self.data.clone())
    }

    /// `g ↦ T(embed g)` on the coarse space of `partition`.
    pub fn restrict(&self, partition: &Partition<S>) -> Result<FiniteOperator<S>> {
        if partition.base().space() != &self.source {
            return Err(Error::SpaceMismatch("partition lives on another space".into()));
        }
        let coarse = partition.coarse_space()?;
        let mut data = Vec::with_capacity(self.rows * partition.blocks().len());
        for block in partition.blocks() {
            let mut col = vec![S::zero(); self.rows];
            for &a in block.atoms() {
                col.iter_mut().zip(self.column(a)).for_each(|(o, &x)| *o += x);
            }
            data.extend(col);
        }
        FiniteOperator::from_column_major(coarse, self.target.clone(), data)
    }

    pub fn to_record(&self) -> OperatorRecord<S> {
        OperatorRecord {
            format: OPERATOR_FORMAT.to_string(),
            version: 1,
            source: self.source,
            target: self.target.clone(),
            rows: self.rows,
            cols: self.cols(),
            columns: (0..self.cols()).map(|i| self.column(i).to_vec()).collect(),
        }
    }

    pub fn from_record(r: &OperatorRecord<S>) -> Result<Self> {
        if r.format != OPERATOR_FORMAT {
            return Err(Error::invalid(format!("unknown operator format {:?}", r.format)));
        }
        if r.rows != r.target.dim() || r.cols != r.source.atom_count() {
            return Err(Error::invalid("operator header disagrees with its data"));
        }
        Self::new(r.source, r.target.clone(), r.columns.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_record()).expect("operator record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: OperatorRecord<S> = serde_json::from_str(text).map_err(|e| Error::invalid(e.to_string()))?;
        Self::from_record(&r)
    }
}

pub const OPERATOR_FORMAT: &str = "narrowops-operator";

/// Header (source space, target descriptor, shape) followed by the columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct OperatorRecord<S> {
    pub format: String,
    pub version: u32,
    pub source: DyadicSpace<S>,
    pub target: NormedTarget<S>,
    pub rows: usize,
    pub cols: usize,
    pub columns: Vec<Vec<S>>,
}

/// Columns `mu_i e_i` into `ℓ_1^n`: an isometric copy of `L_1` when `p = 1`.
pub fn identity_like<S: Scalar>(source: &DyadicSpace<S>) -> Result<FiniteOperator<S>> {
    let n = source.atom_count();
    let target = NormedTarget::ellq(n, S::one())?;
    let mu = source.atom_measure();
    let mut data = vec![S::zero(); n * n];
    for i in 0..n {
        data[i * n + i] = mu;
    }
    FiniteOperator::from_column_major(*source, target, data)
}

/// `f ↦ (∫ f g) x`.
pub fn rank_one<S: Scalar>(
    source: &DyadicSpace<S>,
    density: &[S],
    x: &[S],
    target: NormedTarget<S>,
) -> Result<FiniteOperator<S>> {
    if density.len() != source.atom_count() || x.len() != target.dim() {
        return Err(Error::invalid("rank-one data has the wrong shape"));
    }
    let mu = source.atom_measure();
    let data = density
        .iter()
        .flat_map(|&g| x.iter().map(move |&xv| g * mu * xv))
        .collect();
    FiniteOperator::from_column_major(*source, target, data)
}

/// `f ↦ (∫ f) x`.
pub fn integration<S: Scalar>(source: &DyadicSpace<S>, x: &[S], target: NormedTarget<S>) -> Result<FiniteOperator<S>> {
    rank_one(source, &vec![S::one(); source.atom_count()], x, target)
}

/// Discretized `(T f)(s) = ∫_0^1 f(s, t) dt` on the product grid with
/// `2^depth_s × 2^depth_t` atoms (atom `s·2^depth_t + t`), into `L_p` on the
/// `s` grid.
pub fn counterexample_operator<S: Scalar>(depth_s: u32, depth_t: u32, p: S) -> Result<FiniteOperator<S>> {
    let source = DyadicSpace::new(depth_s + depth_t, p)?;
    let ns = 1usize << depth_s;
    let nt = 1usize << depth_t;
    let target = NormedTarget::lq(vec![S::one() / S::of_usize(ns); ns], p)?;
    let weight = S::one() / S::of_usize(nt);
    let mut data = vec![S::zero(); ns * ns * nt];
    for s in 0..ns {
        for t in 0..nt {
            data[(s * nt + t) * ns + s] = weight;
        }
    }
    FiniteOperator::from_column_major(source, target, data)
}

/// The partition of the product grid by the `s` coordinate.
pub fn s_coordinate_partition<S: Scalar>(space: &DyadicSpace<S>, depth_s: u32) -> Result<Partition<S>> {
    Partition::equal_intervals(&space.full(), 1usize << depth_s)
}

/// `P_{n,m}` on an unconditional sum with `blocks` blocks: keeps blocks
/// `n..m` (1-based, `m` exclusive, `None` = ∞ = `blocks + 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockProjection {
    start: usize,
    end: usize,
    blocks: usize,
}

pub fn block_projection(n: usize, m: Option<usize>, blocks: usize) -> Result<BlockProjection> {
    let end = m.unwrap_or(blocks + 1);
    if n < 1 || n >= end || end > blocks + 1 {
        return Err(Error::invalid(format!(
            "projection range [{n}, {end}) invalid for {blocks} blocks"
        )));
    }
    Ok(BlockProjection { start: n, end, blocks })
}

impl BlockProjection {
    pub fn range(&self) -> (usize, usize) {
        (self.start, self.end)
    }

    pub fn apply<S: Scalar>(&self, target: &NormedTarget<S>, y: &[S]) -> Result<Vec<S>> {
        let (base, blocks) = target
            .as_uncond()
            .ok_or_else(|| Error::invalid("block projections act on unconditional sums"))?;
        if blocks != self.blocks || y.len() != target.dim() {
            return Err(Error::invalid("vector does not match the projection's block count"));
        }
        Ok(keep_blocks(y, base.dim(), self.start, self.end))
    }
}

/// `start + Σ c_k x_k` with compensated summation, so that cancelling
/// signed columns give exact zeros.
pub(crate) fn combination<'a, S: Scalar + 'a>(start: &[S], terms: impl Iterator<Item = (S, &'a [S])>) -> Vec<S> {
    let mut out = start.to_vec();
    let mut comp = vec![S::zero(); out.len()];
    for (c, x) in terms {
        if c == S::zero() {
            continue;
        }
        for ((o, e), &x) in out.iter_mut().zip(&mut comp).zip(x) {
            let term = c * x;
            let sum = *o + term;
            *e += if o.abs() >= term.abs() { (*o - sum) + term } else { (term - sum) + *o };
            *o = sum;
        }
    }
    out.iter_mut().zip(comp).for_each(|(o, e)| *o += e);
    out
}

/// Zeroes every block outside `[start, end)` (1-based); ranges past the
/// last block select nothing from the missing tail.
pub(crate) fn keep_blocks<S: Scalar>(y: &[S], d: usize, start: usize, end: usize) -> Vec<S> {
    let mut out = vec![S::zero(); y.len()];
    let blocks = if d == 0 { 0 } else { y.len() / d };
    for n in start.max(1)..end.min(blocks + 1) {
        let r = (n - 1) * d..n * d;
        out[r.clone()].copy_from_slice(&y[r]);
    }
    out
}

/// Domain restriction for [`op_norm`].
#[derive(Debug, Clone, Copy)]
pub enum Subspace<'a, S> {
    All,
    /// Functions with integral zero on the whole source.
    MeanZero,
    /// The span of a Haar-like system: leaf-measurable, mean zero on its base.
    Span(&'a HaarLikeSystem<S>),
}

/// Operator norm on the chosen subspace.
///
/// Exact for `p = 1` (extreme points of the unit ball are normalized atom
/// indicators, or `(chi_i - chi_j) / 2μ` on mean-zero subspaces) and for
/// `p = 2` into a weighted Euclidean target (largest singular value).
/// Otherwise a searched lower bound and the best of several comparison
/// upper bounds.
pub fn op_norm<S: Scalar>(t: &FiniteOperator<S>, subspace: Subspace<'_, S>, budget: SearchBudget) -> NormEstimate<S> {
    if t.is_zero() {
        return NormEstimate::exact(S::zero());
    }
    if let Subspace::Span(sys) = subspace {
        assert_eq!(sys.space(), t.source(), "system lives on another space");
    }
    let p = t.source.exponent();
    if p == S::one() && t.target.norm_is_exact() {
        return NormEstimate::exact(l1_exact(t, subspace));
    }
    if p == S::of(2.0) {
        if let Some(w) = t.target.euclidean_weights() {
            return NormEstimate::exact(l2_exact(t, subspace, &w));
        }
    }
    let basis = search_basis(t, subspace);
    let lower = search_lower(t, &basis, subspace, budget);
    let mut upper = full_upper_bound(t);
    match subspace {
        Subspace::Span(sys) => upper = upper.min(extension_upper(t, sys)),
        Subspace::MeanZero => {
            if let Ok(tree) = classical_tree(&t.source, t.source.depth() as usize) {
                upper = upper.min(extension_upper(t, &haar_system(tree)));
            }
        }
        Subspace::All => {}
    }
    NormEstimate::interval(lower, upper, Method::Search)
}

fn l1_exact<S: Scalar>(t: &FiniteOperator<S>, subspace: Subspace<'_, S>) -> S {
    let mu = t.source.atom_measure();
    match subspace {
        Subspace::All => (0..t.cols())
            .map(|i| t.target.norm(t.column(i)) / mu)
            .fold(S::zero(), S::max),
        Subspace::MeanZero => {
            let cols: Vec<Vec<S>> = (0..t.cols()).map(|i| t.column(i).to_vec()).collect();
            pair_extreme(t, &cols) / (S::of(2.0) * mu)
        }
        Subspace::Span(sys) => {
            let leaves = sys.tree().leaves();
            let images: Vec<Vec<S>> = leaves
                .iter()
                .map(|leaf| {
                    let mut v = vec![S::zero(); t.rows];
                    for &a in leaf.atoms() {
                        v.iter_mut().zip(t.column(a)).for_each(|(o, &x)| *o += x);
                    }
                    v
                })
                .collect();
            pair_extreme(t, &images) / (S::of(2.0) * leaves[0].measure())
        }
    }
}

fn pair_extreme<S: Scalar>(t: &FiniteOperator<S>, images: &[Vec<S>]) -> S {
    let mut best = S::zero();
    let mut diff = vec![S::zero(); t.rows];
    for i in 0..images.len() {
        for j in i + 1..images.len() {
            diff.iter_mut()
                .zip(images[i].iter().zip(&images[j]))
                .for_each(|(d, (&a, &b))| *d = a - b);
            best = best.max(t.target.norm(&diff));
        }
    }
    best
}

/// Orthonormal (in `L_2`) basis of the subspace as value vectors.
fn orthonormal_basis<S: Scalar>(t: &FiniteOperator<S>, subspace: Subspace<'_, S>) -> Vec<Vec<S>> {
    let n = t.cols();
    let mu = t.source.atom_measure();
    let normalized = |sys: &HaarLikeSystem<S>| {
        sys.functions()
            .iter()
            .map(|h| {
                let scale = h.norm_p(S::of(2.0)).recip();
                h.values().iter().map(|&v| v * scale).collect()
            })
            .collect()
    };
    match subspace {
        Subspace::All => (0..n)
            .map(|i| {
                let mut e = vec![S::zero(); n];
                e[i] = mu.sqrt().recip();
                e
            })
            .collect(),
        Subspace::MeanZero => match classical_tree(&t.source, t.source.depth() as usize) {
            Ok(tree) => normalized(&haar_system(tree)),
            Err(_) => Vec::new(),
        },
        Subspace::Span(sys) => normalized(sys),
    }
}

fn l2_exact<S: Scalar>(t: &FiniteOperator<S>, subspace: Subspace<'_, S>, weights: &[S]) -> S {
    let basis = orthonormal_basis(t, subspace);
    let sqrt_w: Vec<S> = weights.iter().map(|w| w.sqrt()).collect();
    let mut data = Vec::with_capacity(basis.len() * t.rows);
    for b in &basis {
        let img = t.apply_values(b);
        data.extend(img.iter().zip(&sqrt_w).map(|(&y, &w)| y * w));
    }
    S::of(linalg::largest_singular_value(t.rows, basis.len(), &data))
}

/// Non-normalized spanning set used by the search.
fn search_basis<S: Scalar>(t: &FiniteOperator<S>, subspace: Subspace<'_, S>) -> Vec<Vec<S>> {
    let n = t.cols();
    match subspace {
        Subspace::All => (0..n)
            .map(|i| {
                let mut e = vec![S::zero(); n];
                e[i] = S::one();
                e
            })
            .collect(),
        Subspace::MeanZero => match classical_tree(&t.source, t.source.depth() as usize) {
            Ok(tree) => haar_system(tree).functions().iter().map(|h| h.values().to_vec()).collect(),
            Err(_) => Vec::new(),
        },
        Subspace::Span(sys) => sys.functions().iter().map(|h| h.values().to_vec()).collect(),
    }
}

/// Ratio-ascent state over coefficient vectors `c`: maximizes
/// `num(Σ c_k image_k) / den(Σ c_k domain_k)`.
pub(crate) struct RatioSearch<'a, S, N, D> {
    pub images: Vec<Vec<S>>,
    pub domain: &'a [Vec<S>],
    pub num: N,
    pub den: D,
}

impl<S: Scalar, N: Fn(&[S]) -> S, D: Fn(&[S]) -> S> RatioSearch<'_, S, N, D> {
    fn combine(vectors: &[Vec<S>], c: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); vectors.first().map_or(0, Vec::len)];
        for (v, &ck) in vectors.iter().zip(c) {
            if ck != S::zero() {
                out.iter_mut().zip(v).for_each(|(o, &x)| *o += ck * x);
            }
        }
        out
    }

    fn ratio_of(&self, num: &[S], den: &[S]) -> S {
        let d = (self.den)(den);
        if d > S::zero() {
            (self.num)(num) / d
        } else {
            S::zero()
        }
    }

    pub fn ratio(&self, c: &[S]) -> S {
        let num = Self::combine(&self.images, c);
        let den = Self::combine(self.domain, c);
        self.ratio_of(&num, &den)
    }

    /// Coordinate pattern search from `c`; returns the final ratio.
    pub fn climb(&self, c: &mut [S], sweeps: usize) -> S {
        let mut num = Self::combine(&self.images, c);
        let mut den = Self::combine(self.domain, c);
        let mut best = self.ratio_of(&num, &den);
        let scale = c.iter().fold(S::zero(), |m, v| m.max(v.abs())).max(S::of(1e-300));
        let mut step = scale * S::of(0.5);
        let floor = scale * S::of(1e-9);
        let mut tn = num.clone();
        let mut td = den.clone();
        for _ in 0..sweeps {
            let mut improved = false;
            for k in 0..c.len() {
                for delta in [step, -step] {
                    tn.iter_mut()
                        .zip(&num)
                        .zip(&self.images[k])
                        .for_each(|((t, &a), &x)| *t = a + delta * x);
                    td.iter_mut()
                        .zip(&den)
                        .zip(&self.domain[k])
                        .for_each(|((t, &a), &x)| *t = a + delta * x);
                    let r = self.ratio_of(&tn, &td);
                    if r > best {
                        best = r;
                        c[k] += delta;
                        std::mem::swap(&mut num, &mut tn);
                        std::mem::swap(&mut den, &mut td);
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                step = step * S::of(0.5);
                if step < floor {
                    break;
                }
            }
        }
        // Re-evaluate from scratch so the reported value carries no drift.
        self.ratio(c)
    }
}

fn search_lower<S: Scalar>(
    t: &FiniteOperator<S>,
    basis: &[Vec<S>],
    subspace: Subspace<'_, S>,
    budget: SearchBudget,
) -> S {
    if basis.is_empty() {
        return S::zero();
    }
    let search = RatioSearch {
        images: basis.iter().map(|b| t.apply_values(b)).collect(),
        domain: basis,
        num: |y: &[S]| t.target.norm(y),
        den: |v: &[S]| t.source.norm_of(v),
    };
    let k = basis.len();
    let mut best = S::zero();
    let mut best_c = vec![S::zero(); k];
    let consider = |c: Vec<S>, best: &mut S, best_c: &mut Vec<S>| {
        let r = search.ratio(&c);
        if r > *best {
            *best = r;
            *best_c = c;
        }
    };
    for j in 0..k {
        let mut c = vec![S::zero(); k];
        c[j] = S::one();
        consider(c, &mut best, &mut best_c);
    }
    if matches!(subspace, Subspace::All) && k <= SIGN_VERTEX_ATOMS {
        for pattern in 0..1u64 << (k - 1) {
            let c = (0..k)
                .map(|i| {
                    if i > 0 && pattern >> (i - 1) & 1 == 1 {
                        -S::one()
                    } else {
                        S::one()
                    }
                })
                .collect();
            consider(c, &mut best, &mut best_c);
        }
    }
    let mut polished = best_c.clone();
    best = best.max(search.climb(&mut polished, budget.sweeps));
    let mut rng = search::rng(budget.seed, 0x6f70);
    for _ in 0..budget.restarts {
        let mut c: Vec<S> = (0..k).map(|_| search::uniform(&mut rng)).collect();
        best = best.max(search.climb(&mut c, budget.sweeps));
    }
    best
}

/// Upper bounds valid on the whole source.
pub(crate) fn full_upper_bound<S: Scalar>(t: &FiniteOperator<S>) -> S {
    let p = t.source.exponent();
    let mu = t.source.atom_measure();
    let col_norms: Vec<S> = (0..t.cols()).map(|i| t.target.norm_bounds(t.column(i)).upper).collect();
    let k1 = col_norms.iter().fold(S::zero(), |m, &c| m.max(c / mu));
    if p == S::one() {
        return k1;
    }
    // ‖f‖_1 <= μ(Ω)^{1-1/p} ‖f‖_p
    let mut best = k1 * t.source.total_measure().powf(S::one() - p.recip());
    // Hölder on the atom expansion: Σ|v_i|‖col_i‖ <= ‖f‖_p (Σ (‖col_i‖ μ^{-1/p})^{p'})^{1/p'}
    let pc = p / (p - S::one());
    let holder = col_norms
        .iter()
        .map(|&c| (c * mu.powf(-p.recip())).powf(pc))
        .sum::<S>()
        .powf(pc.recip());
    best = best.min(holder);
    // Schur test for L_p -> L_p with matching exponents.
    if let Some((w, q)) = t.target.lq_weights() {
        if q == p {
            let k1w = (0..t.cols())
                .map(|i| t.column(i).iter().zip(&w).map(|(&x, &wr)| x.abs() * wr).sum::<S>() / mu)
                .fold(S::zero(), S::max);
            let kinf = (0..t.rows)
                .map(|r| (0..t.cols()).map(|i| t.data[i * t.rows + r].abs()).sum::<S>())
                .fold(S::zero(), S::max);
            best = best.min(k1w.powf(p.recip()) * kinf.powf(S::one() - p.recip()));
        }
    }
    // Through the exact p = 2 norm when the target is Euclidean.
    if let Some(w) = t.target.euclidean_weights() {
        let two = S::of(2.0);
        let l2 = l2_exact(t, Subspace::All, &w);
        let half = S::of(0.5);
        let kappa = if p >= two {
            t.source.total_measure().powf(half - p.recip())
        } else {
            mu.powf(half - p.recip())
        };
        best = best.min(l2 * kappa);
    }
    best
}

/// `2 Σ_α ‖T h_α‖ / ‖h_α‖`: the norm bound for an operator on the span of a
/// monotone basis whose basis images are known.
pub fn extension_bound<S: Scalar>(sys: &HaarLikeSystem<S>, image_norms: &[S]) -> S {
    let two = S::of(2.0);
    image_norms
        .iter()
        .enumerate()
        .map(|(r, &x)| x / sys.haar_norm(crate::haar::MultiIndex::from_rank(r).level()))
        .sum::<S>()
        * two
}

fn extension_upper<S: Scalar>(t: &FiniteOperator<S>, sys: &HaarLikeSystem<S>) -> S {
    let norms: Vec<S> = sys
        .functions()
        .iter()
        .map(|h| t.target.norm_bounds(&t.apply_values(h.values())).upper)
        .collect();
    extension_bound(sys, &norms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::AtomSet;

    #[test]
    fn apply_and_linearity() {
        let s = DyadicSpace::<f64>::new(2, 1.0).unwrap();
        let t = FiniteOperator::new(
            s,
            NormedTarget::ellq(2, 1.0).unwrap(),
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, -1.0]],
        )
        .unwrap();
        let chi = s.indicator(&AtomSet::new(s, vec![2]).unwrap());
        assert_eq!(t.apply(&chi).unwrap(), vec![1.0, 1.0]);
        let f = s.function(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let g = s.function(vec![-1.0, 0.5, 0.0, 2.0]).unwrap();
        let lhs = t.apply(&(&f + &g)).unwrap();
        let rhs: Vec<f64> = t
            .apply(&f)
            .unwrap()
            .iter()
            .zip(t.apply(&g).unwrap())
            .map(|(a, b)| a + b)
            .collect();
        assert_eq!(lhs, rhs);
        let z = FiniteOperator::zero(s, NormedTarget::ellq(2, 1.0).unwrap()).unwrap();
        assert_eq!(z.apply(&f).unwrap(), vec![0.0, 0.0]);
        assert_eq!(op_norm(&z, Subspace::All, SearchBudget::default()), NormEstimate::exact(0.0));
    }

    #[test]
    fn l1_norm_examples() {
        let s = DyadicSpace::<f64>::new(3, 1.0).unwrap();
        let id = identity_like(&s).unwrap();
        assert_eq!(op_norm(&id, Subspace::All, SearchBudget::default()), NormEstimate::exact(1.0));
        let x = [3.0, -4.0];
        let r1 = integration(&s, &x, NormedTarget::ellq(2, 2.0).unwrap()).unwrap();
        let e = op_norm(&r1, Subspace::All, SearchBudget::default());
        assert!(e.is_exact() && (e.lower - 5.0).abs() < 1e-12);
        // integration kills mean-zero functions
        assert_eq!(op_norm(&r1, Subspace::MeanZero, SearchBudget::default()).upper, 0.0);
    }

    #[test]
    fn restrict_examples() {
        let s = DyadicSpace::<f64>::new(2, 1.0).unwrap();
        let t = FiniteOperator::new(
            s,
            NormedTarget::ellq(1, 1.0).unwrap(),
            vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]],
        )
        .unwrap();
        let singles = Partition::singletons(&s.full());
        assert_eq!(t.restrict(&singles).unwrap(), t);
        let one = Partition::equal_intervals(&s.full(), 1).unwrap();
        let r = t.restrict(&one).unwrap();
        assert_eq!(r.column(0), &[10.0]);
        assert_eq!(r.source().depth(), 0);
    }

    #[test]
    fn block_projection_examples() {
        let y = NormedTarget::<f64>::uncond_sum(NormedTarget::ellq(1, 1.0).unwrap(), 3).unwrap();
        let v = [1.0, 2.0, 3.0];
        let id = block_projection(1, None, 3).unwrap();
        assert_eq!(id.apply(&y, &v).unwrap(), v.to_vec());
        let mid = block_projection(2, Some(3), 3).unwrap();
        let once = mid.apply(&y, &v).unwrap();
        assert_eq!(once, vec![0.0, 2.0, 0.0]);
        assert_eq!(mid.apply(&y, &once).unwrap(), once);
        assert!(block_projection(2, Some(2), 3).is_err());
        assert!(block_projection(1, Some(5), 3).is_err());
    }

    #[test]
    fn counterexample_structure() {
        let t = counterexample_operator::<f64>(2, 2, 1.0).unwrap();
        let s = *t.source();
        // t-independent f: Tf equals the s-marginal values
        let f = s.function_from_fn(|i| (i / 4) as f64 + 1.0);
        assert_eq!(t.apply(&f).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        // Rademacher in t for every s: image zero
        let g = s.function_from_fn(|i| if i % 2 == 0 { 1.0 } else { -1.0 });
        assert!(t.apply(&g).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(op_norm(&t, Subspace::All, SearchBudget::default()), NormEstimate::exact(1.0));
    }

    #[test]
    fn operator_json_round_trip() {
        let t = counterexample_operator::<f64>(1, 2, 1.5).unwrap();
        assert_eq!(FiniteOperator::from_json(&t.to_json()).unwrap(), t);
    }
}
