//! Finite dyadic model of a nonatomic probability space and of `L_p` on it.
//!
//! The space `[0, total_measure)` is cut into `2^depth` atoms of equal measure.
//! Functions are per-atom value vectors; subsets are sorted atom index lists.
//! Because every atom has the same measure, "two halves of equal measure"
//! is a cardinality condition and all measures are exact binary fractions.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest supported grid depth (`2^30` atoms is far beyond desk scale already).
pub const MAX_DEPTH: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceRecord<S>", into = "SpaceRecord<S>")]
#[serde(bound = "S: Scalar")]
pub struct DyadicSpace<S> {
    depth: u32,
    total_measure: S,
    exponent: S,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
struct SpaceRecord<S> {
    depth: u32,
    total_measure: S,
    exponent: S,
}

impl<S: Scalar> TryFrom<SpaceRecord<S>> for DyadicSpace<S> {
    type Error = Error;

    fn try_from(r: SpaceRecord<S>) -> Result<Self> {
        DyadicSpace::with_measure(r.depth, r.total_measure, r.exponent)
    }
}

impl<S: Scalar> From<DyadicSpace<S>> for SpaceRecord<S> {
    fn from(s: DyadicSpace<S>) -> Self {
        SpaceRecord {
            depth: s.depth,
            total_measure: s.total_measure,
            exponent: s.exponent,
        }
    }
}

impl<S: Scalar> DyadicSpace<S> {
    /// Probability space with `2^depth` atoms and exponent `p`.
    pub fn new(depth: u32, exponent: S) -> Result<Self> {
        Self::with_measure(depth, S::one(), exponent)
    }

    /// Depth 0 (a single atom) is accepted so that restrictions to a
    /// one-block partition still have a source space.
    pub fn with_measure(depth: u32, total_measure: S, exponent: S) -> Result<Self> {
        if depth > MAX_DEPTH {
            return Err(Error::invalid(format!("depth {depth} exceeds {MAX_DEPTH}")));
        }
        if !(total_measure > S::zero()) || !total_measure.is_finite() {
            return Err(Error::invalid("total measure must be positive and finite"));
        }
        if !(exponent >= S::one()) || !exponent.is_finite() {
            return Err(Error::invalid(format!("exponent p = {exponent} must be >= 1")));
        }
        Ok(DyadicSpace {
            depth,
            total_measure,
            exponent,
        })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn atom_count(&self) -> usize {
        1usize << self.depth
    }

    pub fn atom_measure(&self) -> S {
        self.total_measure / S::of_usize(self.atom_count())
    }

    pub fn total_measure(&self) -> S {
        self.total_measure
    }

    pub fn exponent(&self) -> S {
        self.exponent
    }

    /// Same grid, different exponent.
    pub fn with_exponent(&self, exponent: S) -> Result<Self> {
        Self::with_measure(self.depth, self.total_measure, exponent)
    }

    pub fn full(&self) -> AtomSet<S> {
        AtomSet {
            space: *self,
            atoms: (0..self.atom_count()).collect(),
        }
    }

    pub fn zero(&self) -> SimpleFunction<S> {
        SimpleFunction {
            space: *self,
            values: vec![S::zero(); self.atom_count()],
        }
    }

    pub fn function(&self, values: Vec<S>) -> Result<SimpleFunction<S>> {
        SimpleFunction::new(*self, values)
    }

    pub fn function_from_fn(&self, f: impl FnMut(usize) -> S) -> SimpleFunction<S> {
        SimpleFunction {
            space: *self,
            values: (0..self.atom_count()).map(f).collect(),
        }
    }

    pub fn indicator(&self, set: &AtomSet<S>) -> SimpleFunction<S> {
        let mut f = self.zero();
        for &i in &set.atoms {
            f.values[i] = S::one();
        }
        f
    }

    /// `L_p` norm of a raw value vector, `(sum |v_i|^p mu_i)^{1/p}`.
    pub fn norm_of(&self, values: &[S]) -> S {
        lp_norm(values, self.atom_measure(), self.exponent)
    }
}

/// `(sum |v_i|^p w)^{1/p}` for a common atom weight `w`.
pub(crate) fn lp_norm<S: Scalar>(values: &[S], weight: S, p: S) -> S {
    if p == S::one() {
        values.iter().map(|v| v.abs()).sum::<S>() * weight
    } else if p == S::of(2.0) {
        (values.iter().map(|&v| v * v).sum::<S>() * weight).sqrt()
    } else {
        (values.iter().map(|v| v.abs().powf(p)).sum::<S>() * weight).powf(p.recip())
    }
}

/// A nonempty-or-empty measurable set: sorted, duplicate-free atom indices.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomSet<S> {
    space: DyadicSpace<S>,
    atoms: Vec<usize>,
}

impl<S: Scalar> AtomSet<S> {
    /// Builds a set from strictly increasing in-range indices.
    pub fn new(space: DyadicSpace<S>, atoms: Vec<usize>) -> Result<Self> {
        if let Some(&last) = atoms.last() {
            if last >= space.atom_count() {
                return Err(Error::invalid(format!(
                    "atom {last} out of range for {} atoms",
                    space.atom_count()
                )));
            }
        }
        if atoms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("atom indices must be strictly increasing"));
        }
        Ok(AtomSet { space, atoms })
    }

    /// Sorts the indices first; duplicates are still rejected.
    pub fn from_unsorted(space: DyadicSpace<S>, mut atoms: Vec<usize>) -> Result<Self> {
        atoms.sort_unstable();
        Self::new(space, atoms)
    }

    pub fn space(&self) -> &DyadicSpace<S> {
        &self.space
    }

    pub fn atoms(&self) -> &[usize] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn measure(&self) -> S {
        S::of_usize(self.atoms.len()) * self.space.atom_measure()
    }

    pub fn contains(&self, atom: usize) -> bool {
        self.atoms.binary_search(&atom).is_ok()
    }

    pub fn is_subset_of(&self, other: &AtomSet<S>) -> bool {
        self.space == other.space && self.atoms.iter().all(|&a| other.contains(a))
    }

    pub fn is_disjoint_from(&self, other: &AtomSet<S>) -> bool {
        !self.atoms.iter().any(|&a| other.contains(a))
    }

    /// `self \ other`.
    pub fn difference(&self, other: &AtomSet<S>) -> AtomSet<S> {
        AtomSet {
            space: self.space,
            atoms: self
                .atoms
                .iter()
                .copied()
                .filter(|&a| !other.contains(a))
                .collect(),
        }
    }

    /// First `k` atoms and the rest, in index order.
    pub fn split_at(&self, k: usize) -> (AtomSet<S>, AtomSet<S>) {
        let (a, b) = self.atoms.split_at(k.min(self.atoms.len()));
        (
            AtomSet {
                space: self.space,
                atoms: a.to_vec(),
            },
            AtomSet {
                space: self.space,
                atoms: b.to_vec(),
            },
        )
    }
}

/// An element of `L_p` on the dyadic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleFunction<S> {
    space: DyadicSpace<S>,
    values: Vec<S>,
}

impl<S: Scalar> SimpleFunction<S> {
    pub fn new(space: DyadicSpace<S>, values: Vec<S>) -> Result<Self> {
        if values.len() != space.atom_count() {
            return Err(Error::invalid(format!(
                "expected {} values, got {}",
                space.atom_count(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("function values must be finite"));
        }
        Ok(SimpleFunction { space, values })
    }

    pub fn space(&self) -> &DyadicSpace<S> {
        &self.space
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    pub fn value(&self, atom: usize) -> S {
        self.values[atom]
    }

    /// Norm in the space's own exponent.
    pub fn norm(&self) -> S {
        self.space.norm_of(&self.values)
    }

    pub fn norm_p(&self, p: S) -> S {
        lp_norm(&self.values, self.space.atom_measure(), p)
    }

    pub fn integral(&self) -> S {
        self.values.iter().copied().sum::<S>() * self.space.atom_measure()
    }

    /// `L_2` inner product.
    pub fn inner(&self, other: &SimpleFunction<S>) -> S {
        assert_eq!(self.space, other.space, "inner product across spaces");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a * b)
            .sum::<S>()
            * self.space.atom_measure()
    }

    pub fn is_supported_on(&self, set: &AtomSet<S>) -> bool {
        self.values
            .iter()
            .enumerate()
            .all(|(i, &v)| v == S::zero() || set.contains(i))
    }

    pub fn scaled(&self, c: S) -> SimpleFunction<S> {
        SimpleFunction {
            space: self.space,
            values: self.values.iter().map(|&v| v * c).collect(),
        }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: S, other: &SimpleFunction<S>) -> SimpleFunction<S> {
        assert_eq!(self.space, other.space, "axpy across spaces");
        SimpleFunction {
            space: self.space,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a + c * b)
                .collect(),
        }
    }
}

impl<S: Scalar> Add for &SimpleFunction<S> {
    type Output = SimpleFunction<S>;

    fn add(self, rhs: Self) -> SimpleFunction<S> {
        self.axpy(S::one(), rhs)
    }
}

impl<S: Scalar> Sub for &SimpleFunction<S> {
    type Output = SimpleFunction<S>;

    fn sub(self, rhs: Self) -> SimpleFunction<S> {
        self.axpy(-S::one(), rhs)
    }
}

impl<S: Scalar> Mul<S> for &SimpleFunction<S> {
    type Output = SimpleFunction<S>;

    fn mul(self, c: S) -> SimpleFunction<S> {
        self.scaled(c)
    }
}

impl<S: Scalar> Neg for &SimpleFunction<S> {
    type Output = SimpleFunction<S>;

    fn neg(self) -> SimpleFunction<S> {
        self.scaled(-S::one())
    }
}

/// `f = chi_{B1} - chi_{B2}` with `B1, B2` an equal-measure partition of `A`.
pub fn is_sign<S: Scalar>(f: &SimpleFunction<S>, set: &AtomSet<S>) -> bool {
    if set.is_empty() || f.space != set.space {
        return false;
    }
    let mut balance: i64 = 0;
    for (i, &v) in f.values.iter().enumerate() {
        if set.contains(i) {
            if v == S::one() {
                balance += 1;
            } else if v == -S::one() {
                balance -= 1;
            } else {
                return false;
            }
        } else if v != S::zero() {
            return false;
        }
    }
    balance == 0
}

/// The `k`-th Rademacher function on `A`: `+1` on the first block of
/// `|A| / 2^k` atoms, then alternating.
pub fn rademacher<S: Scalar>(set: &AtomSet<S>, k: u32) -> Result<SimpleFunction<S>> {
    if k == 0 {
        return Err(Error::invalid("Rademacher index starts at 1"));
    }
    let pieces = 1usize
        .checked_shl(k)
        .filter(|&n| n <= set.len())
        .ok_or_else(|| Error::infeasible(format!("2^{k} exceeds |A| = {}", set.len())))?;
    if set.len() % pieces != 0 {
        return Err(Error::infeasible(format!(
            "|A| = {} is not divisible by 2^{k}",
            set.len()
        )));
    }
    let block = set.len() / pieces;
    let mut f = set.space.zero();
    for (j, &atom) in set.atoms.iter().enumerate() {
        f.values[atom] = if (j / block) % 2 == 0 { S::one() } else { -S::one() };
    }
    Ok(f)
}

/// A finite sub-sigma-algebra on `base`, given by its blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition<S> {
    base: AtomSet<S>,
    blocks: Vec<AtomSet<S>>,
}

impl<S: Scalar> Partition<S> {
    pub fn new(base: AtomSet<S>, blocks: Vec<AtomSet<S>>) -> Result<Self> {
        let mut seen = vec![false; base.space.atom_count()];
        let mut covered = 0usize;
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::invalid("partition blocks must be nonempty"));
            }
            if block.space != base.space {
                return Err(Error::SpaceMismatch("partition block".into()));
            }
            for &a in &block.atoms {
                if !base.contains(a) {
                    return Err(Error::invalid(format!("atom {a} lies outside the base")));
                }
                if std::mem::replace(&mut seen[a], true) {
                    return Err(Error::invalid(format!("atom {a} appears in two blocks")));
                }
                covered += 1;
            }
        }
        if covered != base.len() {
            return Err(Error::invalid("blocks do not cover the base"));
        }
        Ok(Partition { base, blocks })
    }

    /// `count` consecutive runs of equal length.
    pub fn equal_intervals(base: &AtomSet<S>, count: usize) -> Result<Self> {
        if count == 0 || base.len() % count != 0 {
            return Err(Error::infeasible(format!(
                "{} atoms do not split into {count} equal blocks",
                base.len()
            )));
        }
        let size = base.len() / count;
        let blocks = base
            .atoms
            .chunks(size)
            .map(|c| AtomSet {
                space: base.space,
                atoms: c.to_vec(),
            })
            .collect();
        Partition::new(base.clone(), blocks)
    }

    pub fn singletons(base: &AtomSet<S>) -> Self {
        Partition {
            base: base.clone(),
            blocks: base
                .atoms
                .iter()
                .map(|&a| AtomSet {
                    space: base.space,
                    atoms: vec![a],
                })
                .collect(),
        }
    }

    pub fn base(&self) -> &AtomSet<S> {
        &self.base
    }

    pub fn blocks(&self) -> &[AtomSet<S>] {
        &self.blocks
    }

    /// Common block size when all blocks have equal cardinality.
    pub fn equal_block_size(&self) -> Option<usize> {
        let size = self.blocks.first()?.len();
        self.blocks.iter().all(|b| b.len() == size).then_some(size)
    }

    /// The space whose atoms are the blocks. Needs a power-of-two number of
    /// equal blocks so that the coarse model is again dyadic.
    pub fn coarse_space(&self) -> Result<DyadicSpace<S>> {
        let count = self.blocks.len();
        if self.equal_block_size().is_none() || !count.is_power_of_two() {
            return Err(Error::infeasible(format!(
                "coarse space needs 2^k equal blocks, got {count} blocks"
            )));
        }
        DyadicSpace::with_measure(
            count.trailing_zeros(),
            self.base.measure(),
            self.base.space.exponent,
        )
    }

    /// Embeds block-constant data as a function on the fine space
    /// (zero off the base).
    pub fn coarsen(&self, block_values: &[S]) -> Result<SimpleFunction<S>> {
        if block_values.len() != self.blocks.len() {
            return Err(Error::invalid(format!(
                "expected {} block values, got {}",
                self.blocks.len(),
                block_values.len()
            )));
        }
        let mut f = self.base.space.zero();
        for (block, &c) in self.blocks.iter().zip(block_values) {
            for &a in &block.atoms {
                f.values[a] = c;
            }
        }
        Ok(f)
    }

    /// `coarsen` for a function that lives on [`Self::coarse_space`].
    pub fn embed(&self, g: &SimpleFunction<S>) -> Result<SimpleFunction<S>> {
        if g.space != self.coarse_space()? {
            return Err(Error::SpaceMismatch("embed expects the coarse space".into()));
        }
        self.coarsen(&g.values)
    }

    /// Constancy on every block.
    pub fn measurable_wrt(&self, f: &SimpleFunction<S>) -> bool {
        f.space == self.base.space
            && self.blocks.iter().all(|b| {
                let first = f.values[b.atoms[0]];
                b.atoms.iter().all(|&a| f.values[a] == first)
            })
    }

    /// Pulls a partition of the coarse space back to this grid: each coarse
    /// block becomes the union of the fine blocks it contains.
    pub fn compose(&self, coarse: &Partition<S>) -> Result<Partition<S>> {
        if coarse.base.space != self.coarse_space()? {
            return Err(Error::SpaceMismatch("compose expects the coarse space".into()));
        }
        let union = |set: &AtomSet<S>| -> Result<AtomSet<S>> {
            let atoms = set
                .atoms
                .iter()
                .flat_map(|&j| self.blocks[j].atoms.iter().copied())
                .collect();
            AtomSet::from_unsorted(self.base.space, atoms)
        };
        let base = union(&coarse.base)?;
        let blocks = coarse.blocks.iter().map(union).collect::<Result<Vec<_>>>()?;
        Partition::new(base, blocks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(depth: u32, p: f64) -> DyadicSpace<f64> {
        DyadicSpace::new(depth, p).unwrap()
    }

    #[test]
    fn norm_examples() {
        let s = space(1, 1.0);
        assert_eq!(s.zero().norm(), 0.0);
        assert_eq!(s.function(vec![1.0, -1.0]).unwrap().norm(), 1.0);
        let s = space(2, 2.0);
        assert_eq!(s.function(vec![2.0, 0.0, 0.0, 0.0]).unwrap().norm(), 1.0);
    }

    #[test]
    fn integral_examples() {
        let s = space(3, 1.0);
        assert_eq!(s.zero().integral(), 0.0);
        let half = AtomSet::new(s, vec![0, 2, 4, 6]).unwrap();
        assert_eq!(s.indicator(&half).integral(), 0.5);
    }

    #[test]
    fn sign_predicate() {
        let s = space(2, 1.0);
        let a = s.full();
        let f = s.function(vec![1.0, -1.0, -1.0, 1.0]).unwrap();
        assert!(is_sign(&f, &a));
        assert_eq!(f.integral(), 0.0);
        assert!(!is_sign(&s.indicator(&a), &a));
        let g = s.function(vec![1.0, -1.0, 0.5, -1.0]).unwrap();
        assert!(!is_sign(&g, &a));
        let sub = AtomSet::new(s, vec![1, 2]).unwrap();
        let h = s.function(vec![0.0, 1.0, -1.0, 0.0]).unwrap();
        assert!(is_sign(&h, &sub));
        assert!(!is_sign(&h, &a));
    }

    #[test]
    fn rademacher_examples() {
        let s = space(2, 1.0);
        let a = s.full();
        assert_eq!(rademacher(&a, 1).unwrap().values(), &[1.0, 1.0, -1.0, -1.0]);
        assert_eq!(rademacher(&a, 2).unwrap().values(), &[1.0, -1.0, 1.0, -1.0]);
        assert!(matches!(rademacher(&a, 3), Err(Error::Infeasible(_))));
        let three = AtomSet::new(s, vec![0, 1, 2]).unwrap();
        assert!(rademacher(&three, 1).is_err());
    }

    #[test]
    fn rademacher_is_independent_family() {
        // Exhaustive check on 16 atoms: every product of distinct Rademacher
        // functions integrates to zero, and each one is a sign.
        let s = space(4, 2.0);
        let a = s.full();
        let r: Vec<_> = (1..=4).map(|k| rademacher(&a, k).unwrap()).collect();
        for f in &r {
            assert!(is_sign(f, &a));
        }
        for mask in 1u32..16 {
            let prod: f64 = (0..16)
                .map(|i| {
                    (0..4)
                        .filter(|k| mask & (1 << k) != 0)
                        .map(|k| r[k].value(i))
                        .product::<f64>()
                })
                .sum();
            assert_eq!(prod, 0.0, "mask {mask}");
        }
    }

    #[test]
    fn partitions() {
        let s = space(3, 1.0);
        let a = s.full();
        let one = Partition::equal_intervals(&a, 1).unwrap();
        assert_eq!(one.coarsen(&[2.5]).unwrap().values(), &[2.5; 8]);
        let p = Partition::equal_intervals(&a, 4).unwrap();
        let f = p.coarsen(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(p.measurable_wrt(&f));
        let mut v = f.clone().into_values();
        v[0] = 7.0;
        assert!(!p.measurable_wrt(&s.function(v).unwrap()));
        assert!(Partition::equal_intervals(&a, 3).is_err());

        let overlap = vec![
            AtomSet::new(s, vec![0, 1, 2, 3]).unwrap(),
            AtomSet::new(s, vec![3, 4, 5, 6, 7]).unwrap(),
        ];
        assert!(Partition::new(a.clone(), overlap).is_err());
        let gap = vec![AtomSet::new(s, vec![0, 1, 2, 3]).unwrap()];
        assert!(Partition::new(a, gap).is_err());
    }

    #[test]
    fn compose_nested_partitions() {
        let s = space(3, 1.0);
        let fine = Partition::equal_intervals(&s.full(), 4).unwrap();
        let coarse = fine.coarse_space().unwrap();
        assert_eq!(coarse.depth(), 2);
        let q = Partition::equal_intervals(&coarse.full(), 2).unwrap();
        let composed = fine.compose(&q).unwrap();
        assert_eq!(composed.blocks()[0].atoms(), &[0, 1, 2, 3]);
        assert_eq!(composed.blocks()[1].atoms(), &[4, 5, 6, 7]);
    }

    #[test]
    fn rejects_bad_spaces() {
        assert!(DyadicSpace::<f64>::new(3, 0.5).is_err());
        assert!(DyadicSpace::<f64>::with_measure(3, 0.0, 1.0).is_err());
        assert!(AtomSet::new(space(2, 1.0), vec![1, 1]).is_err());
        assert!(AtomSet::new(space(2, 1.0), vec![4]).is_err());
    }
}
