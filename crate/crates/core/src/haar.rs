//! Trees of subsets, Haar-like systems and their basis expansion.
//!
//! A tree on `A` splits every node `A_alpha` into two halves of equal measure,
//! `A_{alpha,1}` and `A_{alpha,-1}`; the Haar-like function of a node is
//! `h_alpha = chi_{A_{alpha,1}} - chi_{A_{alpha,-1}}`. Trees are truncated at a
//! finite `max_level`: nodes exist for levels `0..=max_level`, functions for
//! levels `0..max_level`. Everything indexed by multi-indices is stored in
//! natural order (level by level, `-1` before `+1`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dyadic::{AtomSet, DyadicSpace, Partition, SimpleFunction};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A finite sequence of `+1` / `-1` entries; the empty sequence is the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct MultiIndex(Vec<i8>);

impl TryFrom<Vec<i8>> for MultiIndex {
    type Error = Error;

    fn try_from(entries: Vec<i8>) -> Result<Self> {
        MultiIndex::new(entries)
    }
}

impl From<MultiIndex> for Vec<i8> {
    fn from(m: MultiIndex) -> Self {
        m.0
    }
}

impl MultiIndex {
    pub fn root() -> Self {
        MultiIndex(Vec::new())
    }

    pub fn new(entries: Vec<i8>) -> Result<Self> {
        if entries.iter().any(|&e| e != 1 && e != -1) {
            return Err(Error::invalid("multi-index entries must be +1 or -1"));
        }
        Ok(MultiIndex(entries))
    }

    pub fn entries(&self) -> &[i8] {
        &self.0
    }

    pub fn level(&self) -> usize {
        self.0.len()
    }

    pub fn child(&self, sign: i8) -> MultiIndex {
        debug_assert!(sign == 1 || sign == -1);
        let mut e = self.0.clone();
        e.push(sign);
        MultiIndex(e)
    }

    pub fn parent(&self) -> Option<MultiIndex> {
        let (_, head) = self.0.split_last()?;
        Some(MultiIndex(head.to_vec()))
    }

    /// The first `k` entries.
    pub fn prefix(&self, k: usize) -> MultiIndex {
        MultiIndex(self.0[..k].to_vec())
    }

    /// Position in the natural order `∅, -1, 1, (-1,-1), (-1,1), ...`.
    pub fn rank(&self) -> usize {
        let n = self.level();
        let within = self
            .0
            .iter()
            .fold(0usize, |acc, &e| (acc << 1) | usize::from(e == 1));
        (1usize << n) - 1 + within
    }

    pub fn from_rank(rank: usize) -> MultiIndex {
        let n = (usize::BITS - 1 - (rank + 1).leading_zeros()) as usize;
        let within = rank + 1 - (1usize << n);
        MultiIndex(
            (0..n)
                .map(|k| if within >> (n - 1 - k) & 1 == 1 { 1 } else { -1 })
                .collect(),
        )
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "∅");
        }
        write!(f, "(")?;
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

impl FromStr for MultiIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "∅" || s == "()" || s.is_empty() {
            return Ok(MultiIndex::root());
        }
        let inner = s.trim_start_matches('(').trim_end_matches(')');
        let entries = inner
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<i8>()
                    .map_err(|_| Error::invalid(format!("bad multi-index entry {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        MultiIndex::new(entries)
    }
}

/// All multi-indices of levels `0..=max_level` in natural order.
pub fn natural_order(max_level: usize) -> Vec<MultiIndex> {
    (0..(1usize << (max_level + 1)) - 1)
        .map(MultiIndex::from_rank)
        .collect()
}

/// Number of multi-indices with level `< levels`.
pub fn count_below(levels: usize) -> usize {
    (1usize << levels) - 1
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitStrategy<S> {
    /// `A_{alpha,-1}` is the first half of the sorted atoms of `A_alpha`.
    Interval,
    /// `A_{alpha,1}` for every internal node, in natural order; the `-1`
    /// child is the complement within `A_alpha`.
    Explicit(Vec<AtomSet<S>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetTree<S> {
    base: AtomSet<S>,
    max_level: usize,
    nodes: Vec<AtomSet<S>>,
}

pub fn build_tree<S: Scalar>(
    base: &AtomSet<S>,
    max_level: usize,
    strategy: SplitStrategy<S>,
) -> Result<SubsetTree<S>> {
    if base.is_empty() {
        return Err(Error::invalid("tree base must be nonempty"));
    }
    if max_level > base.space().depth() as usize || base.len() % (1usize << max_level) != 0 {
        return Err(Error::infeasible(format!(
            "{} atoms cannot be halved {max_level} times",
            base.len()
        )));
    }
    let internal = count_below(max_level);
    if let SplitStrategy::Explicit(splits) = &strategy {
        if splits.len() != internal {
            return Err(Error::invalid(format!(
                "expected {internal} explicit splits, got {}",
                splits.len()
            )));
        }
    }
    let mut nodes = Vec::with_capacity(count_below(max_level + 1));
    nodes.push(base.clone());
    for rank in 0..internal {
        // Children of node `rank` sit at ranks 2*rank+1 (-1) and 2*rank+2 (+1).
        let parent = &nodes[rank];
        let (minus, plus) = match &strategy {
            SplitStrategy::Interval => parent.split_at(parent.len() / 2),
            SplitStrategy::Explicit(splits) => {
                let plus = &splits[rank];
                if !plus.is_subset_of(parent) || 2 * plus.len() != parent.len() {
                    return Err(Error::invalid(format!(
                        "split at node {} is not an equal-measure half",
                        MultiIndex::from_rank(rank)
                    )));
                }
                (parent.difference(plus), plus.clone())
            }
        };
        nodes.push(minus);
        nodes.push(plus);
    }
    Ok(SubsetTree {
        base: base.clone(),
        max_level,
        nodes,
    })
}

/// Dyadic-interval tree on the whole space.
pub fn classical_tree<S: Scalar>(space: &DyadicSpace<S>, max_level: usize) -> Result<SubsetTree<S>> {
    build_tree(&space.full(), max_level, SplitStrategy::Interval)
}

impl<S: Scalar> SubsetTree<S> {
    pub fn base(&self) -> &AtomSet<S> {
        &self.base
    }

    pub fn space(&self) -> &DyadicSpace<S> {
        self.base.space()
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    pub fn node(&self, alpha: &MultiIndex) -> Option<&AtomSet<S>> {
        if alpha.level() > self.max_level {
            return None;
        }
        self.nodes.get(alpha.rank())
    }

    pub fn node_by_rank(&self, rank: usize) -> &AtomSet<S> {
        &self.nodes[rank]
    }

    /// Nodes at `max_level`, in natural order.
    pub fn leaves(&self) -> &[AtomSet<S>] {
        &self.nodes[count_below(self.max_level)..]
    }

    pub fn leaf_partition(&self) -> Partition<S> {
        Partition::new(self.base.clone(), self.leaves().to_vec())
            .expect("tree leaves partition the base")
    }

    /// The `+1` children of internal nodes, i.e. the explicit split data.
    pub fn plus_children(&self) -> Vec<AtomSet<S>> {
        (0..count_below(self.max_level))
            .map(|r| self.nodes[2 * r + 2].clone())
            .collect()
    }

    pub fn to_record(&self) -> TreeRecord<S> {
        TreeRecord {
            space: *self.space(),
            max_level: self.max_level,
            nodes: self
                .nodes
                .iter()
                .enumerate()
                .map(|(r, set)| NodeRecord {
                    node: MultiIndex::from_rank(r).to_string(),
                    atoms: set.atoms().to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_record(record: &TreeRecord<S>) -> Result<Self> {
        let space = record.space;
        let mut by_rank: Vec<Option<AtomSet<S>>> = vec![None; count_below(record.max_level + 1)];
        for n in &record.nodes {
            let alpha: MultiIndex = n.node.parse()?;
            let slot = by_rank
                .get_mut(alpha.rank())
                .ok_or_else(|| Error::invalid(format!("node {alpha} beyond max level")))?;
            *slot = Some(AtomSet::new(space, n.atoms.clone())?);
        }
        let nodes = by_rank
            .into_iter()
            .enumerate()
            .map(|(r, n)| {
                n.ok_or_else(|| Error::invalid(format!("missing node {}", MultiIndex::from_rank(r))))
            })
            .collect::<Result<Vec<_>>>()?;
        let splits = (0..count_below(record.max_level))
            .map(|r| nodes[2 * r + 2].clone())
            .collect();
        let tree = build_tree(&nodes[0], record.max_level, SplitStrategy::Explicit(splits))?;
        if tree.nodes != nodes {
            return Err(Error::invalid("recorded -1 children disagree with the splits"));
        }
        Ok(tree)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_record()).expect("tree record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: TreeRecord<S> =
            serde_json::from_str(text).map_err(|e| Error::invalid(e.to_string()))?;
        Self::from_record(&record)
    }
}

/// Text form of a tree: node label to sorted atom indices, natural order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct TreeRecord<S> {
    pub space: DyadicSpace<S>,
    pub max_level: usize,
    pub nodes: Vec<NodeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node: String,
    pub atoms: Vec<usize>,
}

/// The functions `h_alpha` of a tree, levels `0..max_level`.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarLikeSystem<S> {
    tree: SubsetTree<S>,
    functions: Vec<SimpleFunction<S>>,
}

pub fn haar_system<S: Scalar>(tree: SubsetTree<S>) -> HaarLikeSystem<S> {
    let space = *tree.space();
    let functions = (0..count_below(tree.max_level))
        .map(|r| {
            let mut h = space.zero().into_values();
            for &a in tree.nodes[2 * r + 2].atoms() {
                h[a] = S::one();
            }
            for &a in tree.nodes[2 * r + 1].atoms() {
                h[a] = -S::one();
            }
            SimpleFunction::new(space, h).expect("haar function length matches space")
        })
        .collect();
    HaarLikeSystem { tree, functions }
}

impl<S: Scalar> HaarLikeSystem<S> {
    pub fn tree(&self) -> &SubsetTree<S> {
        &self.tree
    }

    pub fn space(&self) -> &DyadicSpace<S> {
        self.tree.space()
    }

    pub fn base(&self) -> &AtomSet<S> {
        self.tree.base()
    }

    /// Number of functions, `2^max_level - 1`.
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn levels(&self) -> usize {
        self.tree.max_level
    }

    pub fn functions(&self) -> &[SimpleFunction<S>] {
        &self.functions
    }

    pub fn function(&self, alpha: &MultiIndex) -> Option<&SimpleFunction<S>> {
        self.functions.get(alpha.rank())
    }

    pub fn indices(&self) -> Vec<MultiIndex> {
        (0..self.len()).map(MultiIndex::from_rank).collect()
    }

    /// `(2^{-n} mu(A))^{1/p}` for a function at level `n`, in the space exponent.
    pub fn haar_norm(&self, level: usize) -> S {
        haar_norm(self.base().measure(), level, self.space().exponent())
    }
}

/// Closed-form `||h_alpha||_p` at `level` for a system on a set of measure `mu_a`.
pub fn haar_norm<S: Scalar>(mu_a: S, level: usize, p: S) -> S {
    (mu_a / S::of_usize(1usize << level)).powf(p.recip())
}

/// Coefficients in natural order.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients<S>(pub Vec<S>);

impl<S: Scalar> Coefficients<S> {
    pub fn get(&self, alpha: &MultiIndex) -> Option<S> {
        self.0.get(alpha.rank()).copied()
    }

    pub fn sup_abs(&self) -> S {
        self.0.iter().fold(S::zero(), |m, a| m.max(a.abs()))
    }
}

/// `a_alpha = <f, h_alpha> / ||h_alpha||_2^2` for a leaf-measurable, mean-zero
/// `f` supported on the system's base.
pub fn expand<S: Scalar>(f: &SimpleFunction<S>, sys: &HaarLikeSystem<S>) -> Result<Coefficients<S>> {
    if f.space() != sys.space() {
        return Err(Error::SpaceMismatch("expand".into()));
    }
    if !f.is_supported_on(sys.base()) {
        return Err(Error::invalid("function is not supported on the tree base"));
    }
    if !sys.tree.leaf_partition().measurable_wrt(f) {
        return Err(Error::invalid("function is not constant on tree leaves"));
    }
    let scale = f.norm_p(S::one()).max(S::min_positive_value());
    if f.integral().abs() > S::rel_tol() * S::of(16.0) * scale {
        return Err(Error::invalid("function does not have mean zero"));
    }
    let v = f.values();
    let coeffs = (0..sys.len())
        .map(|r| {
            let h = sys.functions[r].values();
            let node = sys.tree.node_by_rank(r);
            let dot: S = node.atoms().iter().map(|&a| v[a] * h[a]).sum();
            dot / S::of_usize(node.len())
        })
        .collect();
    Ok(Coefficients(coeffs))
}

pub fn reconstruct<S: Scalar>(coeffs: &Coefficients<S>, sys: &HaarLikeSystem<S>) -> Result<SimpleFunction<S>> {
    if coeffs.0.len() != sys.len() {
        return Err(Error::invalid(format!(
            "expected {} coefficients, got {}",
            sys.len(),
            coeffs.0.len()
        )));
    }
    Ok(reconstruct_partial(coeffs, sys, sys.len()))
}

/// Sum of the first `k` terms in natural order.
pub fn reconstruct_partial<S: Scalar>(
    coeffs: &Coefficients<S>,
    sys: &HaarLikeSystem<S>,
    k: usize,
) -> SimpleFunction<S> {
    let mut out = sys.space().zero().into_values();
    for (a, h) in coeffs.0.iter().zip(&sys.functions).take(k) {
        if *a == S::zero() {
            continue;
        }
        for (o, &hv) in out.iter_mut().zip(h.values()) {
            *o += *a * hv;
        }
    }
    SimpleFunction::new(*sys.space(), out).expect("length matches")
}

/// `alpha_1 h_∅ + 2 alpha_2 h_{alpha_1} + ... + 2^{n-1} alpha_n h_{alpha_1..alpha_{n-1}}`,
/// checked atomwise against `2^n chi_{A_alpha} - chi_{A_∅}`.
pub fn telescope<S: Scalar>(alpha: &MultiIndex, sys: &HaarLikeSystem<S>) -> Result<SimpleFunction<S>> {
    let n = alpha.level();
    if n > sys.levels() {
        return Err(Error::invalid(format!(
            "node {alpha} lies below the tree's max level {}",
            sys.levels()
        )));
    }
    let mut sum = sys.space().zero();
    for k in 1..=n {
        let coeff = S::of_usize(1usize << (k - 1)) * S::of(f64::from(alpha.entries()[k - 1]));
        let h = &sys.functions[alpha.prefix(k - 1).rank()];
        sum = sum.axpy(coeff, h);
    }
    if n > 0 {
        let target_set = sys.tree.node(alpha).expect("level checked");
        let top = S::of_usize(1usize << n);
        let expected = sys
            .space()
            .indicator(target_set)
            .scaled(top)
            .axpy(-S::one(), &sys.space().indicator(sys.base()));
        if expected != sum {
            return Err(Error::certificate(
                "telescoping identity",
                format!("mismatch along branch {alpha}"),
            ));
        }
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(e: &[i8]) -> MultiIndex {
        MultiIndex::new(e.to_vec()).unwrap()
    }

    #[test]
    fn natural_order_matches_display() {
        let order: Vec<String> = natural_order(2).iter().map(|m| m.to_string()).collect();
        assert_eq!(
            order,
            ["∅", "(-1)", "(1)", "(-1,-1)", "(-1,1)", "(1,-1)", "(1,1)"]
        );
        assert_eq!(natural_order(0), vec![MultiIndex::root()]);
        for (r, m) in natural_order(5).iter().enumerate() {
            assert_eq!(m.rank(), r);
            assert_eq!(m.to_string().parse::<MultiIndex>().unwrap(), *m);
        }
    }

    #[test]
    fn interval_tree_convention() {
        let s = DyadicSpace::<f64>::new(2, 1.0).unwrap();
        let t = classical_tree(&s, 2).unwrap();
        assert_eq!(t.node(&mi(&[-1])).unwrap().atoms(), &[0, 1]);
        assert_eq!(t.node(&mi(&[1])).unwrap().atoms(), &[2, 3]);
        assert_eq!(t.node(&mi(&[1, -1])).unwrap().atoms(), &[2]);
        assert!(matches!(classical_tree(&s, 3), Err(Error::Infeasible(_))));
    }

    #[test]
    fn explicit_split_validation() {
        let s = DyadicSpace::<f64>::new(2, 1.0).unwrap();
        let a = s.full();
        let good = vec![AtomSet::new(s, vec![0, 3]).unwrap()];
        let t = build_tree(&a, 1, SplitStrategy::Explicit(good)).unwrap();
        assert_eq!(t.node(&mi(&[-1])).unwrap().atoms(), &[1, 2]);
        let lopsided = vec![AtomSet::new(s, vec![0]).unwrap()];
        assert!(build_tree(&a, 1, SplitStrategy::Explicit(lopsided)).is_err());
    }

    #[test]
    fn haar_norms_and_values() {
        let s = DyadicSpace::<f64>::new(3, 2.0).unwrap();
        let sys = haar_system(classical_tree(&s, 3).unwrap());
        let root = sys.function(&MultiIndex::root()).unwrap();
        assert_eq!(root.values(), &[-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(root.norm(), 1.0);
        let h = sys.function(&mi(&[1])).unwrap();
        assert!((h.norm() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((sys.haar_norm(1) - 0.707_106_78).abs() < 1e-8);
    }

    #[test]
    fn expand_basis_element_and_zero() {
        let s = DyadicSpace::<f64>::new(3, 1.5).unwrap();
        let sys = haar_system(classical_tree(&s, 3).unwrap());
        let beta = mi(&[1, -1]);
        let c = expand(sys.function(&beta).unwrap(), &sys).unwrap();
        for (r, a) in c.0.iter().enumerate() {
            assert_eq!(*a, if r == beta.rank() { 1.0 } else { 0.0 });
        }
        let z = expand(&s.zero(), &sys).unwrap();
        assert!(z.0.iter().all(|&a| a == 0.0));
        let not_mean_zero = s.indicator(&s.full());
        assert!(expand(&not_mean_zero, &sys).is_err());
    }

    #[test]
    fn telescope_examples() {
        let s = DyadicSpace::<f64>::new(2, 1.0).unwrap();
        let sys = haar_system(classical_tree(&s, 2).unwrap());
        let t = telescope(&mi(&[1]), &sys).unwrap();
        assert_eq!(t.values(), &[-1.0, -1.0, 1.0, 1.0]);
        let t = telescope(&mi(&[1, 1]), &sys).unwrap();
        assert_eq!(t.values(), &[-1.0, -1.0, -1.0, 3.0]);
        assert!(t.norm_p(1.0) <= 2.0);
        assert_eq!(telescope(&MultiIndex::root(), &sys).unwrap(), s.zero());
    }

    #[test]
    fn tree_json_round_trip() {
        let s = DyadicSpace::<f64>::new(3, 1.0).unwrap();
        let splits = vec![
            AtomSet::new(s, vec![0, 2, 5, 7]).unwrap(),
            AtomSet::new(s, vec![1, 4]).unwrap(),
            AtomSet::new(s, vec![0, 7]).unwrap(),
        ];
        let t = build_tree(&s.full(), 2, SplitStrategy::Explicit(splits)).unwrap();
        let back = SubsetTree::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
    }
}
