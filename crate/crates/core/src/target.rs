//! Composable norm descriptors for operator targets, and norm estimates.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest block count for which the unconditional-sum norm is evaluated by
/// full sign enumeration (`2^{N-1}` patterns).
pub const UNCOND_EXACT_BLOCKS: usize = 22;

const PARALLEL_PATTERNS: usize = 1 << 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Search,
    Bound,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::Search => "search",
            Method::Bound => "bound",
        })
    }
}

/// `lower <= true value <= upper`; `Exact` means the two coincide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct NormEstimate<S> {
    pub lower: S,
    pub upper: S,
    pub method: Method,
}

impl<S: Scalar> NormEstimate<S> {
    pub fn exact(value: S) -> Self {
        NormEstimate {
            lower: value,
            upper: value,
            method: Method::Exact,
        }
    }

    /// Interval estimate. A lower bound that overshoots the upper bound by
    /// rounding is absorbed by raising the upper bound.
    pub fn interval(lower: S, upper: S, method: Method) -> Self {
        NormEstimate {
            lower,
            upper: upper.max(lower),
            method,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.method == Method::Exact
    }

    /// Best point value: the exact value, else the certified lower bound.
    pub fn value(&self) -> S {
        self.lower
    }

    pub fn scaled(&self, c: S) -> Self {
        NormEstimate {
            lower: self.lower * c,
            upper: self.upper * c,
            method: self.method,
        }
    }
}

/// A finite-dimensional normed space assembled from `L_q`, `ℓ_q`, `q`-direct
/// sums, and unconditional sums `Y` of copies of a base space.
///
/// The `Y` norm of `(y_1, …, y_N)` is `max_ε ‖Σ ε_n y_n‖` in the base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "S: Scalar")]
pub enum NormedTarget<S> {
    /// `(Σ w_i |y_i|^q)^{1/q}`.
    Lq { weights: Vec<S>, q: S },
    Ellq { dim: usize, q: S },
    DirectSum { q: S, children: Vec<NormedTarget<S>> },
    UncondSum { base: Box<NormedTarget<S>>, blocks: usize },
}

impl<S: Scalar> NormedTarget<S> {
    pub fn lq(weights: Vec<S>, q: S) -> Result<Self> {
        let t = NormedTarget::Lq { weights, q };
        t.validate()?;
        Ok(t)
    }

    pub fn ellq(dim: usize, q: S) -> Result<Self> {
        let t = NormedTarget::Ellq { dim, q };
        t.validate()?;
        Ok(t)
    }

    pub fn direct_sum(q: S, children: Vec<NormedTarget<S>>) -> Result<Self> {
        let t = NormedTarget::DirectSum { q, children };
        t.validate()?;
        Ok(t)
    }

    pub fn uncond_sum(base: NormedTarget<S>, blocks: usize) -> Result<Self> {
        let t = NormedTarget::UncondSum {
            base: Box::new(base),
            blocks,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let check_q = |q: S| {
            if q >= S::one() && q.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("target exponent q = {q} must be >= 1")))
            }
        };
        match self {
            NormedTarget::Lq { weights, q } => {
                check_q(*q)?;
                if weights.is_empty() || weights.iter().any(|w| !(*w > S::zero()) || !w.is_finite()) {
                    return Err(Error::invalid("L_q weights must be positive"));
                }
            }
            NormedTarget::Ellq { dim, q } => {
                check_q(*q)?;
                if *dim == 0 {
                    return Err(Error::invalid("ℓ_q dimension must be positive"));
                }
            }
            NormedTarget::DirectSum { q, children } => {
                check_q(*q)?;
                if children.is_empty() {
                    return Err(Error::invalid("direct sum needs children"));
                }
                children.iter().try_for_each(|c| c.validate())?;
            }
            NormedTarget::UncondSum { base, blocks } => {
                if *blocks == 0 {
                    return Err(Error::invalid("unconditional sum needs at least one block"));
                }
                base.validate()?;
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            NormedTarget::Lq { weights, .. } => weights.len(),
            NormedTarget::Ellq { dim, .. } => *dim,
            NormedTarget::DirectSum { children, .. } => children.iter().map(|c| c.dim()).sum(),
            NormedTarget::UncondSum { base, blocks } => base.dim() * blocks,
        }
    }

    /// `true` when `norm` is exact for every vector (no unconditional sum
    /// beyond the enumeration cap anywhere in the descriptor).
    pub fn norm_is_exact(&self) -> bool {
        match self {
            NormedTarget::Lq { .. } | NormedTarget::Ellq { .. } => true,
            NormedTarget::DirectSum { children, .. } => children.iter().all(|c| c.norm_is_exact()),
            NormedTarget::UncondSum { base, blocks } => {
                *blocks <= UNCOND_EXACT_BLOCKS && base.norm_is_exact()
            }
        }
    }

    /// Norm value; exact when [`Self::norm_is_exact`], otherwise the searched
    /// lower bound.
    pub fn norm(&self, y: &[S]) -> S {
        self.norm_bounds(y).lower
    }

    pub fn norm_bounds(&self, y: &[S]) -> NormEstimate<S> {
        debug_assert_eq!(y.len(), self.dim());
        match self {
            NormedTarget::Lq { weights, q } => NormEstimate::exact(weighted_lq(y, weights, *q)),
            NormedTarget::Ellq { q, .. } => NormEstimate::exact(unweighted_lq(y, *q)),
            NormedTarget::DirectSum { q, children } => {
                let mut offset = 0;
                let mut lower = Vec::with_capacity(children.len());
                let mut upper = Vec::with_capacity(children.len());
                let mut exact = true;
                for c in children {
                    let e = c.norm_bounds(&y[offset..offset + c.dim()]);
                    offset += c.dim();
                    exact &= e.is_exact();
                    lower.push(e.lower);
                    upper.push(e.upper);
                }
                let l = unweighted_lq(&lower, *q);
                if exact {
                    NormEstimate::exact(l)
                } else {
                    NormEstimate::interval(l, unweighted_lq(&upper, *q), Method::Search)
                }
            }
            NormedTarget::UncondSum { base, blocks } => uncond_norm_bounds(base, *blocks, y),
        }
    }

    /// Per-coordinate weights when the norm is a weighted Euclidean norm.
    pub fn euclidean_weights(&self) -> Option<Vec<S>> {
        let two = S::of(2.0);
        match self {
            NormedTarget::Lq { weights, q } if *q == two => Some(weights.clone()),
            NormedTarget::Ellq { dim, q } if *q == two => Some(vec![S::one(); *dim]),
            NormedTarget::DirectSum { q, children } if *q == two => {
                let mut w = Vec::with_capacity(self.dim());
                for c in children {
                    w.extend(c.euclidean_weights()?);
                }
                Some(w)
            }
            NormedTarget::UncondSum { base, blocks } if *blocks == 1 => base.euclidean_weights(),
            _ => None,
        }
    }

    /// Weights and exponent when the norm is `(Σ w_i |y_i|^q)^{1/q}`.
    pub fn lq_weights(&self) -> Option<(Vec<S>, S)> {
        match self {
            NormedTarget::Lq { weights, q } => Some((weights.clone(), *q)),
            NormedTarget::Ellq { dim, q } => Some((vec![S::one(); *dim], *q)),
            NormedTarget::DirectSum { q, children } => {
                let mut w = Vec::with_capacity(self.dim());
                for c in children {
                    let (cw, cq) = c.lq_weights()?;
                    if cq != *q {
                        return None;
                    }
                    w.extend(cw);
                }
                Some((w, *q))
            }
            NormedTarget::UncondSum { base, blocks } if *blocks == 1 => base.lq_weights(),
            NormedTarget::UncondSum { .. } => None,
        }
    }

    /// Base space and block count of an unconditional sum.
    pub fn as_uncond(&self) -> Option<(&NormedTarget<S>, usize)> {
        match self {
            NormedTarget::UncondSum { base, blocks } => Some((base, *blocks)),
            _ => None,
        }
    }
}

fn weighted_lq<S: Scalar>(y: &[S], w: &[S], q: S) -> S {
    if q == S::one() {
        y.iter().zip(w).map(|(&v, &w)| v.abs() * w).sum()
    } else if q == S::of(2.0) {
        y.iter().zip(w).map(|(&v, &w)| v * v * w).sum::<S>().sqrt()
    } else {
        y.iter()
            .zip(w)
            .map(|(&v, &w)| v.abs().powf(q) * w)
            .sum::<S>()
            .powf(q.recip())
    }
}

fn unweighted_lq<S: Scalar>(y: &[S], q: S) -> S {
    if q == S::one() {
        y.iter().map(|v| v.abs()).sum()
    } else if q == S::of(2.0) {
        y.iter().map(|&v| v * v).sum::<S>().sqrt()
    } else {
        y.iter().map(|v| v.abs().powf(q)).sum::<S>().powf(q.recip())
    }
}

/// `Σ ε_n y_n` with `ε_0 = +1` and `ε_n = -1` where bit `n-1` of `pattern` is set.
fn signed_block_sum<S: Scalar>(y: &[S], d: usize, blocks: usize, pattern: u64, out: &mut [S]) {
    out.copy_from_slice(&y[..d]);
    for n in 1..blocks {
        let block = &y[n * d..(n + 1) * d];
        if pattern >> (n - 1) & 1 == 1 {
            out.iter_mut().zip(block).for_each(|(o, &b)| *o -= b);
        } else {
            out.iter_mut().zip(block).for_each(|(o, &b)| *o += b);
        }
    }
}

fn uncond_norm_bounds<S: Scalar>(base: &NormedTarget<S>, blocks: usize, y: &[S]) -> NormEstimate<S> {
    let d = base.dim();
    if blocks == 1 {
        return base.norm_bounds(y);
    }
    // Zero blocks do not affect the norm; drop them before enumerating.
    let live: Vec<usize> = (0..blocks)
        .filter(|&n| y[n * d..(n + 1) * d].iter().any(|&v| v != S::zero()))
        .collect();
    if live.len() < blocks {
        if live.is_empty() {
            return NormEstimate::exact(S::zero());
        }
        let packed: Vec<S> = live.iter().flat_map(|&n| y[n * d..(n + 1) * d].iter().copied()).collect();
        return uncond_norm_bounds(base, live.len(), &packed);
    }
    if blocks <= UNCOND_EXACT_BLOCKS {
        let patterns = 1u64 << (blocks - 1);
        let eval = |pattern: u64, buf: &mut Vec<S>| {
            signed_block_sum(y, d, blocks, pattern, buf);
            base.norm_bounds(buf)
        };
        let merge = |a: NormEstimate<S>, b: NormEstimate<S>| NormEstimate {
            lower: a.lower.max(b.lower),
            upper: a.upper.max(b.upper),
            method: if a.is_exact() && b.is_exact() {
                Method::Exact
            } else {
                Method::Search
            },
        };
        let zero = NormEstimate::exact(S::zero());
        return if patterns as usize >= PARALLEL_PATTERNS {
            (0..patterns)
                .into_par_iter()
                .map_init(|| vec![S::zero(); d], |buf, pat| eval(pat, buf))
                .reduce(|| zero, merge)
        } else {
            let mut buf = vec![S::zero(); d];
            (0..patterns).fold(zero, |acc, pat| merge(acc, eval(pat, &mut buf)))
        };
    }
    // Beyond the cap: greedy single-sign ascent from the all-plus pattern and
    // from a few fixed alternating patterns gives a lower bound; the triangle
    // inequality gives the upper bound.
    let block = |n: usize| &y[n * d..(n + 1) * d];
    let mut best = S::zero();
    let starts: [fn(usize) -> bool; 3] = [|_| true, |n| n % 2 == 0, |n| (n / 2) % 2 == 0];
    for start in starts {
        let mut signs: Vec<bool> = (0..blocks).map(start).collect();
        let mut sum = vec![S::zero(); d];
        for n in 0..blocks {
            let c = if signs[n] { S::one() } else { -S::one() };
            sum.iter_mut().zip(block(n)).for_each(|(s, &b)| *s += c * b);
        }
        let mut current = base.norm(&sum);
        let mut trial = vec![S::zero(); d];
        loop {
            let mut improved = false;
            for n in 0..blocks {
                let c = if signs[n] { S::of(-2.0) } else { S::of(2.0) };
                trial.iter_mut().zip(&sum).zip(block(n)).for_each(|((t, &s), &b)| *t = s + c * b);
                let v = base.norm(&trial);
                if v > current {
                    current = v;
                    signs[n] = !signs[n];
                    sum.copy_from_slice(&trial);
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        best = best.max(current);
    }
    let upper = (0..blocks).map(|n| base.norm_bounds(block(n)).upper).sum();
    NormEstimate::interval(best, upper, Method::Search)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_norms() {
        let t = NormedTarget::<f64>::ellq(3, 1.0).unwrap();
        assert_eq!(t.norm(&[1.0, -2.0, 3.0]), 6.0);
        let t = NormedTarget::<f64>::lq(vec![0.25; 4], 2.0).unwrap();
        assert_eq!(t.norm(&[2.0, 0.0, 0.0, 0.0]), 1.0);
        let ds = NormedTarget::direct_sum(
            2.0,
            vec![
                NormedTarget::<f64>::ellq(1, 1.0).unwrap(),
                NormedTarget::ellq(2, 1.0).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(ds.norm(&[3.0, 2.0, -2.0]), 5.0);
    }

    #[test]
    fn uncond_sum_examples() {
        let y = NormedTarget::<f64>::uncond_sum(NormedTarget::ellq(2, 1.0).unwrap(), 2).unwrap();
        // max(‖(2,0)‖, ‖(0,2)‖) = 2
        assert_eq!(y.norm(&[1.0, 1.0, 1.0, -1.0]), 2.0);
        // one-dimensional base: the Y norm is ℓ_1 of the blocks
        let y = NormedTarget::<f64>::uncond_sum(NormedTarget::ellq(1, 2.0).unwrap(), 4).unwrap();
        assert_eq!(y.norm(&[1.0, -2.0, 3.0, -4.0]), 10.0);
        assert!(y.norm_bounds(&[1.0, -2.0, 3.0, -4.0]).is_exact());
    }

    #[test]
    fn uncond_sum_beyond_cap_is_interval() {
        let blocks = UNCOND_EXACT_BLOCKS + 2;
        let y = NormedTarget::<f64>::uncond_sum(NormedTarget::ellq(1, 1.0).unwrap(), blocks).unwrap();
        let v: Vec<f64> = (0..blocks).map(|i| if i % 3 == 0 { 1.0 } else { -0.5 }).collect();
        let e = y.norm_bounds(&v);
        let truth: f64 = v.iter().map(|x| x.abs()).sum();
        assert_eq!(e.method, Method::Search);
        assert!(e.lower <= truth + 1e-12 && truth <= e.upper + 1e-12);
        // scalar blocks: greedy ascent reaches the optimum
        assert!((e.lower - truth).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(NormedTarget::<f64>::ellq(0, 1.0).is_err());
        assert!(NormedTarget::<f64>::ellq(2, 0.5).is_err());
        assert!(NormedTarget::<f64>::lq(vec![1.0, 0.0], 1.0).is_err());
        assert!(NormedTarget::<f64>::uncond_sum(NormedTarget::ellq(1, 1.0).unwrap(), 0).is_err());
    }

    #[test]
    fn descriptor_json_round_trip() {
        let t = NormedTarget::<f64>::uncond_sum(
            NormedTarget::direct_sum(
                2.0,
                vec![NormedTarget::lq(vec![0.5, 0.5], 3.0).unwrap(), NormedTarget::ellq(2, 1.0).unwrap()],
            )
            .unwrap(),
            3,
        )
        .unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: NormedTarget<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }
}
