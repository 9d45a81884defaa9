//! The stopping-time sign construction with small Haar coefficients, its
//! completion to an exact sign at finite depth, and the coefficient bound
//! for operators mapping a Haar-like system to an unconditional sequence.

use serde::{Deserialize, Serialize};

use crate::dyadic::{AtomSet, SimpleFunction};
use crate::error::{Error, Result};
use crate::haar::{Coefficients, HaarLikeSystem, MultiIndex};
use crate::narrowness::{assign_signs, SignOptions};
use crate::operators::FiniteOperator;
use crate::scalar::Scalar;
use crate::target::NormEstimate;
use crate::uncond::BasicSequence;

/// Bookkeeping after one level of the construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct LevelRecord<S> {
    pub level: usize,
    /// `‖f_n‖_1` of the level increment.
    pub increment_l1: S,
    /// `μ{|f_0 + … + f_n| < 1}`.
    pub residual_measure: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundedSignResult<S> {
    pub function: SimpleFunction<S>,
    pub coefficients: Coefficients<S>,
    pub m: u64,
    /// Partial sums in units of `1/m`, per atom of the space (0 off the base).
    pub numerators: Vec<i64>,
    /// Atoms where the truncated sum has modulus below 1.
    pub residual: AtomSet<S>,
    pub residual_measure: S,
    /// `‖f_{D'-1}‖_1`, the last increment.
    pub last_increment_l1: S,
    pub levels: Vec<LevelRecord<S>>,
}

/// Adds `a_α = 1/m` on every node whose running sum has modulus below 1,
/// and `0` where it already reached ±1; `m = ceil(1/δ)`.
pub fn bounded_sign<S: Scalar>(sys: &HaarLikeSystem<S>, delta: S) -> Result<BoundedSignResult<S>> {
    if !(delta > S::zero()) || !delta.is_finite() {
        return Err(Error::invalid("delta must be positive"));
    }
    let m = (S::one() / delta).ceil().to_u64().filter(|&m| m >= 1 && m < 1 << 40).ok_or_else(|| Error::invalid("delta too small"))?;
    bounded_sign_with_m(sys, m)
}

/// [`bounded_sign`] with the step `1/m` given directly.
pub fn bounded_sign_with_m<S: Scalar>(sys: &HaarLikeSystem<S>, m: u64) -> Result<BoundedSignResult<S>> {
    if m == 0 || m >= 1 << 40 {
        return Err(Error::invalid(format!("step count m = {m} out of range")));
    }
    if sys.levels() == 0 {
        return Err(Error::invalid("the system needs at least one level"));
    }
    let mi = m as i64;
    let space = *sys.space();
    let mu = space.atom_measure();
    let inv_m = S::one() / S::of(m as f64);
    let mut k = vec![0i64; space.atom_count()];
    let mut coeffs = vec![S::zero(); sys.len()];
    let mut levels = Vec::with_capacity(sys.levels());
    for level in 0..sys.levels() {
        let first = (1usize << level) - 1;
        let mut active = 0usize;
        for rank in first..2 * first + 1 {
            let node = sys.tree().node_by_rank(rank);
            // The running sum is constant on the node.
            let running = k[node.atoms()[0]];
            debug_assert!(node.atoms().iter().all(|&a| k[a] == running));
            if running.abs() < mi {
                coeffs[rank] = inv_m;
                active += node.len();
                let h = sys.functions()[rank].values();
                for &a in node.atoms() {
                    k[a] += if h[a] > S::zero() { 1 } else { -1 };
                }
            }
        }
        if k.iter().any(|&v| v.abs() > mi) {
            return Err(Error::certificate("bounded partial sums", format!("level {level} exceeds 1")));
        }
        let residual = sys.base().atoms().iter().filter(|&&a| k[a].abs() < mi).count();
        levels.push(LevelRecord {
            level,
            increment_l1: S::of_usize(active) * mu * inv_m,
            residual_measure: S::of_usize(residual) * mu,
        });
    }
    let values: Vec<S> = k
        .iter()
        .map(|&v| match v {
            v if v == mi => S::one(),
            v if v == -mi => -S::one(),
            v => S::of(v as f64) * inv_m,
        })
        .collect();
    let residual: Vec<usize> = sys.base().atoms().iter().copied().filter(|&a| k[a].abs() < mi).collect();
    let residual = AtomSet::new(space, residual)?;
    let last = *levels.last().expect("at least one level");
    Ok(BoundedSignResult {
        function: SimpleFunction::new(space, values)?,
        coefficients: Coefficients(coeffs),
        m,
        numerators: k,
        residual_measure: residual.measure(),
        residual,
        last_increment_l1: last.increment_l1,
        levels,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion<S> {
    pub sign: SimpleFunction<S>,
    /// `sign - f`, supported on the residual set.
    pub correction: SimpleFunction<S>,
    /// `‖correction‖_1`; at most `2 μ(B)`.
    pub slack: S,
    /// `‖T(correction)‖` when an operator was supplied.
    pub correction_image: Option<NormEstimate<S>>,
}

/// Rounds the residual set to ±1 so that the result is an exact sign on the
/// base, choosing the signs to keep `‖T(correction)‖` small if `t` is given.
pub fn complete_to_sign<S: Scalar>(
    res: &BoundedSignResult<S>,
    base: &AtomSet<S>,
    t: Option<&FiniteOperator<S>>,
    opts: &SignOptions,
) -> Result<Completion<S>> {
    let space = *res.function.space();
    if base.space() != &space || !res.residual.is_subset_of(base) {
        return Err(Error::invalid("residual set does not lie in the base"));
    }
    let mi = res.m as i64;
    let b = res.residual.atoms();
    // s = -Σ_{off B} f, counted in atoms.
    let s: i64 = -base
        .atoms()
        .iter()
        .filter(|&&a| !res.residual.contains(a))
        .map(|&a| res.numerators[a].signum())
        .sum::<i64>();
    let total = b.len() as i64 + s;
    if total % 2 != 0 || total < 0 || total > 2 * b.len() as i64 {
        return Err(Error::infeasible(format!(
            "residual of {} atoms cannot be completed (imbalance {s})",
            b.len()
        )));
    }
    let plus_count = (total / 2) as usize;
    let plus = match t {
        Some(op) if !b.is_empty() => {
            if op.source() != &space {
                return Err(Error::SpaceMismatch("completion operator".into()));
            }
            let columns: Vec<Vec<S>> = b.iter().map(|&a| op.column(a).to_vec()).collect();
            let fb: Vec<S> = b.iter().map(|&a| res.function.value(a)).collect();
            let mut offset = vec![S::zero(); op.rows()];
            for (c, &v) in columns.iter().zip(&fb) {
                offset.iter_mut().zip(c).for_each(|(o, &x)| *o -= v * x);
            }
            assign_signs(&columns, &offset, plus_count, op.target(), opts)?.plus
        }
        _ => (0..b.len()).map(|i| i < plus_count).collect(),
    };
    let mut values = res.function.values().to_vec();
    let mut corr = space.zero().into_values();
    for (&a, &p) in b.iter().zip(&plus) {
        let v = if p { S::one() } else { -S::one() };
        corr[a] = v - values[a];
        values[a] = v;
    }
    debug_assert!(res.numerators.iter().all(|&v| v.abs() <= mi));
    let sign = SimpleFunction::new(space, values)?;
    if !crate::dyadic::is_sign(&sign, base) {
        return Err(Error::certificate("completion", "result is not a sign on the base"));
    }
    let correction = SimpleFunction::new(space, corr)?;
    let correction_image = match t {
        Some(op) => Some(op.target().norm_bounds(&op.apply(&correction)?)),
        None => None,
    };
    Ok(Completion {
        sign,
        slack: correction.norm_p(S::one()),
        correction,
        correction_image,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Lemma41Report<S> {
    /// `‖Σ a_α U h_α‖`.
    pub lhs: NormEstimate<S>,
    /// `2 ‖U‖ β² μ(A) sup|a_α|`.
    pub rhs: S,
    pub constant: S,
    pub holds: bool,
}

/// Checks `‖Σ a_α U h_α‖ ≤ 2 ‖U‖ β² μ(A) sup_α |a_α|` on `L_1`.
pub fn lemma41_bound_check<S: Scalar>(
    u_images: &BasicSequence<S>,
    sys: &HaarLikeSystem<S>,
    coeffs: &Coefficients<S>,
    u_norm: S,
    beta: S,
) -> Result<Lemma41Report<S>> {
    if sys.space().exponent() != S::one() {
        return Err(Error::invalid("the coefficient bound is stated on L_1"));
    }
    if u_images.len() != sys.len() || coeffs.0.len() != sys.len() {
        return Err(Error::invalid("images, system and coefficients must align"));
    }
    let y = u_images.combination(&coeffs.0);
    let lhs = u_images.target().norm_bounds(&y);
    let constant = S::of(2.0) * u_norm * beta * beta * sys.base().measure();
    let rhs = constant * coeffs.sup_abs();
    Ok(Lemma41Report {
        lhs,
        rhs,
        constant,
        holds: lhs.lower <= rhs + S::of(1e-9),
    })
}

/// Indices of the nodes with a nonzero coefficient, in natural order.
pub fn active_nodes<S: Scalar>(res: &BoundedSignResult<S>) -> Vec<MultiIndex> {
    res.coefficients
        .0
        .iter()
        .enumerate()
        .filter(|(_, &a)| a != S::zero())
        .map(|(r, _)| MultiIndex::from_rank(r))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{is_sign, DyadicSpace};
    use crate::haar::{classical_tree, haar_system, reconstruct};

    fn classical(depth: u32) -> HaarLikeSystem<f64> {
        let s = DyadicSpace::new(depth, 1.0).unwrap();
        haar_system(classical_tree(&s, depth as usize).unwrap())
    }

    #[test]
    fn m_one_is_the_root_function() {
        let sys = classical(4);
        let res = bounded_sign(&sys, 1.5).unwrap();
        assert_eq!(res.m, 1);
        assert_eq!(&res.function, &sys.functions()[0]);
        assert!(res.residual.is_empty());
        assert_eq!(active_nodes(&res), vec![MultiIndex::root()]);
    }

    #[test]
    fn m_two_residual_sequence() {
        let sys = classical(10);
        let res = bounded_sign(&sys, 0.5).unwrap();
        let measures: Vec<f64> = res.levels.iter().map(|l| l.residual_measure).collect();
        let expected: Vec<f64> = (0..10).map(|n| 0.5f64.powi((n + 1) / 2)).collect();
        assert_eq!(measures, expected);
        assert_eq!(res.function.integral(), 0.0);
        assert_eq!(reconstruct(&res.coefficients, &sys).unwrap(), res.function);
        for l in &res.levels {
            assert!(l.residual_measure <= 2.0 * l.increment_l1);
        }
    }

    #[test]
    fn completion_is_a_sign() {
        let sys = classical(6);
        let res = bounded_sign(&sys, 0.25).unwrap();
        let c = complete_to_sign(&res, sys.base(), None, &SignOptions::default()).unwrap();
        assert!(is_sign(&c.sign, sys.base()));
        assert!(c.slack <= 2.0 * res.residual_measure);
        assert_eq!(c.sign.integral(), 0.0);
    }
}
