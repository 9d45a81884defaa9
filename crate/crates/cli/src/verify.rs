//! Cheap certificates stored with a run and rechecked by `verify`: exact
//! identities and postconditions recomputed from the stored inputs, with no
//! searches redone.

use std::fs;
use std::path::Path;

use narrowops::haar::TreeRecord;
use narrowops::operators::OperatorRecord;
use narrowops::{
    burkholder_beta, bounded_sign_with_m, classical_tree, haar_system, is_sign, AtomSet, BasicSequence, DyadicSpace,
    FactorizationResult, FiniteOperator, MultiIndex, NormEstimate, NormedTarget, SeriesRep, SimpleFunction,
    SubsetTree,
};
use serde::{Deserialize, Serialize};

use crate::report::{summary_path, Summary, RUN_FORMAT, RUN_FORMAT_VERSION};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Check {
    Burkholder {
        p: f64,
        beta: f64,
    },
    /// A sign on `set` and the norm of its image.
    Sign {
        name: String,
        operator: OperatorRecord<f64>,
        set: Vec<usize>,
        sign: Vec<f64>,
        value: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        bound: Option<f64>,
    },
    /// `‖T h_α‖ ≤ ε_α` along a stored tree.
    Tree {
        name: String,
        operator: OperatorRecord<f64>,
        tree: TreeRecord<f64>,
        achieved: Vec<f64>,
        required: Vec<f64>,
    },
    /// A ratio `‖Σ ε_k a_k x_k‖ / ‖Σ a_k x_k‖` witnessing an unconditional
    /// constant lower bound.
    Witness {
        name: String,
        target: NormedTarget<f64>,
        vectors: Vec<Vec<f64>>,
        signs: Vec<i8>,
        coefficients: Vec<f64>,
        ratio: f64,
    },
    /// The level records of the bounded-coefficient sign on the classical tree.
    BoundedSign {
        name: String,
        depth: u32,
        m: u64,
        increments: Vec<f64>,
        residuals: Vec<f64>,
        integral: f64,
        sup_coefficient: f64,
    },
    /// A factorization rebuilt from its tree and cuts and rechecked.
    Factorization {
        name: String,
        terms: Vec<OperatorRecord<f64>>,
        m: NormEstimate<f64>,
        tree: TreeRecord<f64>,
        cuts: Vec<usize>,
        epsilon: f64,
        v_bound: f64,
    },
}

/// A certificate that did not validate.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckFailure {
    pub certificate: String,
    pub detail: String,
}

impl std::fmt::Display for CheckFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.certificate, self.detail)
    }
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

impl Check {
    pub fn name(&self) -> String {
        match self {
            Check::Burkholder { p, .. } => format!("burkholder[p={p}]"),
            Check::Sign { name, .. }
            | Check::Tree { name, .. }
            | Check::Witness { name, .. }
            | Check::BoundedSign { name, .. }
            | Check::Factorization { name, .. } => name.clone(),
        }
    }

    pub fn verify(&self) -> Result<(), CheckFailure> {
        let name = self.name();
        let fail = |what: &str, detail: String| {
            Err(CheckFailure {
                certificate: format!("{name}: {what}"),
                detail,
            })
        };
        let corrupt = |e: narrowops::Error| CheckFailure {
            certificate: format!("{name}: record"),
            detail: e.to_string(),
        };
        match self {
            Check::Burkholder { p, beta } => {
                let b = burkholder_beta(*p).map_err(corrupt)?;
                if b != *beta {
                    return fail("beta formula", format!("stored {beta}, formula gives {b}"));
                }
            }
            Check::Sign {
                operator,
                set,
                sign,
                value,
                bound,
                ..
            } => {
                let t = FiniteOperator::from_record(operator).map_err(corrupt)?;
                let set = AtomSet::new(*t.source(), set.clone()).map_err(corrupt)?;
                let f = SimpleFunction::new(*t.source(), sign.clone()).map_err(corrupt)?;
                if !is_sign(&f, &set) {
                    return fail("sign", "stored function is not a balanced ±1 sign on the set".into());
                }
                let norm = t.target().norm_bounds(&t.apply(&f).map_err(corrupt)?).upper;
                if !close(norm, *value) {
                    return fail("image norm", format!("stored {value}, recomputed {norm}"));
                }
                if let Some(b) = bound {
                    if norm > *b {
                        return fail("bound", format!("{norm} > {b}"));
                    }
                }
            }
            Check::Tree {
                operator,
                tree,
                achieved,
                required,
                ..
            } => {
                let t = FiniteOperator::from_record(operator).map_err(corrupt)?;
                let sys = haar_system(SubsetTree::from_record(tree).map_err(corrupt)?);
                if achieved.len() != sys.len() || required.len() != sys.len() {
                    return fail("shape", "per-node records do not match the tree".into());
                }
                for (r, h) in sys.functions().iter().enumerate() {
                    let node = MultiIndex::from_rank(r);
                    let norm = t.target().norm_bounds(&t.apply(h).map_err(corrupt)?).upper;
                    if !close(norm, achieved[r]) {
                        return fail("‖T h_α‖", format!("node {node}: stored {}, recomputed {norm}", achieved[r]));
                    }
                    if norm > required[r] {
                        return fail("‖T h_α‖ ≤ ε_α", format!("node {node}: {norm} > {}", required[r]));
                    }
                }
            }
            Check::Witness {
                target,
                vectors,
                signs,
                coefficients,
                ratio,
                ..
            } => {
                let seq = BasicSequence::new(target.clone(), vectors.clone()).map_err(corrupt)?;
                if signs.len() != seq.len() || coefficients.len() != seq.len() {
                    return fail("shape", "witness does not match the sequence".into());
                }
                let r = seq.ratio(signs, coefficients);
                if !close(r, *ratio) {
                    return fail("ratio", format!("stored {ratio}, recomputed {r}"));
                }
            }
            Check::BoundedSign {
                depth,
                m,
                increments,
                residuals,
                integral,
                sup_coefficient,
                ..
            } => {
                let space = DyadicSpace::new(*depth, 1.0).map_err(corrupt)?;
                let sys = haar_system(classical_tree(&space, *depth as usize).map_err(corrupt)?);
                let res = bounded_sign_with_m(&sys, *m).map_err(corrupt)?;
                if res.levels.len() != increments.len() || res.levels.len() != residuals.len() {
                    return fail("shape", "level records do not match the depth".into());
                }
                for (l, (&inc, &resid)) in res.levels.iter().zip(increments.iter().zip(residuals)) {
                    if l.increment_l1 != inc || l.residual_measure != resid {
                        return fail(
                            "level records",
                            format!("level {}: stored ({inc}, {resid}), recomputed ({}, {})", l.level, l.increment_l1, l.residual_measure),
                        );
                    }
                    if resid > *m as f64 * inc {
                        return fail("μ(B_n) ≤ m ‖f_n‖_1", format!("level {}: {resid} > {m} · {inc}", l.level));
                    }
                }
                let int = res.function.integral();
                if int != *integral || res.numerators.iter().sum::<i64>() != 0 {
                    return fail("integral", format!("stored {integral}, recomputed {int}"));
                }
                let sup = res.coefficients.sup_abs();
                if sup != *sup_coefficient || sup > 1.0 / *m as f64 {
                    return fail("sup |a_α| ≤ 1/m", format!("stored {sup_coefficient}, recomputed {sup}"));
                }
            }
            Check::Factorization {
                terms,
                m,
                tree,
                cuts,
                epsilon,
                v_bound,
                ..
            } => {
                let terms = terms
                    .iter()
                    .map(FiniteOperator::from_record)
                    .collect::<narrowops::Result<Vec<_>>>()
                    .map_err(corrupt)?;
                let series = SeriesRep::from_parts(terms, *m).map_err(corrupt)?;
                let tree = SubsetTree::from_record(tree).map_err(corrupt)?;
                let res = match FactorizationResult::from_cuts(&series, tree, cuts, *epsilon) {
                    Ok(res) => res,
                    Err(narrowops::Error::Certificate { name: what, detail }) => return fail(&what, detail),
                    Err(e) => return Err(corrupt(e)),
                };
                if !close(res.v_bound, *v_bound) {
                    return fail("‖V‖ bound", format!("stored {v_bound}, recomputed {}", res.v_bound));
                }
            }
        }
        Ok(())
    }
}

/// Outcome of [`verify_run`].
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub checked: usize,
    pub failures: Vec<CheckFailure>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Loads `summary.json` from a run directory (or the file itself) and
/// rechecks every stored certificate. Records of older artifact versions are
/// accepted as long as the run format version is understood.
pub fn verify_run(path: &Path) -> Result<VerifyReport, CliError> {
    let file = if path.is_dir() { summary_path(path) } else { path.to_path_buf() };
    let text = fs::read_to_string(&file).map_err(|e| CliError::io(&file, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Corrupt(format!("{}: {e}", file.display())))?;
    if value.get("format").and_then(|v| v.as_str()) != Some(RUN_FORMAT) {
        return Err(CliError::Corrupt(format!("{} is not a run summary", file.display())));
    }
    match value.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v >= 1 && v <= RUN_FORMAT_VERSION as u64 => {}
        v => return Err(CliError::Corrupt(format!("unsupported run format version {v:?}"))),
    }
    let summary: Summary =
        serde_json::from_value(value).map_err(|e| CliError::Corrupt(format!("{}: {e}", file.display())))?;
    let failures = summary.checks.iter().filter_map(|c| c.verify().err()).collect();
    Ok(VerifyReport {
        checked: summary.checks.len(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use narrowops::operators::identity_like;

    fn sign_check() -> Check {
        let space = DyadicSpace::new(2, 1.0).unwrap();
        let t = identity_like(&space).unwrap();
        Check::Sign {
            name: "s".into(),
            operator: t.to_record(),
            set: vec![0, 1, 2, 3],
            sign: vec![1.0, -1.0, 1.0, -1.0],
            value: 1.0,
            bound: None,
        }
    }

    #[test]
    fn sign_check_passes_and_detects_tampering() {
        let c = sign_check();
        c.verify().unwrap();
        let Check::Sign { operator, set, value, bound, name, .. } = c else { unreachable!() };
        let bad = Check::Sign {
            name,
            operator,
            set,
            sign: vec![1.0, 1.0, 1.0, -1.0],
            value,
            bound,
        };
        assert_eq!(bad.verify().unwrap_err().certificate, "s: sign");
    }

    #[test]
    fn burkholder_check() {
        Check::Burkholder { p: 1.5, beta: 2.0 }.verify().unwrap();
        assert!(Check::Burkholder { p: 3.0, beta: 3.0 }.verify().is_err());
    }
}
