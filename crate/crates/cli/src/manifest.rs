//! Experiment manifests: everything a run depends on, in one TOML file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Search budgets shared by the sign, norm and unconditional-constant searches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budget {
    /// Evaluation budget of the heuristic sign search.
    pub sign_evaluations: usize,
    /// Sets above this many atoms are searched heuristically.
    pub exact_cap: usize,
    pub restarts: usize,
    pub sweeps: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            sign_evaluations: 20_000,
            exact_cap: narrowops::narrowness::DEFAULT_EXACT_CAP,
            restarts: 8,
            sweeps: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    /// Uniform random columns, rescaled so the largest `‖T χ_i‖ / μ_i` is `scale`.
    Random {
        #[serde(default = "one")]
        scale: f64,
    },
    /// `f ↦ (∫ f) x`; `x` defaults to the all-ones vector.
    Integration {
        #[serde(default)]
        x: Vec<f64>,
    },
    /// `χ_i ↦ μ_i e_i` into `ℓ_1`.
    Identity,
    /// The averaging operator over the `t` coordinate of a product grid.
    Counterexample,
    /// A series of `1 + i mod max_terms` random rank-one operators for
    /// instance `i`, each of norm `scale` on `L_1`. Series subcommands use
    /// the terms; the others use their sum.
    RankOneSeries {
        #[serde(default = "eight")]
        max_terms: usize,
        #[serde(default = "one")]
        scale: f64,
    },
    /// An operator record written by the library (`to_json`); relative paths
    /// resolve against the manifest's directory.
    File { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

fn eight() -> usize {
    8
}

impl Default for OperatorSpec {
    fn default() -> Self {
        OperatorSpec::Random { scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Manifest {
    pub name: String,
    pub artifact_version: String,
    pub seed: u64,
    /// Depth of the dyadic source space (`2^depth` atoms).
    pub depth: u32,
    /// Exponents; empty means the subcommand's default list.
    pub p: Vec<f64>,
    pub epsilon: f64,
    /// Tree levels `D'`.
    pub levels: usize,
    pub instances: usize,
    pub target_dim: usize,
    pub target_q: f64,
    /// Number of Haar slices; defaults to the atom count.
    pub slices: Option<usize>,
    /// Step counts for `signbuild`.
    pub m: Vec<u64>,
    /// Depths swept by `signbuild`; empty means `[depth]`.
    pub sign_depths: Vec<u32>,
    /// Equal blocks per partition for `hpp`.
    pub blocks: usize,
    /// Random partitions drawn by `hpp` when enumeration is too large.
    pub partitions: usize,
    /// Claimed lower bound for `lb-check`.
    pub c: f64,
    pub depth_s: u32,
    pub depth_t: u32,
    pub budget: Budget,
    pub operator: OperatorSpec,
    /// Output root; `--out` takes precedence.
    pub output: Option<PathBuf>,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            name: "run".into(),
            artifact_version: ARTIFACT_VERSION.into(),
            seed: 0,
            depth: 4,
            p: Vec::new(),
            epsilon: 0.1,
            levels: 2,
            instances: 1,
            target_dim: 4,
            target_q: 1.0,
            slices: None,
            m: vec![2, 4, 8],
            sign_depths: Vec::new(),
            blocks: 2,
            partitions: 64,
            c: 1.0,
            depth_s: 2,
            depth_t: 2,
            budget: Budget::default(),
            operator: OperatorSpec::default(),
            output: None,
            base_dir: None,
        }
    }
}

const MAX_DEPTH: u32 = 16;

impl Manifest {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Manifest(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Manifest(format!("{}: {e}", path.display())))?;
        let mut m = Self::from_toml(&text)?;
        m.base_dir = path.parent().map(Path::to_path_buf);
        Ok(m)
    }

    pub fn p_list(&self, default: &[f64]) -> Vec<f64> {
        if self.p.is_empty() {
            default.to_vec()
        } else {
            self.p.clone()
        }
    }

    pub fn sign_depths(&self) -> Vec<u32> {
        if self.sign_depths.is_empty() {
            vec![self.depth]
        } else {
            self.sign_depths.clone()
        }
    }

    pub fn operator_path(&self) -> Option<PathBuf> {
        match &self.operator {
            OperatorSpec::File { path } if path.is_relative() => {
                Some(self.base_dir.as_deref().unwrap_or(Path::new(".")).join(path))
            }
            OperatorSpec::File { path } => Some(path.clone()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Manifest(msg));
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return bad(format!("name {:?} must be nonempty and use [A-Za-z0-9._-]", self.name));
        }
        if self.depth == 0 || self.depth > MAX_DEPTH {
            return bad(format!("depth must lie in 1..={MAX_DEPTH}, got {}", self.depth));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if let Some(p) = self.p.iter().find(|p| !(**p >= 1.0 && p.is_finite())) {
            return bad(format!("exponents must be finite and at least 1, got {p}"));
        }
        if self.levels == 0 || self.levels > self.depth as usize {
            return bad(format!("levels must lie in 1..=depth, got {}", self.levels));
        }
        if self.instances == 0 {
            return bad("instances must be positive".into());
        }
        if self.target_dim == 0 || !(self.target_q >= 1.0 && self.target_q.is_finite()) {
            return bad("target needs a positive dimension and q >= 1".into());
        }
        if self.slices == Some(0) {
            return bad("slices must be positive".into());
        }
        if self.m.iter().any(|&m| m == 0) {
            return bad("step counts m must be positive".into());
        }
        if self.sign_depths.iter().any(|&d| d == 0 || d > 20) {
            return bad("sign depths must lie in 1..=20".into());
        }
        if self.blocks == 0 || self.partitions == 0 {
            return bad("blocks and partitions must be positive".into());
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad(format!("c must be positive, got {}", self.c));
        }
        if self.depth_s == 0 || self.depth_t == 0 || self.depth_s + self.depth_t > MAX_DEPTH {
            return bad("depth_s and depth_t must be positive with sum at most 16".into());
        }
        let b = &self.budget;
        if b.sign_evaluations == 0 || b.restarts == 0 || b.sweeps == 0 {
            return bad("budgets must be positive".into());
        }
        match &self.operator {
            OperatorSpec::Random { scale } if !(*scale >= 0.0 && scale.is_finite()) => {
                bad(format!("operator scale must be finite and nonnegative, got {scale}"))
            }
            OperatorSpec::RankOneSeries { max_terms, scale } if *max_terms == 0 || !(*scale >= 0.0 && scale.is_finite()) => {
                bad("a rank-one series needs max_terms >= 1 and a finite nonnegative scale".into())
            }
            OperatorSpec::Integration { x } if !x.is_empty() && x.len() != self.target_dim => {
                bad(format!("integration vector has length {}, target_dim is {}", x.len(), self.target_dim))
            }
            _ => Ok(()),
        }
    }

    /// First 12 hex digits of the SHA-256 of the canonical JSON form, the
    /// subcommand, and the bytes of any operator file.
    pub fn hash(&self, subcommand: &str) -> Result<String, CliError> {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("manifest serializes"));
        h.update([0]);
        h.update(subcommand.as_bytes());
        if let Some(path) = self.operator_path() {
            let bytes = fs::read(&path).map_err(|e| CliError::Manifest(format!("{}: {e}", path.display())))?;
            h.update([0]);
            h.update(bytes);
        }
        Ok(h.finalize()[..6].iter().map(|b| format!("{b:02x}")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        Manifest::default().validate().unwrap();
    }

    #[test]
    fn toml_fields_and_operator() {
        let m = Manifest::from_toml(
            r#"
            name = "x"
            seed = 7
            p = [1.5, 4.0]
            [operator]
            kind = "integration"
            x = [1.0, 2.0, 0.0, 0.0]
            "#,
        )
        .unwrap();
        assert_eq!(m.seed, 7);
        assert_eq!(m.operator, OperatorSpec::Integration { x: vec![1.0, 2.0, 0.0, 0.0] });
        m.validate().unwrap();
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(Manifest::from_toml("nmae = \"typo\"").is_err());
    }

    #[test]
    fn hash_depends_on_content_and_subcommand() {
        let a = Manifest::default();
        let b = Manifest { seed: 1, ..Manifest::default() };
        assert_eq!(a.hash("tree").unwrap(), a.clone().hash("tree").unwrap());
        assert_ne!(a.hash("tree").unwrap(), b.hash("tree").unwrap());
        assert_ne!(a.hash("tree").unwrap(), a.hash("defect").unwrap());
        assert_eq!(a.hash("tree").unwrap().len(), 12);
    }

    #[test]
    fn validation_catches_bad_values() {
        for m in [
            Manifest { epsilon: 0.0, ..Manifest::default() },
            Manifest { levels: 9, ..Manifest::default() },
            Manifest { p: vec![0.5], ..Manifest::default() },
            Manifest { name: "a/b".into(), ..Manifest::default() },
        ] {
            assert!(matches!(m.validate(), Err(CliError::Manifest(_))));
        }
    }
}
