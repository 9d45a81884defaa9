//! Batch runner for the narrowops experiments: TOML manifests in, one
//! directory of CSV tables plus a JSON summary with certificates out.

use std::path::Path;

use thiserror::Error;

pub mod experiments;
pub mod manifest;
pub mod report;
pub mod run;
pub mod verify;

pub use experiments::Experiment;
pub use manifest::{Budget, Manifest, OperatorSpec};
pub use report::{Format, Summary, Table};
pub use run::{run, RunOptions, RunOutcome};
pub use verify::{verify_run, Check, VerifyReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_CERTIFICATE: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("manifest: {0}")]
    Manifest(String),

    #[error("{0}")]
    Core(#[from] narrowops::Error),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("corrupted record: {0}")]
    Corrupt(String),
}

impl CliError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        use narrowops::Error as E;
        match self {
            CliError::Core(E::ToleranceUnachievable { .. } | E::ClaimRejected { .. }) => EXIT_INFEASIBLE,
            CliError::Core(E::Certificate { .. }) | CliError::Corrupt(_) => EXIT_CERTIFICATE,
            _ => EXIT_VALIDATION,
        }
    }

    /// Short machine-readable class of the error.
    pub fn kind(&self) -> &'static str {
        use narrowops::Error as E;
        match self {
            CliError::Manifest(_) => "manifest",
            CliError::Io { .. } => "io",
            CliError::Corrupt(_) => "corrupt_record",
            CliError::Core(E::InvalidInput(_) | E::SpaceMismatch(_)) => "invalid_input",
            CliError::Core(E::Infeasible(_)) => "infeasible_input",
            CliError::Core(E::ToleranceUnachievable { .. }) => "tolerance_unachievable",
            CliError::Core(E::ClaimRejected { .. }) => "claim_rejected",
            CliError::Core(E::Certificate { .. }) => "certificate",
        }
    }

    /// One-line JSON diagnostic for stderr.
    pub fn diagnostic(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "status": "error",
            "exit_code": self.exit_code(),
            "kind": self.kind(),
            "message": self.to_string(),
        });
        match self {
            CliError::Core(narrowops::Error::ToleranceUnachievable { node, achieved, required }) => {
                v["node"] = node.to_string().into();
                v["achieved"] = (*achieved).into();
                v["required"] = (*required).into();
            }
            CliError::Core(narrowops::Error::Certificate { name, .. }) => v["certificate"] = name.clone().into(),
            CliError::Core(narrowops::Error::ClaimRejected { witness, .. }) => v["witness"] = witness.clone().into(),
            _ => {}
        }
        v
    }
}
