use thiserror::Error;

use crate::haar::MultiIndex;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("function or operator lives on a different space: {0}")]
    SpaceMismatch(String),

    /// A node of a tree construction could not meet its tolerance.
    #[error("tolerance unachievable at node {node}: achieved {achieved:e}, required {required:e}")]
    ToleranceUnachievable {
        node: MultiIndex,
        achieved: f64,
        required: f64,
    },

    /// An internal certificate failed its recheck.
    #[error("certificate violated ({name}): {detail}")]
    Certificate { name: String, detail: String },

    /// A caller-supplied claim was refuted by an explicit witness.
    #[error("claim rejected: {claim}")]
    ClaimRejected { claim: String, witness: Vec<f64> },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn infeasible(msg: impl Into<String>) -> Self {
        Error::Infeasible(msg.into())
    }

    pub fn certificate(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Certificate {
            name: name.into(),
            detail: detail.into(),
        }
    }
}
