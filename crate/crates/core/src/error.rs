use thiserror::Error;

use crate::eigen::EigenResult;

/// Failures raised by the toolkit. Every variant names the operation
/// (`module::operation`) that produced it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: {msg}")]
    InvalidArgument { op: &'static str, msg: String },

    #[error("{op}: argument does not belong to this mesh")]
    MeshMismatch { op: &'static str },

    #[error("{op}: non-finite value at x = {x:?}, s = {s}")]
    NonFinite {
        op: &'static str,
        x: Vec<f64>,
        s: f64,
    },

    #[error("{op}: adaptive quadrature did not converge (estimate {estimate}, error {error})")]
    Quadrature {
        op: &'static str,
        estimate: f64,
        error: f64,
    },

    #[error("{op}: matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite {
        op: &'static str,
        row: usize,
        pivot: f64,
    },

    #[error(
        "eigen::first_eigenpair: no convergence after {} iterations (residual {:e})",
        .0.iterations,
        .0.residual
    )]
    EigenNotConverged(Box<EigenResult>),

    #[error("solver::minimize_phi: functional appears unbounded below (coercivity violated); Phi = {value:e}")]
    Unbounded { value: f64 },

    #[error("{op}: divergent integral of the potential")]
    Divergent { op: &'static str },

    #[error("cli::parse_config: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("cli::run: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(op: &'static str, msg: impl Into<String>) -> Error {
    Error::InvalidArgument {
        op,
        msg: msg.into(),
    }
}
