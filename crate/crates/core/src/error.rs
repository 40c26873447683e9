use thiserror::Error;

/// Errors raised by the code-length, clustering and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a function (e.g. `ln Γ(a)` with `a <= 0`).
    #[error("domain error: {0}")]
    Domain(String),

    /// The maximum-likelihood estimate falls outside the restricted data domain,
    /// where the restricted NML density is zero.
    #[error("out of domain: {0}")]
    OutOfDomain(String),

    /// A covariance estimate is singular or numerically rank-deficient.
    #[error("singular covariance: {0}")]
    Singular(String),

    /// A domain parameter estimate vanishes (zero mean vector).
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    /// Not enough data for the requested model size.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Malformed caller input (bad labels, mismatched shapes, empty data).
    #[error("invalid input: {0}")]
    Input(String),

    /// Invalid configuration values.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        match err.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Parse(format!("{other:?}")),
        }
    }
}
