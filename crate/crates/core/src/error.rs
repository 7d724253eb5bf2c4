use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A moment vector lies outside the set of realizable expectations.
    #[error("moment-domain error (outside realizable set): {0}")]
    MomentDomain(String),
    /// A numerical procedure failed (singular matrix, non-convergence, ...).
    #[error("numeric error: {0}")]
    Numeric(String),
    /// Quadrature did not reach tolerance; carries the last two log estimates.
    #[error("quadrature did not converge: last log estimates {previous} and {last}")]
    QuadratureNonConvergence { previous: f64, last: f64 },
    /// Mismatched shapes, families or otherwise invalid arguments.
    #[error("contract error: {0}")]
    Contract(String),
    /// A fragment update failed while running the EP loop.
    #[error("update of factor {factor} `{name}` ({kind}) failed in iteration {iteration}: {source}")]
    Update {
        factor: usize,
        name: String,
        kind: String,
        iteration: usize,
        source: Box<Error>,
    },
    /// Some posteriors were improper when the iteration converged.
    #[error("improper posterior at convergence for node(s): {}", .0.join(", "))]
    ImproperPosterior(Vec<String>),
}

pub type Result<T> = std::result::Result<T, Error>;
