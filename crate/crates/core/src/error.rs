use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A linear system that must be solved is singular.
    #[error("non-invertible at this r: {0}")]
    Singular(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Structurally well-formed input whose contents violate an invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Order conditions were evaluated against the wrong kind of method.
    #[error("condition/method mismatch: {0}")]
    Mismatch(String),

    #[error("unsupported order combination: {0}")]
    Unsupported(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonFailure { iterations: usize, residual: f64 },

    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    /// Feasibility was found at some r but not at a smaller one.
    #[error("feasibility is not monotone in r: feasible at {feasible}, infeasible at {infeasible}")]
    NonMonotone { feasible: f64, infeasible: f64 },

    #[error("reference solution failed: {0}")]
    Reference(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation(_)
                | Error::Domain(_)
                | Error::Mismatch(_)
                | Error::Unsupported(_)
        )
    }
}
