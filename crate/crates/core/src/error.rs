use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("quadrature failed to converge: best estimate {estimate:e} with error {abs_error:e} after {evaluations} evaluations")]
    QuadratureFailed {
        estimate: f64,
        abs_error: f64,
        evaluations: usize,
    },

    #[error("integrand returned a non-finite value at x = {x:e}")]
    NonFiniteIntegrand { x: f64 },

    #[error("function returned a non-finite value at x = {x:e}")]
    NonFiniteValue { x: f64 },

    #[error("invalid {name}: {reason}")]
    InvalidInput { name: &'static str, reason: String },

    #[error("unknown test function descriptor `{0}`")]
    UnknownTestFunction(String),

    #[error("derivative order {requested} exceeds supported order {available}")]
    OrderTooHigh { requested: usize, available: usize },

    #[error("missing sup-norm for derivative order {0}")]
    MissingNorm(usize),

    #[error("enumeration would visit {outcomes} outcomes, exceeding the budget of {budget}; use Monte Carlo mode instead")]
    EnumerationBudget { outcomes: u128, budget: u128 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("probabilities must sum to 1 (got {sum})")]
    ProbabilitySum { sum: f64 },

    #[error("constraint violated: |sum_j sqrt(p_j) s_j| = {deviation:e} exceeds 1e-12")]
    ConstraintViolated { deviation: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            name,
            reason: reason.into(),
        }
    }
}
