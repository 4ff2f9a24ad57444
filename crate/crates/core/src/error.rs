use thiserror::Error;

#[derive(Debug, Error)]
pub enum HedgeError {
    #[error("dimension mismatch: expected {expected} values, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid discrete space: {0}")]
    InvalidSpace(String),

    #[error("invalid conditional test: {0}")]
    InvalidTest(String),

    #[error("shortfall constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("infeasible budget {budget}: the floor alone costs {minimum}")]
    InfeasibleBudget { budget: f64, minimum: f64 },

    #[error("capital {capital} outside the feasible range [{lower}, {upper})")]
    CapitalRange { capital: f64, lower: f64, upper: f64 },

    #[error("model parameters outside the solver regime: {0}")]
    Regime(String),

    #[error("unsupported criterion: {0}")]
    UnsupportedCriterion(String),

    #[error("payoff has no segment covering price {0}")]
    Coverage(f64),

    #[error("truncation at n_max = {n_max} leaves tail mass {tail:e}")]
    TailMass { n_max: usize, tail: f64 },

    #[error("root bracketing failed: {0}")]
    Bracketing(String),

    #[error("root finder did not converge: {0}")]
    NoConvergence(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HedgeError {
    /// True for failures of the numerics (root finding, truncation) or I/O,
    /// as opposed to inputs that violate a precondition.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            HedgeError::Bracketing(_)
                | HedgeError::NoConvergence(_)
                | HedgeError::TailMass { .. }
                | HedgeError::Coverage(_)
                | HedgeError::Io(_)
        )
    }
}

impl From<csv::Error> for HedgeError {
    fn from(err: csv::Error) -> Self {
        if err.is_io_error() {
            match err.into_kind() {
                csv::ErrorKind::Io(io) => HedgeError::Io(io),
                other => HedgeError::Parse(format!("{other:?}")),
            }
        } else {
            HedgeError::Parse(err.to_string())
        }
    }
}

pub type Result<T> = std::result::Result<T, HedgeError>;
