use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("probability {value} outside {expected}")]
    InvalidProbability { value: f64, expected: &'static str },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("integral diverges over the requested window: {0}")]
    NonIntegrableTail(String),

    #[error("interval set has zero total length")]
    EmptyIntervalSet,

    #[error("non-finite quantile at t = {0}")]
    NonFiniteQuantile(f64),

    #[error("constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("infeasible simplex constraint: {0}")]
    InfeasibleConstraint(String),

    #[error("optimizer failed: {reason} (best value {best})")]
    OptimizerFailure { reason: String, best: f64 },

    #[error("condition not met: {condition} (required {required}, got {actual})")]
    ConditionNotMet {
        condition: String,
        required: f64,
        actual: f64,
    },

    #[error("instance too large: {0}")]
    InstanceTooLarge(String),

    #[error("mass {mass} times m = {m} is not an integer")]
    NonIntegralMass { mass: f64, m: usize },

    #[error("threshold parameter {value} below the admissible minimum {minimum}")]
    InvalidT { value: f64, minimum: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

impl Error {
    /// Stable machine-readable code used in CLI result documents.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidProbability { .. } => "invalid_probability",
            Error::InvalidParams(_) => "invalid_params",
            Error::NonIntegrableTail(_) => "non_integrable_tail",
            Error::EmptyIntervalSet => "empty_interval_set",
            Error::NonFiniteQuantile(_) => "non_finite_quantile",
            Error::ConstraintViolation(_) => "constraint_violation",
            Error::InfeasibleConstraint(_) => "infeasible_constraint",
            Error::OptimizerFailure { .. } => "optimizer_failure",
            Error::ConditionNotMet { .. } => "condition_not_met",
            Error::InstanceTooLarge(_) => "instance_too_large",
            Error::NonIntegralMass { .. } => "non_integral_mass",
            Error::InvalidT { .. } => "invalid_t",
            Error::ShapeMismatch(_) => "shape_mismatch",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_prob(value: f64, lo_open: bool, hi_open: bool, expected: &'static str) -> Result<()> {
    let ok = value.is_finite()
        && if lo_open { value > 0.0 } else { value >= 0.0 }
        && if hi_open { value < 1.0 } else { value <= 1.0 };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidProbability { value, expected })
    }
}
