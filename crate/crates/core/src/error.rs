use thiserror::Error;

/// Everything that can go wrong in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature did not converge: estimated error {achieved:.3e} exceeds requested {requested:.3e}")]
    QuadratureNotConverged { achieved: f64, requested: f64 },

    #[error("integrand returned a non-finite value at x = {x}")]
    NonFiniteIntegrand { x: f64 },

    #[error("degenerate sampling window: {0}")]
    DegenerateWindow(String),

    #[error("base station placement gave up after {budget} rejection draws")]
    RetryBudgetExceeded { budget: u64 },

    #[error("no candidate relay: the idle-user set is empty")]
    NoCandidateRelay,

    #[error("interference mean diverges: path-loss exponent {alpha} must exceed 2")]
    DivergentMean { alpha: f64 },

    #[error("relay at {d} m from the base station is not strictly inside the cell of radius {rc} m")]
    RelayOutsideCell { d: f64, rc: f64 },

    #[error("Laplace argument must be nonnegative, got {0}")]
    NegativeLaplaceArgument(f64),

    #[error("interference-plus-noise power at the {0} is zero")]
    ZeroNoiseFloor(&'static str),

    #[error("unknown experiment `{id}`; registered experiments: {known}")]
    UnknownExperiment { id: String, known: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Rejects NaN and infinities.
pub(crate) fn require_finite(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(name, format!("must be finite, got {v}")))
    }
}

pub(crate) fn require_positive(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(name, format!("must be positive and finite, got {v}")))
    }
}

pub(crate) fn require_nonnegative(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(invalid(name, format!("must be nonnegative and finite, got {v}")))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
