use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input violates a documented precondition.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no bistability: the optomechanical nonlinearity is zero")]
    NeverBistable,

    #[error("spectrum undefined for unstable state (max Re λ = {margin:e} rad/s)")]
    UnstableState { margin: f64 },

    #[error("transfer matrix singular at ω = {omega:e} rad/s")]
    SingularTransfer { omega: f64 },

    #[error("time step too large: dt·rate = {product:.3} exceeds {limit}")]
    StepTooLarge { product: f64, limit: f64 },

    #[error("integration diverged at step {step} (|state| = {magnitude:e})")]
    Diverged { step: usize, magnitude: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("trajectory too short: {available} samples, need at least {required}")]
    TooShort { available: usize, required: usize },

    #[error("Hilbert space dimension {dimension} exceeds cap {cap}")]
    DimensionCap { dimension: usize, cap: usize },

    #[error("insufficient Fermi-sea headroom: {0}")]
    Headroom(String),

    #[error("eigensolver did not converge (residual {residual:e})")]
    NotConverged { residual: f64 },

    #[error("numerical verification failed: {0}")]
    Verification(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// True for errors caused by bad input rather than by numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. } | Error::DimensionCap { .. } | Error::Headroom(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
