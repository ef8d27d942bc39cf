use thiserror::Error;

use crate::numeric::NumericError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Numeric(#[from] NumericError),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// `I − e^{A2(T−d)} e^{A1 d}` cannot be inverted. Usually an integrator
    /// pole; build the model with [`crate::ConverterModel::regularized`].
    #[error(
        "steady state is singular (condition {condition:.3e}); \
         regularize integrator poles with ConverterModel::regularized"
    )]
    SingularSteadyState { condition: f64 },

    #[error("ramp slope {ma} equals the feedback slope C·ẋ(0⁻) = {slope}; switching is degenerate")]
    DegenerateSwitching { ma: f64, slope: f64 },

    #[error("transfer function evaluated on a pole at z = {re} + {im}j")]
    PoleEvaluation { re: f64, im: f64 },

    #[error("lambda = {0} lies on the open-loop spectrum; the S plot has a pole there")]
    ResolventPole(f64),

    #[error("no switching instant found in cycle {cycle} within {horizon:.3e} s")]
    MissedSwitching { cycle: usize, horizon: f64 },

    #[error("loop gain is unbounded for a zero ramp slope; use the L2 plot instead")]
    UnboundedLoopGain,

    #[error("{0}")]
    Usage(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
