use crate::params::Regime;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The requested construction is only defined in a different existence
    /// regime (e.g. solving for the unique radial solution at a
    /// critical-or-subcritical exponent).
    #[error("regime {found:?} does not admit this operation: {detail}")]
    Regime { found: Regime, detail: String },

    /// An interior shot reached the horizon without crossing zero. For a
    /// supercritical construction this signals inconsistent parameters or an
    /// insufficient integration horizon.
    #[error("trajectory reached the horizon r = {horizon} without a zero crossing")]
    NoCrossing { horizon: f64 },

    #[error("step budget of {0} steps exhausted")]
    StepBudgetExhausted(usize),

    /// The flux r^(N'-1) w' increased along a positive trajectory, which the
    /// divergence form forbids. Indicates a corrupted state or a bug.
    #[error("flux monotonicity violated near r = {0:.6e}")]
    FluxMonotonicity(f64),

    #[error("nonlinearity evaluation failed at t = {0:.6e}")]
    EvalFailure(f64),

    #[error("requested range [{lo}, {hi}] is not covered by the profile grid")]
    RangeOutsideProfile { lo: f64, hi: f64 },

    #[error("mesh places nodes where coefficient weights are not finite")]
    NonPositiveWeight,

    #[error("verification failure: {0}")]
    VerificationFailed(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
