use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    Invalid { name: &'static str, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("envelope is empty")]
    EmptyEnvelope,

    #[error("frequency {freq} Hz is outside the representable band (|f| < {nyquist} Hz)")]
    FrequencyOutOfRange { freq: f64, nyquist: f64 },

    #[error("probe at {freq} Hz spans {periods} periods over the record; an integer is required")]
    NonIntegerPeriods { freq: f64, periods: f64 },

    #[error("expected envelope centered at {expected} Hz, got {actual} Hz")]
    CenterMismatch { expected: f64, actual: f64 },

    #[error("singular system: {0}")]
    Singular(&'static str),

    #[error("phase unwrap is ambiguous at point {index}: step of {step} rad; scan is too coarse")]
    UnwrapAmbiguity { index: usize, step: f64 },

    #[error("drive phases do not form a uniform grid over [0, 2pi)")]
    NonUniformGrid,

    #[error("bias {volts} V is outside the +/-{limit} V supply range")]
    BiasOutOfRange { volts: f64, limit: f64 },

    #[error("fit did not converge: {0}")]
    NoConvergence(String),
}

pub(crate) fn invalid<T>(name: &'static str, reason: impl Into<String>) -> Result<T> {
    Err(Error::Invalid {
        name,
        reason: reason.into(),
    })
}
