use thiserror::Error;

/// Errors raised by the model library.
///
/// Variants split into two families: validation problems (bad parameters,
/// malformed inputs) and numerical failures (non-convergence, loss of
/// positivity). [`Error::is_numerical`] tells them apart, which is what the
/// CLI uses to choose its exit status.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("field length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("field has non-finite or negative value {value} at node {node}")]
    InvalidField { node: usize, value: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("wage fixed point did not converge within {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("population became negative at node {node} (value {value:e}) during step {step}; retry with a smaller dt")]
    NegativePopulation { step: usize, node: usize, value: f64 },

    #[error("mobile mass drifted by {drift:e} (relative) at step {step}")]
    MassDrift { step: usize, drift: f64 },

    #[error("no sign change of Gamma_{k} on tau in [{lo}, {hi}] (Gamma = {gamma_lo:e}, {gamma_hi:e})")]
    NoBracket {
        k: i64,
        lo: f64,
        hi: f64,
        gamma_lo: f64,
        gamma_hi: f64,
    },

    #[error("mode {k} amplitude underflowed below 1e-14 after {samples} samples")]
    AmplitudeUnderflow { k: i64, samples: usize },

    #[error("{failed} of {total} sweep rows failed")]
    SweepRowsFailed { failed: usize, total: usize },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::NegativePopulation { .. }
                | Error::MassDrift { .. }
                | Error::NoBracket { .. }
                | Error::AmplitudeUnderflow { .. }
                | Error::SweepRowsFailed { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
