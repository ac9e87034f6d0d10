use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("step size {dt} ns too coarse: must be at most {max_dt} ns (try dt = {suggested} ns)")]
    StepTooCoarse { dt: f64, max_dt: f64, suggested: f64 },

    #[error("grid too coarse: {reason}")]
    GridTooCoarse { reason: String },

    #[error("lag range too large: {max_lag} ns requested, at most {limit} ns allowed")]
    LagRange { max_lag: f64, limit: f64 },

    #[error("quadrature did not converge: {reason}")]
    Quadrature { reason: String },

    #[error("fit did not converge after {iterations} iterations (rms residual {rms_residual:e}): {reason}")]
    FitNoConvergence {
        iterations: usize,
        rms_residual: f64,
        reason: String,
    },

    #[error("channel {0} has no tags")]
    EmptyChannel(u8),

    #[error("unknown parameter set `{0}`")]
    UnknownParameterSet(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

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

    /// True for failures of numerical guards (step size, grids, convergence),
    /// as opposed to malformed inputs.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::StepTooCoarse { .. }
                | Error::GridTooCoarse { .. }
                | Error::LagRange { .. }
                | Error::Quadrature { .. }
                | Error::FitNoConvergence { .. }
        )
    }
}
