use thiserror::Error;

/// Errors raised by model construction, sampling, solving and the experiment runner.
#[derive(Debug, Error)]
pub enum LevyError {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("time {t} outside the path domain [0, {t_end}]")]
    Domain { t: f64, t_end: f64 },

    #[error("Picard iteration did not converge after {iterations} iterations (defect {defect:e}, tol {tol:e})")]
    Convergence {
        iterations: usize,
        defect: f64,
        tol: f64,
        best: Box<Vec<Vec<f64>>>,
    },

    #[error("non-finite value encountered: {0}")]
    Numeric(String),

    #[error("grid too coarse or narrow: {reason}; suggested half-width {suggested_half_width}")]
    Resolution {
        reason: String,
        suggested_half_width: f64,
    },

    #[error("horizon {horizon} leaves discounted tail {tail:e} above tolerance {tail_tol:e}")]
    Horizon {
        horizon: f64,
        tail: f64,
        tail_tol: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("archive format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LevyError>;

pub(crate) fn param_err(name: &'static str, reason: impl Into<String>) -> LevyError {
    LevyError::Parameter {
        name,
        reason: reason.into(),
    }
}
