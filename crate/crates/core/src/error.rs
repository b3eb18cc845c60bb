use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A value that must be finite (input, parameter, loss, ...) was not.
    #[error("non-finite value in {context}{}", fmt_index(.index))]
    NonFinite {
        context: &'static str,
        index: Option<usize>,
    },

    /// Invalid configuration (widths, thresholds, set sizes, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// An optimizer received a non-finite gradient or loss.
    #[error("optimizer error at step {step}: {message}")]
    Optimizer { step: u64, message: String },

    /// A reference oracle failed to converge or produce a usable solution.
    #[error("oracle error: {0}")]
    Oracle(String),

    /// The relative-error metric is undefined (zero reference norm).
    #[error("relative error undefined: reference grid has zero norm")]
    UndefinedMetric,

    /// Grid shapes do not match.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed snapshot or grid file.
    #[error("format error: {0}")]
    Format(String),
}

fn fmt_index(index: &Option<usize>) -> String {
    match index {
        Some(i) => format!(" (batch index {i})"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
