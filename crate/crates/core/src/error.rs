use thiserror::Error;

/// Errors surfaced by the numeric core.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// Caller handed over inconsistent or invalid inputs.
    #[error("invalid input: {0}")]
    Input(String),

    /// A covariance factorization failed even after one jitter retry.
    #[error("degenerate covariance at transition {index}: smallest eigenvalue {min_eigenvalue:.3e}")]
    Degenerate { index: usize, min_eigenvalue: f64 },

    /// Hermite ratios are only available up to third order.
    #[error("unsupported derivative order {0} (supported: 1..=3)")]
    UnsupportedOrder(usize),

    /// A correction variant was paired with a model it was not derived for.
    #[error("model `{model}` does not support correction variant {variant:?}")]
    UnsupportedVariant { model: String, variant: String },

    /// Path simulation diverged on too many paths.
    #[error("{excluded} of {total} simulated paths diverged (limit {limit})")]
    Diverged {
        excluded: usize,
        total: usize,
        limit: usize,
    },

    /// Optimizer could not make progress.
    #[error("fit failed: {0}")]
    Fit(String),

    /// Sampler could not find a finite starting point.
    #[error("sampler start-up failed: {0}")]
    Startup(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
