use thiserror::Error;

/// Errors raised by the quadrature and joint-distribution pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed or invalid data (non-finite values, negative weights, bad files).
    #[error("invalid input: {0}")]
    Input(String),

    /// Inconsistent or unusable configuration (order, basis size, law parameters).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A requested process column is absent from the data.
    #[error("process `{0}` is not present in the sample set")]
    MissingProcess(&'static str),

    /// A product or moment index outside the available degree range.
    #[error("degree out of range: {0}")]
    Range(String),

    /// The Gram matrix cannot support the requested order.
    #[error(
        "Gram matrix is numerically rank-deficient: effective rank {effective_rank} < order {order} \
         (epsilon = {epsilon:e})"
    )]
    Conditioning {
        effective_rank: usize,
        order: usize,
        epsilon: f64,
    },

    /// Matrices or quadratures whose shapes or bases do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An estimator evaluated on inputs with zero total weight.
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
