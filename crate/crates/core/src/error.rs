//! Error types shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Basis dimension d must be at least 1.
    #[error("invalid dimension: d must be >= 1 (got {0})")]
    InvalidDimension(usize),

    /// Basis degree exceeds the 8-bit exponent storage.
    #[error("degree {0} exceeds the supported maximum of 255")]
    DegreeTooLarge(usize),

    /// binomial(d+n, n) does not fit in the platform integer range.
    #[error("basis size overflow for d={d}, n={n}")]
    BasisSizeOverflow { d: usize, n: usize },

    /// A vector or matrix had the wrong dimensions.
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    /// An update batch must contain at least one row.
    #[error("empty batch: a rank-k update needs k >= 1 rows")]
    EmptyBatch,

    /// The empirical moment matrix is singular: N samples cannot support an
    /// s-dimensional basis without regularization.
    #[error("rank deficiency: N={n} samples <= basis size s={s} and lambda=0")]
    RankDeficient { n: u64, s: usize },

    /// Cholesky factorization hit a non-positive pivot.
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    /// A Sherman-Morrison denominator vanished.
    #[error("singular rank-1 update at step {step}: |denominator| <= 1e-12")]
    SingularUpdate { step: usize },

    /// Direct inversion requested but the state does not retain the matrix.
    #[error("missing matrix: direct inversion requires a state fitted with track_matrix")]
    MissingMatrix,

    /// Operation on a state with no samples.
    #[error("empty state: no samples fitted")]
    EmptyState,

    /// Scoring requires a state fitted from points through a monomial basis.
    #[error("missing basis: state was fitted from raw design rows")]
    MissingBasis,

    /// Eigenvalue computation produced non-finite values or failed to converge.
    #[error("conditioning failure: {0}")]
    ConditioningFailure(String),

    /// Malformed configuration or input data.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
