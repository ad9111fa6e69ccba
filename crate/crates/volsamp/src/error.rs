//! Crate-wide error type.
//!
//! Every fallible operation in the library returns [`Result`]. Variants are
//! grouped by the subsystem that raises them; the CLI maps them onto exit
//! codes (input problems vs. sampler failures), so parse/shape errors are
//! kept distinct from numerical and convergence errors.

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// The design matrix is numerically rank deficient: its smallest singular
    /// value is below `rank_tol` times the largest.
    #[error("matrix is rank deficient (smallest/largest singular value = {ratio:.3e}); {hint}")]
    RankDeficient { ratio: f64, hint: &'static str },

    /// A row of the design matrix is identically zero.
    #[error("row {row} of the design matrix is all zeros; drop zero rows before sampling")]
    ZeroRow { row: usize },

    /// A matrix that must be symmetric is not, beyond tolerance.
    #[error("matrix is not symmetric (max |a_ij - a_ji| = {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    /// A row index fell outside `[0, rows)`.
    #[error("row index {index} out of range for a matrix with {rows} rows")]
    IndexOutOfRange { index: usize, rows: usize },

    /// A requested sample size is incompatible with the instance.
    #[error("invalid sample size: {reason}")]
    InvalidSize { reason: String },

    /// Rescaling weights failed validation (non-positive or not normalized).
    #[error("invalid rescaling distribution: {reason}")]
    InvalidDistribution { reason: String },

    /// An enumeration would exceed the configured support cap.
    #[error("enumeration support of {support} sequences exceeds the cap of {cap}")]
    TooLarge { support: u128, cap: u128 },

    /// A rejection loop exceeded its trial budget. With correct inputs the
    /// per-trial acceptance probability is bounded below, so hitting the
    /// budget indicates a bug rather than bad luck.
    #[error("rejection sampling did not accept within {trials} trials")]
    NonConvergence { trials: usize },

    /// A randomized sketch failed its spectral containment check.
    #[error(
        "sketched Gram matrix violates (1±{epsilon}) spectral containment \
         (observed eigenvalue range [{observed_min:.6}, {observed_max:.6}])"
    )]
    SketchFailure {
        epsilon: f64,
        observed_min: f64,
        observed_max: f64,
    },

    /// The accuracy parameter of the sketched sampler is outside the range
    /// where the determinantal acceptance ratio stays below one.
    #[error("epsilon {epsilon} is outside [0, {limit:.6}], the usable range at this dimension")]
    InvalidEpsilon { epsilon: f64, limit: f64 },

    /// A value that must be finite is NaN or infinite.
    #[error("non-finite value: {context}")]
    NonFinite { context: String },

    /// Mismatched dimensions between inputs.
    #[error("shape mismatch: {reason}")]
    ShapeMismatch { reason: String },

    /// The optimum loss is zero, so relative loss ratios are undefined.
    #[error("optimum loss is zero; loss ratios are undefined for this problem")]
    DegenerateLoss,

    /// A dataset file could not be parsed.
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    /// A dataset contained no usable rows.
    #[error("dataset is empty after preprocessing")]
    EmptyDataset,

    /// Monomial expansion would exceed the configured feature cap.
    #[error("monomial expansion of {features} features exceeds cap ({cap})")]
    ExpansionTooLarge { features: usize, cap: usize },

    /// An experiment configuration is inconsistent.
    #[error("invalid experiment config: {reason}")]
    InvalidConfig { reason: String },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
