//! Crate-wide error type.

/// Errors produced by the statistics kernels, the analyzers, and the I/O
/// layer. Numeric routines never return NaN to signal failure; they return
/// one of these instead.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs are formally in-domain but degenerate (for example a zero
    /// pooled variance, which leaves a t-statistic undefined).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A series or iteration failed to converge within its term budget.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// A finite result would overflow f64 range; callers wanting the value
    /// should use the log-space variant of the operation.
    #[error("overflow: {0} (use the log-space variant)")]
    Overflow(String),

    /// The design search hit its cap before the threshold became reachable.
    #[error("threshold 1/alpha not reachable within cap n = {cap}")]
    NotReachable { cap: u64 },

    /// Structurally invalid input (mismatched lengths, empty slices, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A record failed validation; `row` is the 1-based data row number.
    #[error("validation error at row {row}: {msg}")]
    Validation { row: u64, msg: String },

    /// Persisted state carries an unsupported schema version.
    #[error("state schema version mismatch: expected {expected}, found {found}")]
    SchemaVersion { expected: u32, found: u32 },

    /// Configuration file or value could not be interpreted.
    #[error("config error: {0}")]
    Config(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
