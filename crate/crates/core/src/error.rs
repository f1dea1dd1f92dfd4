use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the library. Validation failures (bad inputs) and
/// computation failures (solver breakdowns) are distinguished by
/// [`Error::is_validation`], which the CLI maps to exit codes 1 and 2.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("entries sum to {sum}; expected a normalized distribution")]
    NotNormalized { sum: f64 },

    #[error("tensor power would materialize {entries} entries (limit {limit})")]
    SizeOverflow { entries: u128, limit: u64 },

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("not a probability vector: {context}")]
    NotADistribution { context: String },

    #[error("channel row {row} sums to {sum}; rows must sum to 1")]
    NotStochastic { row: usize, sum: f64 },

    #[error("eigensolver did not converge within {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize },

    #[error("every perfect matching has weight -inf")]
    Infeasible,

    #[error("exhaustive enumeration too large: {context}")]
    TooLarge { context: String },

    #[error("eps1 = 0 makes the second-moment ratio undefined")]
    DegenerateEps,
}

impl Error {
    /// True for errors caused by invalid input rather than a failed
    /// computation on valid input.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::EigenNoConvergence { .. } | Error::Infeasible
        )
    }

    /// Stable machine-readable code, used in CLI diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NegativeEntry { .. } => "NegativeEntry",
            Error::NotNormalized { .. } => "NotNormalized",
            Error::SizeOverflow { .. } => "SizeOverflow",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NotADistribution { .. } => "NotADistribution",
            Error::NotStochastic { .. } => "NotStochastic",
            Error::EigenNoConvergence { .. } => "EigenNoConvergence",
            Error::Infeasible => "Infeasible",
            Error::TooLarge { .. } => "TooLarge",
            Error::DegenerateEps => "DegenerateEps",
        }
    }
}
