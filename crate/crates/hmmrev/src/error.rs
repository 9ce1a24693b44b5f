//! Crate-wide error type.

/// Errors produced while building models or evaluating queries.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Candidate generator / transition matrix violates a structural
    /// constraint (row sums, signs, entry ranges).
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    /// The chain fails the three-state irreducibility conditions.
    #[error("chain is not irreducible: {0}")]
    NotIrreducible(String),

    /// Linear solve hit a pivot below the singularity threshold.
    #[error("singular linear system (pivot magnitude {pivot:.3e})")]
    SingularSystem { pivot: f64 },

    /// Emission table violates a probability constraint.
    #[error("invalid emission matrix: {0}")]
    InvalidEmission(String),

    /// Column index outside the symbol alphabet.
    #[error("column index {index} out of range for {len} symbols")]
    IndexOutOfRange { index: usize, len: usize },

    /// Observation symbol outside the symbol alphabet.
    #[error("symbol {symbol} out of range for {len} symbols")]
    SymbolOutOfRange { symbol: usize, len: usize },

    /// Malformed likelihood query (lengths, ordering, non-integer steps
    /// for a discrete-time model, ...).
    #[error("invalid query: {0}")]
    InvalidQuery(String),

    /// Enumeration oracle refused a query that would generate too many
    /// hidden paths.
    #[error("query too long: {len} observation times (limit {limit})")]
    QueryTooLong { len: usize, limit: usize },

    /// Exhaustive scan guard tripped.
    #[error("scan too large: {0}")]
    ScanTooLarge(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidMatrix(_) => "InvalidMatrix",
            Error::NotIrreducible(_) => "NotIrreducible",
            Error::SingularSystem { .. } => "SingularSystem",
            Error::InvalidEmission(_) => "InvalidEmission",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::SymbolOutOfRange { .. } => "SymbolOutOfRange",
            Error::InvalidQuery(_) => "InvalidQuery",
            Error::QueryTooLong { .. } => "QueryTooLong",
            Error::ScanTooLarge(_) => "ScanTooLarge",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
