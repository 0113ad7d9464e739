//! Crate-wide error type.
//!
//! Every fallible operation returns [`Result`]. Variants are grouped by
//! failure class so callers (notably the CLI) can map them to stable,
//! machine-readable codes without string matching.

use thiserror::Error;

/// Alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Mismatched lengths between paired inputs (grids vs masses, rows vs
    /// labels, and so on).
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: String,
        expected: usize,
        got: usize,
    },

    /// Structurally invalid input: unsorted grids, negative masses,
    /// parameters outside their admissible range.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// An update produced zero total mass (the signal has zero likelihood
    /// under every prior state).
    #[error("degenerate evidence: {0}")]
    DegenerateEvidence(String),

    /// A value left the domain where an operation is defined (link
    /// inversion outside its range, logarithm of a non-positive value).
    #[error("domain error: {0}")]
    Domain(String),

    /// The regressor matrix is numerically rank deficient.
    #[error("rank-deficient design: dependent columns {dropped:?}")]
    RankDeficient { dropped: Vec<String> },

    /// The instruments carry no variation for the endogenous column.
    #[error("zero first stage: {0}")]
    ZeroFirstStage(String),

    /// Weight computation hit a zero or sign-degenerate normalizer.
    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    /// A CSV or config file does not match the documented schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// A failure attributable to one agent, tagged with its id.
    #[error("agent {id}: {source}")]
    Agent {
        id: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Wraps an error with the id of the agent it occurred for.
    pub fn for_agent(id: usize, source: Error) -> Self {
        Error::Agent {
            id,
            source: Box::new(source),
        }
    }

    /// Convenience constructor for [`Error::Dimension`].
    pub fn dimension(what: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::Dimension {
            what: what.into(),
            expected,
            got,
        }
    }
}
