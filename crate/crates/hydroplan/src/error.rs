//! Crate-wide error type.
//!
//! Every fallible operation in the library returns [`Error`]. The CLI maps
//! variants onto process exit codes: usage problems are caught before any
//! of these are constructed, data and validation failures exit with 2, and
//! numerical failures exit with 3.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// State-space enumeration would exceed the configured bit cap.
    Capacity { bits: usize, max_bits: usize },
    /// A dimension or shape is inconsistent with the problem dimensions.
    Dimension { what: &'static str, detail: String },
    /// A state code is infeasible or absent from the enumerated space.
    StateLookup { code: u64 },
    /// The appendix cross-map only exists for the 2x3 problem.
    AppendixUnsupported { m: usize, n: usize },
    /// An observation record is malformed or out of range.
    Ingestion { record: usize, detail: String },
    /// Unsmoothed estimation hit a row with zero observations.
    UnobservedRow { stage: usize, state_index: usize },
    /// A transition matrix row is missing or not a probability distribution.
    Model { stage: usize, detail: String },
    /// An allocation request violates its contract (support, sign, shape).
    Contract { detail: String },
    /// A parameter lies outside the supported domain.
    Domain { what: &'static str, detail: String },
    /// A file could not be parsed; line numbers are 1-based.
    Parse { path: String, line: usize, detail: String },
    /// Underlying I/O failure.
    Io { path: String, source: std::io::Error },
    /// A computation produced a non-finite value.
    Numerical { detail: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Capacity { bits, max_bits } => write!(
                f,
                "state space of {bits} bits exceeds the {max_bits}-bit enumeration cap"
            ),
            Error::Dimension { what, detail } => write!(f, "bad dimension for {what}: {detail}"),
            Error::StateLookup { code } => {
                write!(f, "code {code} is not a feasible state in this space")
            }
            Error::AppendixUnsupported { m, n } => write!(
                f,
                "appendix cross-map is only defined for 2x3 problems, got {m}x{n}"
            ),
            Error::Ingestion { record, detail } => {
                write!(f, "observation record {record}: {detail}")
            }
            Error::UnobservedRow { stage, state_index } => write!(
                f,
                "state {state_index} was never observed at stage {stage}; \
                 use a positive smoothing strength"
            ),
            Error::Model { stage, detail } => write!(f, "transition model, stage {stage}: {detail}"),
            Error::Contract { detail } => write!(f, "contract violation: {detail}"),
            Error::Domain { what, detail } => write!(f, "{what}: {detail}"),
            Error::Parse { path, line, detail } => write!(f, "{path}:{line}: {detail}"),
            Error::Io { path, source } => write!(f, "{path}: {source}"),
            Error::Numerical { detail } => write!(f, "numerical failure: {detail}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl Error {
    /// True for failures of numerical computation rather than of input data.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical { .. })
    }
}
