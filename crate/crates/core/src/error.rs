use thiserror::Error;

use crate::timeseries::MonthIndex;

/// Errors produced by the estimation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A time-step index fell outside a series.
    #[error("index {index} out of range for series of length {len}")]
    Range { index: usize, len: usize },

    /// Malformed input text. Lines are 1-based.
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },

    /// Months in an input file are not contiguous.
    #[error("line {line}: expected month {expected}, found {found}")]
    Gap {
        line: usize,
        expected: MonthIndex,
        found: MonthIndex,
    },

    /// A value violates its domain (negative uptake, NaN, out-of-scale frequency).
    #[error("{0}")]
    Value(String),

    /// Two series cannot be placed on a common month range.
    #[error("{0}")]
    Alignment(String),

    /// A configuration or argument violates its contract.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Not enough observed history for the requested step.
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    /// Mismatched lengths or out-of-range feature indices.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Streaming calls made out of order.
    #[error("protocol violation: {0}")]
    Protocol(String),

    /// A run failed for a particular series and method.
    #[error("series `{series}`, method `{method}`: {source}")]
    Run {
        series: String,
        method: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for errors caused by the input data rather than by configuration
    /// or call order.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Range { .. }
            | Error::Format { .. }
            | Error::Gap { .. }
            | Error::Value(_)
            | Error::Alignment(_)
            | Error::InsufficientHistory(_) => true,
            Error::Run { source, .. } => source.is_data_error(),
            Error::Parameter(_) | Error::Shape(_) | Error::Protocol(_) => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
