//! Structured errors shared across the workbench.
//!
//! Search-style operations never fail opaquely: budget errors carry the best
//! certified bound found before the cap was hit, and gate refusals report
//! both the requirement and the configured cap.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A point or label fell outside the domain/label space it was used with.
    DomainMismatch(String),
    /// Malformed argument (empty sample, k >= label count, l > n, ...).
    InvalidArgument(String),
    /// An enumeration or search exceeded its configured cap. For dimension
    /// searches `certified_lower_bound` is the largest value already verified.
    Budget {
        what: String,
        limit: u64,
        certified_lower_bound: Option<u64>,
    },
    /// Text input rejected; positions are 1-based.
    Parse { line: usize, col: usize, msg: String },
    /// Vertices handed to a chain operation are not totally ordered.
    Chain(String),
    /// Test point does not share a realizing branch with the sample.
    Compatibility(String),
    /// Feedback emptied a version space / sequence not realizable.
    Realizability(String),
    /// A stated precondition does not hold (insufficient depth, gap too small, ...).
    Precondition(String),
    /// Online protocol violation (label outside the agreed label set).
    Protocol(String),
    /// Desk-scale gate refusal: the worst-case requirement exceeds the cap.
    /// Both are reported as decimal strings since requirements can be huge.
    Gate { required: String, cap: String },
    /// Threshold-family extraction found no usable jump.
    Extraction { max_jump: f64, threshold: f64 },
    /// A threshold family violates its defining property.
    Family(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DomainMismatch(m) => write!(f, "domain mismatch: {m}"),
            Error::InvalidArgument(m) => write!(f, "invalid argument: {m}"),
            Error::Budget { what, limit, certified_lower_bound } => {
                write!(f, "budget exceeded: {what} (limit {limit}")?;
                if let Some(lb) = certified_lower_bound {
                    write!(f, ", certified lower bound {lb}")?;
                }
                write!(f, ")")
            }
            Error::Parse { line, col, msg } => {
                write!(f, "parse error at line {line}, column {col}: {msg}")
            }
            Error::Chain(m) => write!(f, "chain error: {m}"),
            Error::Compatibility(m) => write!(f, "compatibility error: {m}"),
            Error::Realizability(m) => write!(f, "realizability error: {m}"),
            Error::Precondition(m) => write!(f, "precondition error: {m}"),
            Error::Protocol(m) => write!(f, "protocol error: {m}"),
            Error::Gate { required, cap } => {
                write!(f, "gate refusal: requires depth {required}, cap is {cap}")
            }
            Error::Extraction { max_jump, threshold } => write!(
                f,
                "extraction error: no jump >= {threshold} found (max observed {max_jump})"
            ),
            Error::Family(m) => write!(f, "family error: {m}"),
        }
    }
}

impl std::error::Error for Error {}
