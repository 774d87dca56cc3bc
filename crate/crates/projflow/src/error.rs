//! One error type for the whole crate.
//!
//! Variants carry enough data (cell index, offending value, time) to report a
//! failure without re-deriving it from the inputs.

use alloc::string::String;
use core::fmt;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Everything that can go wrong when building or evolving a system.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Partition with no cells.
    EmptyPartition,
    /// A weight, center, or field value failed validation at construction.
    BadValue {
        what: &'static str,
        index: usize,
        value: f64,
    },
    /// Two fields (or a field and a partition) with different identity tags
    /// were combined.
    PartitionMismatch,
    /// Slice length does not match the partition's cell count.
    LengthMismatch { expected: usize, got: usize },
    /// A field that must be strictly positive has a non-positive cell.
    /// `count` is the total number of offending cells; `index`/`value`
    /// identify the first.
    ConeViolation {
        what: &'static str,
        index: usize,
        value: f64,
        count: usize,
    },
    /// Direction field with zero (or non-finite) norm cannot be normalized.
    DegenerateDirection,
    /// An argument violated a documented precondition.
    InvalidArgument { what: &'static str },
    /// The log-state left the range where `exp` is finite.
    ExpOverflow { peak_log: f64 },
    /// A fixed-step integration blew up at the given time.
    StepOverflow { time: f64, peak_log: f64 },
    /// A state stopped being finite at the given time (direct stepping).
    NonFiniteState { time: f64 },
    /// Fixed-point sweeps did not reach the tolerance.
    PicardDiverged { sweeps: usize, residual: f64 },
    /// `xi` is outside the admissible offset interval `(xi_min, inf)`.
    OutsideCone { xi: f64, xi_min: f64 },
    /// Root iteration exhausted its budget; the bracket is in offset
    /// (`xi - xi_min`) space.
    SolverFailure {
        iterations: u32,
        residual: f64,
        bracket: (f64, f64),
    },
    /// Not enough records for the requested check.
    TooFewRecords { got: usize, need: usize },
    /// Two trajectories cannot be compared record-for-record.
    TrajectoryMismatch { reason: &'static str },
    /// No builtin scenario under this name.
    UnknownScenario { name: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyPartition => write!(f, "partition must have at least one cell"),
            Error::BadValue { what, index, value } => {
                write!(f, "{what} at cell {index} is {value}, which is not allowed")
            }
            Error::PartitionMismatch => {
                write!(f, "operands live on different partitions")
            }
            Error::LengthMismatch { expected, got } => {
                write!(f, "expected {expected} values, got {got}")
            }
            Error::ConeViolation {
                what,
                index,
                value,
                count,
            } => write!(
                f,
                "{what} must be strictly positive but {count} cell(s) are not \
                 (first: cell {index} = {value})"
            ),
            Error::DegenerateDirection => {
                write!(f, "direction field has zero norm and cannot be normalized")
            }
            Error::InvalidArgument { what } => write!(f, "invalid argument: {what}"),
            Error::ExpOverflow { peak_log } => write!(
                f,
                "log-state reached {peak_log:.3e}, beyond the finite range of exp"
            ),
            Error::StepOverflow { time, peak_log } => write!(
                f,
                "state overflowed at t = {time} (log-state peaked at {peak_log:.3e}); \
                 reduce the step size"
            ),
            Error::NonFiniteState { time } => {
                write!(f, "state became non-finite at t = {time}; reduce the step size")
            }
            Error::PicardDiverged { sweeps, residual } => write!(
                f,
                "fixed-point iteration did not converge after {sweeps} sweeps \
                 (last residual {residual:.3e}); shorten the horizon"
            ),
            Error::OutsideCone { xi, xi_min } => write!(
                f,
                "offset {xi} is outside the admissible interval ({xi_min}, inf)"
            ),
            Error::SolverFailure {
                iterations,
                residual,
                bracket,
            } => write!(
                f,
                "root iteration stopped after {iterations} iterations with residual \
                 {residual:.3e} on offset bracket [{:.3e}, {:.3e}]",
                bracket.0, bracket.1
            ),
            Error::TooFewRecords { got, need } => {
                write!(f, "need at least {need} records, trajectory has {got}")
            }
            Error::TrajectoryMismatch { reason } => {
                write!(f, "trajectories are not comparable: {reason}")
            }
            Error::UnknownScenario { name } => write!(
                f,
                "unknown scenario '{name}' (builtins: sine-mean, sine-subcritical, \
                 flat, ordered-pair)"
            ),
        }
    }
}

impl core::error::Error for Error {}
