use alloc::string::String;
use core::fmt;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A value lies outside the domain of a function (negative density, ...).
    Domain { what: &'static str, value: f64 },
    /// An argument violates an operation precondition.
    Argument(String),
    /// The viscosity law cannot provide the requested quantity.
    Law(String),
    /// Field length does not match the grid.
    ShapeMismatch { expected: usize, found: usize },
    /// NaN or infinity detected during a run.
    NonFinite {
        field: &'static str,
        cell: usize,
        time: f64,
    },
    /// The stable time step fell below the configured floor.
    TimeStepUnderflow { dt: f64, floor: f64, time: f64 },
    /// The law failed validation and no override was given.
    NonAdmissibleLaw(String),
    /// Generated initial data violate a finiteness hypothesis.
    Hypothesis {
        member: usize,
        hypothesis: &'static str,
        value: f64,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "{what} out of domain: {value}"),
            Error::Argument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Law(msg) => write!(f, "viscosity law error: {msg}"),
            Error::ShapeMismatch { expected, found } => {
                write!(f, "field has {found} cells, grid has {expected}")
            }
            Error::NonFinite { field, cell, time } => {
                write!(f, "non-finite value in {field} at cell {cell}, t = {time}")
            }
            Error::TimeStepUnderflow { dt, floor, time } => {
                write!(f, "time step {dt:e} below floor {floor:e} at t = {time}")
            }
            Error::NonAdmissibleLaw(msg) => write!(f, "non-admissible viscosity law: {msg}"),
            Error::Hypothesis {
                member,
                hypothesis,
                value,
            } => write!(
                f,
                "initial data member {member} violates hypothesis `{hypothesis}` (value {value})"
            ),
        }
    }
}

impl core::error::Error for Error {}
