//! Crate-wide error type.

use std::fmt;

/// Errors produced by construction, solving and verification routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Root bracket endpoints have the same sign.
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    /// An iterative routine hit its iteration or subdivision cap.
    NoConvergence { what: &'static str, detail: String },
    /// Evaluation outside the covered range.
    OutOfRange { x: f64, lo: f64, hi: f64 },
    /// Argument outside the mathematical domain of the operation.
    Domain(String),
    /// A marginal that must have unit mean does not.
    MeanMismatch { mean: f64, expected: f64 },
    /// The operation needs a density but the marginal is purely atomic.
    NoDensity,
    /// A standing assumption (convex order, single-crossing dispersion)
    /// failed for the supplied pair of marginals.
    AssumptionViolated(String),
    /// A solver could not produce a solution within tolerance.
    NumericsFailure(String),
    /// Kernel atoms at some point fail the martingale identity.
    MartingaleViolation { x: f64, residual: f64 },
    /// Two independent constructions of the same object disagree.
    MethodMismatch { sup_diff: f64, tol: f64 },
    /// The discrete problem has no feasible coupling.
    Infeasible(String),
    /// Internal invariant broken; indicates a bug, not bad input.
    Internal(String),
    /// A spec string or instance file could not be parsed.
    BadSpec(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Bracket { lo, hi, f_lo, f_hi } => write!(
                f,
                "no sign change on bracket [{lo}, {hi}]: f(lo)={f_lo}, f(hi)={f_hi}"
            ),
            Error::NoConvergence { what, detail } => {
                write!(f, "{what} did not converge: {detail}")
            }
            Error::OutOfRange { x, lo, hi } => {
                write!(f, "{x} outside covered range [{lo}, {hi}]")
            }
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::MeanMismatch { mean, expected } => {
                write!(f, "mean {mean} differs from required {expected}")
            }
            Error::NoDensity => write!(f, "operation requires a density"),
            Error::AssumptionViolated(msg) => write!(f, "assumption violated: {msg}"),
            Error::NumericsFailure(msg) => write!(f, "numerics failure: {msg}"),
            Error::MartingaleViolation { x, residual } => {
                write!(f, "martingale identity fails at x={x}: residual {residual}")
            }
            Error::MethodMismatch { sup_diff, tol } => {
                write!(f, "independent constructions disagree: {sup_diff} > {tol}")
            }
            Error::Infeasible(msg) => write!(f, "infeasible: {msg}"),
            Error::Internal(msg) => write!(f, "internal error: {msg}"),
            Error::BadSpec(msg) => write!(f, "bad spec: {msg}"),
        }
    }
}

impl std::error::Error for Error {}
