//! Shared numerical tolerances and defaults.
//!
//! These are the fixed constants referenced throughout the crate. Operations
//! that accept an explicit tolerance treat these as defaults only.

/// Probability mass must integrate to one within this tolerance.
pub const MASS_TOL: f64 = 1e-9;

/// Means are considered equal (and equal to one) within this tolerance.
pub const MEAN_TOL: f64 = 1e-6;

/// Default abscissa tolerance for bracketed root-finding.
pub const ROOT_TOL: f64 = 1e-12;

/// Default absolute tolerance for adaptive quadrature.
pub const QUAD_TOL: f64 = 1e-10;

/// Supports are truncated at this quantile (and its complement) wherever an
/// unbounded integral has to be cut off; the discarded tail mass is reported,
/// never hidden.
pub const TAIL_QUANTILE: f64 = 1e-9;

/// Monotone tables tolerate this much backsliding before rejecting data.
pub const MONO_TOL: f64 = 1e-12;

/// Default number of grid points per kernel regime interval.
pub const DEFAULT_GRID: usize = 512;

/// Number of scan points used to locate density crossings and the extrema of
/// the distribution-function gap.
pub const SCAN_GRID: usize = 4096;

/// Iteration cap for bracketed root-finding.
pub const ROOT_MAX_ITER: usize = 200;

/// Subdivision cap for adaptive quadrature.
pub const QUAD_MAX_SEGMENTS: usize = 4000;
