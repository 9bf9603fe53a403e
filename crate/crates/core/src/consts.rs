//! Numeric tolerances shared across the toolkit.
//!
//! Every comparison against a feasibility or optimality threshold refers to a
//! constant in this table.

/// Absolute primal feasibility tolerance of the LP solver.
pub const FEAS_TOL: f64 = 1e-8;

/// Reduced-cost threshold for the simplex entering-variable choice.
pub const OPT_TOL: f64 = 1e-10;

/// Smallest tableau entry accepted as a pivot.
pub const PIVOT_TOL: f64 = 1e-11;

/// Leading coefficients below this fraction of the largest one are stripped
/// before root extraction.
pub const LEADING_COEFF_REL: f64 = 1e-12;

/// An eigenvalue `z` of the companion matrix is treated as real when
/// `|Im z| <= REAL_ROOT_IMAG_TOL * (1 + |Re z|)`.
pub const REAL_ROOT_IMAG_TOL: f64 = 1e-8;

/// Roots closer than this fraction of the search interval width are merged.
pub const ROOT_DEDUP_REL: f64 = 1e-9;

/// Relative tolerance under which two candidate costs count as a tie.
pub const TIE_REL_TOL: f64 = 1e-12;

/// Coefficients below `PRUNE_REL * (1 + max|alpha|)` are dropped from an
/// identified model.
pub const PRUNE_REL: f64 = 1e-12;

/// Relative inflation applied to the minimal validated Lipschitz constant.
pub const GAMMA_HAT_DELTA: f64 = 1e-6;

/// Outputs above this magnitude are treated as divergence in simulation.
pub const DIVERGENCE_LIMIT: f64 = 1e8;
