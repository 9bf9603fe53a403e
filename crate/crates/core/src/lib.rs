//! Identification of sparse polynomial one-step-ahead models from
//! input/output data, and feedback control by exact inversion of the
//! identified model.
//!
//! The pipeline is:
//!
//! 1. [`identify::identify_model`] fits a sparse polynomial NARX model with
//!    linear programming ([`optim`]) and reports the Lipschitz bound
//!    `gamma_y` on the model error.
//! 2. [`invert::control`] computes the command that brings the model output
//!    closest to the next reference, by finding the stationary points of a
//!    univariate polynomial cost ([`poly`]).
//! 3. [`validate::select_mu`] estimates the gain of the controller/model
//!    cascade from closed-loop prediction data and checks the stability
//!    margin.
//! 4. [`sim::run_closed_loop`] evaluates the loop against a plant.
//!
//! Data-parallel inner loops (pairwise distances, grid sweeps, scenarios) use
//! rayon when the `parallel` feature is enabled and fall back to plain
//! iterators otherwise. Results are identical either way.

// Negated comparisons reject NaN parameters along with out-of-range ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod consts;
pub mod error;
pub mod identify;
pub mod invert;
pub mod io;
pub mod model;
pub mod optim;
pub mod par;
pub mod poly;
pub mod sim;
pub mod validate;

pub use error::{Error, Result};
pub use identify::{identify_model, DataSet, IdentConfig, IdentResult};
pub use invert::{control, ControllerConfig};
pub use model::PolyModel;
pub use poly::{AffineScaler, BasisTerm, UniPoly};
pub use validate::{select_mu, ValidationReport, Verdict};
