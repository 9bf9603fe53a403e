//! The inversion controller.
//!
//! For the next reference `r` and the current regressor `q`, the command is
//! the minimizer over the saturation interval of
//!
//! ```text
//! J(u) = (r - f(q, u))^2 / rho_y + mu * u^2 / rho_u
//! ```
//!
//! `J` is a polynomial in `u`, so its minimizer lies in the finite set of
//! real stationary points inside the interval plus the two endpoints.

use serde::{Deserialize, Serialize};

use crate::consts::TIE_REL_TOL;
use crate::error::{Error, Result};
use crate::identify::DataSet;
use crate::model::PolyModel;
use crate::poly::UniPoly;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub u_lo: f64,
    pub u_hi: f64,
    /// Command-activity weight, `>= 0`.
    #[serde(default)]
    pub mu: f64,
}

impl ControllerConfig {
    pub fn new(u_lo: f64, u_hi: f64, mu: f64) -> Result<Self> {
        let cfg = ControllerConfig { u_lo, u_hi, mu };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.u_lo.is_finite() && self.u_hi.is_finite() && self.mu.is_finite()) {
            return Err(Error::NonFinite("controller configuration"));
        }
        if self.u_lo >= self.u_hi {
            return Err(Error::InvalidParameter(format!(
                "input bounds must satisfy u_lo < u_hi, got [{}, {}]",
                self.u_lo, self.u_hi
            )));
        }
        if self.mu < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "mu must be >= 0, got {}",
                self.mu
            )));
        }
        Ok(())
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        ControllerConfig { mu, ..self.clone() }
    }

    pub fn contains(&self, u: f64) -> bool {
        u >= self.u_lo && u <= self.u_hi
    }
}

/// Normalization constants `sum y^2`, `sum u^2` with zero-guard flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub rho_y: f64,
    pub rho_u: f64,
    /// `sum y^2` was zero and replaced by 1.
    pub y_degenerate: bool,
    /// `sum u^2` was zero and replaced by 1.
    pub u_degenerate: bool,
}

pub fn normalization_constants(data: &DataSet) -> Normalization {
    let guard = |s: f64| if s > 0.0 { (s, false) } else { (1.0, true) };
    let (rho_y, y_degenerate) = guard(data.y.iter().map(|v| v * v).sum());
    let (rho_u, u_degenerate) = guard(data.u.iter().map(|v| v * v).sum());
    Normalization {
        rho_y,
        rho_u,
        y_degenerate,
        u_degenerate,
    }
}

/// `J` as an explicit polynomial in the raw input.
pub fn build_objective(
    model: &PolyModel,
    q: &[f64],
    r: f64,
    cfg: &ControllerConfig,
) -> Result<UniPoly> {
    let p = model.restrict_to_u(q)?;
    let err = UniPoly::constant(r).add(&p.scale(-1.0));
    let tracking = err.mul(&err).scale(1.0 / model.rho_y);
    let activity = UniPoly::new(vec![0.0, 0.0, cfg.mu / model.rho_u]);
    Ok(tracking.add(&activity))
}

/// Real stationary points of `J` inside the interval plus both endpoints,
/// sorted and deduplicated.
pub fn candidate_set(objective: &UniPoly, cfg: &ControllerConfig) -> Result<Vec<f64>> {
    let mut set = objective.derivative().real_roots(cfg.u_lo, cfg.u_hi)?;
    set.push(cfg.u_lo);
    set.push(cfg.u_hi);
    set.sort_by(f64::total_cmp);
    let tol = crate::consts::ROOT_DEDUP_REL * (cfg.u_hi - cfg.u_lo);
    set.dedup_by(|a, b| (*a - *b).abs() <= tol);
    // an endpoint absorbed by a nearby root keeps the exact endpoint value
    if let Some(first) = set.first_mut() {
        if (*first - cfg.u_lo).abs() <= tol {
            *first = cfg.u_lo;
        }
    }
    if let Some(last) = set.last_mut() {
        if (*last - cfg.u_hi).abs() <= tol {
            *last = cfg.u_hi;
        }
    }
    Ok(set)
}

/// Full outcome of one controller evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub u: f64,
    /// `J(u)` at the chosen command.
    pub cost: f64,
    /// `|U^s|`.
    pub candidates: usize,
    /// Degree of `J`, `None` when `J` is identically zero.
    pub objective_degree: Option<usize>,
    /// `J` does not depend on `u`: the step cannot influence the output.
    pub uncontrollable: bool,
    /// The command sits on a saturation bound.
    pub saturated: bool,
}

/// The command `u` minimizing `J` over the candidate set.
pub fn control(model: &PolyModel, q: &[f64], r: f64, cfg: &ControllerConfig) -> Result<f64> {
    decide(model, q, r, cfg).map(|d| d.u)
}

/// As [`control`], with diagnostics.
///
/// Ties within [`TIE_REL_TOL`] go to the smallest `|u|`, then the smallest
/// `u`. When `J` is constant in `u`, `0` joins the candidates if it lies in
/// the interval, so the tie-break picks the least command activity.
pub fn decide(model: &PolyModel, q: &[f64], r: f64, cfg: &ControllerConfig) -> Result<Decision> {
    if !r.is_finite() {
        return Err(Error::NonFinite("reference"));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regressor"));
    }
    let objective = build_objective(model, q, r, cfg)?;
    let mut candidates = candidate_set(&objective, cfg)?;
    let n_candidates = candidates.len();
    let uncontrollable = objective.derivative().is_zero();
    if uncontrollable && cfg.contains(0.0) && !candidates.contains(&0.0) {
        candidates.push(0.0);
    }

    let costs: Vec<f64> = candidates.iter().map(|&u| objective.eval(u)).collect();
    let best_cost = costs.iter().copied().fold(f64::INFINITY, f64::min);
    // relative to the cost scale of a unit tracking error at this reference
    let tie = TIE_REL_TOL * (best_cost.abs() + (1.0 + r * r) / model.rho_y);
    let u = candidates
        .iter()
        .zip(&costs)
        .filter(|(_, &c)| c <= best_cost + tie)
        .map(|(&u, _)| u)
        .min_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)))
        .ok_or(Error::NonFinite("objective"))?;
    let cost = objective.eval(u);
    Ok(Decision {
        u,
        cost,
        candidates: n_candidates,
        objective_degree: objective.degree(),
        uncontrollable,
        saturated: u == cfg.u_lo || u == cfg.u_hi,
    })
}
