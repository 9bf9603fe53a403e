//! Self-tuning identification of sparse polynomial NARX models.
//!
//! For each candidate order `n` the data are unrolled into a regression
//! table; the minimal `l_inf` residual `eta` is computed; then the smallest
//! Lipschitz bound `gamma_y` for which the stability constraints and the
//! relaxed residual bound `||y - Phi beta||_inf <= eta * rho` are jointly
//! feasible is found by bisection, and the `l1`-minimal coefficient vector at
//! that bound becomes the model. The order grows until `gamma_y` stops
//! improving; `rho` grows until `gamma_y < 1`.

use std::collections::BTreeSet;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::consts::{FEAS_TOL, PRUNE_REL};
use crate::error::{ensure_finite, Error, Result};
use crate::invert::normalization_constants;
use crate::model::PolyModel;
use crate::optim::{min_l1_constrained, min_linf, residual_inf, LinearInequality, LpStatus};
use crate::poly::{eval_basis, generate_basis, AffineScaler, BasisTerm};

/// A measured input/output log. Sample `i` pairs `u[i]` with `y[i]`; the
/// system maps `(y[i], .., u[i], ..)` to `y[i + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    /// Sampling period in seconds; informational only.
    pub sample_time: Option<f64>,
}

impl DataSet {
    pub fn new(u: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if u.len() != y.len() {
            return Err(Error::Dimension {
                context: "data set output samples",
                expected: u.len(),
                got: y.len(),
            });
        }
        if u.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "a data set needs at least 2 samples, got {}",
                u.len()
            )));
        }
        ensure_finite(&u, "input samples")?;
        ensure_finite(&y, "output samples")?;
        Ok(DataSet {
            u,
            y,
            sample_time: None,
        })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// `(y[i], .., y[i-n+1])` for sample index `i`.
pub fn y_window(data: &DataSet, i: usize, n: usize) -> Vec<f64> {
    (0..n).map(|j| data.y[i - j]).collect()
}

fn u_window(data: &DataSet, i: usize, n: usize) -> Vec<f64> {
    (0..n).map(|j| data.u[i - j]).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct IdentConfig {
    /// Total degree of the monomial basis.
    pub degree: u32,
    pub max_order: usize,
    pub rho_init: f64,
    pub rho_growth: f64,
    pub rho_max: f64,
    /// Absolute width at which the `gamma_y` bisection stops.
    pub gamma_tol: f64,
    /// The order sweep stops when `gamma_y` improves by less than this
    /// fraction. While `gamma_y` stays at zero the residual bound `eta` is
    /// compared instead.
    pub order_rel_tol: f64,
    /// Upper limit of the `gamma_y` bracket doubling.
    pub gamma_max: f64,
}

impl Default for IdentConfig {
    fn default() -> Self {
        IdentConfig {
            degree: 3,
            max_order: 3,
            rho_init: 1.05,
            rho_growth: 1.25,
            rho_max: 4.0,
            gamma_tol: 1e-3,
            order_rel_tol: 0.05,
            gamma_max: 65536.0,
        }
    }
}

impl IdentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(1..=8).contains(&self.degree) {
            return bad(format!("degree must be in 1..=8, got {}", self.degree));
        }
        if self.max_order == 0 {
            return bad("max_order must be >= 1".into());
        }
        if !(self.rho_init > 1.0) || !(self.rho_growth > 1.0) || !(self.rho_max >= self.rho_init) {
            return bad(format!(
                "need rho_init > 1, rho_growth > 1, rho_max >= rho_init; got {}, {}, {}",
                self.rho_init, self.rho_growth, self.rho_max
            ));
        }
        if !(self.gamma_tol > 0.0) || !(self.order_rel_tol >= 0.0) || !(self.gamma_max >= 1.0) {
            return bad("gamma_tol > 0, order_rel_tol >= 0 and gamma_max >= 1 required".into());
        }
        Ok(())
    }
}

/// One row per time index of the data that has a full regressor and a
/// successor sample.
#[derive(Debug, Clone)]
pub struct RegressionTable {
    pub order: usize,
    pub target: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    /// Sample index `i` of each row's regressor.
    pub times: Vec<usize>,
    pub y_regressors: Vec<Vec<f64>>,
    pub u_regressors: Vec<Vec<f64>>,
}

impl RegressionTable {
    pub fn rows(&self) -> usize {
        self.target.len()
    }
}

/// Scaler over the `2n` regressor variables, fitted on the rows of the
/// order-`n` table.
pub fn regressor_scaler(data: &DataSet, n: usize) -> Result<AffineScaler> {
    check_order(data, n)?;
    let rows = n - 1..data.len() - 1;
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(2 * n);
    for j in 0..n {
        columns.push(rows.clone().map(|i| data.y[i - j]).collect());
    }
    for j in 0..n {
        columns.push(rows.clone().map(|i| data.u[i - j]).collect());
    }
    Ok(AffineScaler::fit(columns.iter().map(Vec::as_slice)))
}

fn check_order(data: &DataSet, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("model order must be >= 1".into()));
    }
    if data.len() <= n {
        return Err(Error::InsufficientData(format!(
            "order {n} needs more than {n} samples, got {}",
            data.len()
        )));
    }
    Ok(())
}

pub fn build_regression(
    data: &DataSet,
    n: usize,
    basis: &[BasisTerm],
    scaler: &AffineScaler,
) -> Result<RegressionTable> {
    check_order(data, n)?;
    let times: Vec<usize> = (n - 1..data.len() - 1).collect();
    let y_regressors: Vec<Vec<f64>> = times.iter().map(|&i| y_window(data, i, n)).collect();
    let u_regressors: Vec<Vec<f64>> = times.iter().map(|&i| u_window(data, i, n)).collect();
    let phi = crate::par::map_range(times.len(), |k| {
        let mut point = y_regressors[k].clone();
        point.extend_from_slice(&u_regressors[k]);
        eval_basis(basis, scaler, &point)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let target = times.iter().map(|&i| data.y[i + 1]).collect();
    Ok(RegressionTable {
        order: n,
        target,
        phi,
        times,
        y_regressors,
        u_regressors,
    })
}

fn inf_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `zeta` and the index sets `{i : ||u_k - u_i||_inf <= zeta}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSets {
    pub zeta: f64,
    pub sets: Vec<Vec<usize>>,
}

/// Smallest radius at which every row has at least one other row within
/// `l_inf` distance on the input regressors.
pub fn neighbor_sets(table: &RegressionTable) -> Result<NeighborSets> {
    let rows = table.rows();
    if rows < 2 {
        return Err(Error::InsufficientData(format!(
            "neighbor sets need at least 2 rows, got {rows}"
        )));
    }
    let u = &table.u_regressors;
    let zeta = crate::par::max_range(rows, |k| {
        (0..rows)
            .filter(|&i| i != k)
            .map(|i| inf_distance(&u[k], &u[i]))
            .fold(f64::INFINITY, f64::min)
    });
    let sets = crate::par::map_range(rows, |k| {
        (0..rows)
            .filter(|&i| inf_distance(&u[k], &u[i]) <= zeta)
            .collect::<Vec<_>>()
    });
    Ok(NeighborSets { zeta, sets })
}

/// Unordered row pairs `{k, l}`, `l` in the neighbor set of `k`, `l != k`.
///
/// `(k, l)` and `(l, k)` encode the same absolute-value constraint, so each
/// pair appears once.
pub fn sc_pairs(neighbors: &NeighborSets) -> Vec<(usize, usize)> {
    let mut pairs = BTreeSet::new();
    for (k, set) in neighbors.sets.iter().enumerate() {
        for &l in set {
            if l != k {
                pairs.insert((k.min(l), k.max(l)));
            }
        }
    }
    pairs.into_iter().collect()
}

/// Linear inequalities encoding
/// `|y_{l+1} - y_{k+1} + (Phi_k - Phi_l) beta| <= gamma rho ||y_l - y_k||_inf + 2 eta rho`.
pub fn sc_constraints(
    table: &RegressionTable,
    neighbors: &NeighborSets,
    gamma: f64,
    eta: f64,
    rho: f64,
) -> Vec<LinearInequality> {
    sc_constraints_for_pairs(table, &sc_pairs(neighbors), gamma, eta, rho)
}

fn sc_constraints_for_pairs(
    table: &RegressionTable,
    pairs: &[(usize, usize)],
    gamma: f64,
    eta: f64,
    rho: f64,
) -> Vec<LinearInequality> {
    let mut out = Vec::with_capacity(2 * pairs.len());
    for &(k, l) in pairs {
        let offset = table.target[l] - table.target[k];
        let diff: Vec<f64> = table.phi[k]
            .iter()
            .zip(&table.phi[l])
            .map(|(a, b)| a - b)
            .collect();
        let bound = gamma * rho * inf_distance(&table.y_regressors[l], &table.y_regressors[k])
            + 2.0 * eta * rho;
        out.push(LinearInequality {
            rhs: bound - offset,
            coeffs: diff.clone(),
        });
        out.push(LinearInequality {
            rhs: bound + offset,
            coeffs: diff.into_iter().map(|v| -v).collect(),
        });
    }
    out
}

/// Smallest `gamma_y` for which `coeffs` satisfy the stability constraints,
/// `inf` when a pair with equal output regressors violates them at any
/// `gamma_y`.
pub fn sc_gamma(
    table: &RegressionTable,
    neighbors: &NeighborSets,
    coeffs: &[f64],
    eta: f64,
    rho: f64,
) -> f64 {
    let residual: Vec<f64> = table
        .phi
        .iter()
        .zip(&table.target)
        .map(|(row, y)| y - row.iter().zip(coeffs).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    sc_pairs(neighbors)
        .into_iter()
        .map(|(k, l)| {
            let excess = (residual[l] - residual[k]).abs() - 2.0 * eta * rho;
            let d = rho * inf_distance(&table.y_regressors[l], &table.y_regressors[k]);
            match (excess > 0.0, d > 0.0) {
                (false, _) => 0.0,
                (true, true) => excess / d,
                (true, false) => f64::INFINITY,
            }
        })
        .fold(0.0, f64::max)
}

/// [`sc_gamma`] of a given model on a data set, using the model's own terms
/// and scaler.
pub fn model_gamma(data: &DataSet, model: &PolyModel, eta: f64, rho: f64) -> Result<f64> {
    let table = build_regression(data, model.order, &model.terms, &model.scaler)?;
    let neighbors = neighbor_sets(&table)?;
    Ok(sc_gamma(&table, &neighbors, &model.coeffs, eta, rho))
}

/// Result of the `gamma_y` search.
#[derive(Debug, Clone)]
pub struct GammaSearch {
    pub gamma: f64,
    /// `l1`-minimal coefficients at `gamma`.
    pub coeffs: Vec<f64>,
    pub lp_solves: usize,
}

/// Smallest `gamma_y` (to within `gamma_tol`) for which the stability
/// constraints and the residual bound are feasible.
///
/// `gamma = 0` is tried first. Otherwise the upper end is doubled from 1
/// until feasible and the bracket bisected; the feasible upper end is
/// returned.
pub fn min_feasible_gamma(
    table: &RegressionTable,
    neighbors: &NeighborSets,
    eta: f64,
    rho: f64,
    gamma_tol: f64,
    gamma_max: f64,
) -> Result<GammaSearch> {
    let pairs = sc_pairs(neighbors);
    let mut lp_solves = 0;
    let mut solve = |gamma: f64| -> Result<Option<Vec<f64>>> {
        lp_solves += 1;
        let sc = sc_constraints_for_pairs(table, &pairs, gamma, eta, rho);
        let sol = min_l1_constrained(&table.phi, &table.target, &sc, eta, rho)?;
        match sol.status {
            LpStatus::Optimal => Ok(Some(sol.x)),
            LpStatus::Infeasible => Ok(None),
            status => Err(Error::Solver(status)),
        }
    };

    if let Some(coeffs) = solve(0.0)? {
        return Ok(GammaSearch {
            gamma: 0.0,
            coeffs,
            lp_solves,
        });
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut best = loop {
        if let Some(coeffs) = solve(hi)? {
            break coeffs;
        }
        lo = hi;
        hi *= 2.0;
        if hi > gamma_max {
            return Err(Error::IdentificationFailed(format!(
                "stability constraints infeasible up to gamma_y = {gamma_max} (eta * rho = {})",
                eta * rho
            )));
        }
    };
    while hi - lo > gamma_tol {
        let mid = 0.5 * (lo + hi);
        match solve(mid)? {
            Some(coeffs) => {
                hi = mid;
                best = coeffs;
            }
            None => lo = mid,
        }
    }
    Ok(GammaSearch {
        gamma: hi,
        coeffs: best,
        lp_solves,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub rho: f64,
    pub order: usize,
    pub eta: f64,
    /// `inf` when no feasible bound was found.
    pub gamma_y: f64,
    pub l1_norm: f64,
    pub nnz: usize,
}

#[derive(Debug, Clone)]
pub struct IdentResult {
    pub model: PolyModel,
    pub eta: f64,
    pub gamma_y: f64,
    pub rho: f64,
    /// `gamma_y < 1` was reached.
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
    /// `||y - Phi alpha||_inf` on the full table of the selected order.
    pub fit_error: f64,
    /// Maximal one-step prediction error on the last 20% of the rows.
    pub tail_error: f64,
    /// The order sweep reached `max_order` without `gamma_y` settling.
    pub max_order_reached: bool,
}

impl IdentResult {
    pub fn residual_bound(&self) -> f64 {
        self.eta * self.rho
    }
}

/// Everything about one order that does not depend on `rho`.
struct OrderData {
    basis: Vec<BasisTerm>,
    scaler: AffineScaler,
    table: RegressionTable,
    neighbors: NeighborSets,
    eta: f64,
}

impl OrderData {
    fn new(data: &DataSet, n: usize, degree: u32) -> Result<Self> {
        let basis = generate_basis(2 * n, degree);
        let scaler = regressor_scaler(data, n)?;
        let table = build_regression(data, n, &basis, &scaler)?;
        let neighbors = neighbor_sets(&table)?;
        let (eta, _) = min_linf(&table.phi, &table.target)?;
        debug!(
            "order {n}: {} rows, {} terms, zeta = {:.3e}, eta = {:.3e}",
            table.rows(),
            basis.len(),
            neighbors.zeta,
            eta
        );
        Ok(OrderData {
            basis,
            scaler,
            table,
            neighbors,
            eta,
        })
    }
}

struct Candidate {
    order: usize,
    gamma: f64,
    eta: f64,
    coeffs: Vec<f64>,
}

/// Runs the full self-tuning identification.
///
/// Returns `Ok` with `converged == false` when `gamma_y < 1` could not be
/// reached within `rho_max`; the result then holds the pass with the
/// smallest `gamma_y`.
pub fn identify_model(data: &DataSet, cfg: &IdentConfig) -> Result<IdentResult> {
    cfg.validate()?;
    let norm = normalization_constants(data);
    let y_scale = data.y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let eta_floor = FEAS_TOL * (1.0 + y_scale);
    let mut orders: Vec<OrderData> = Vec::new();
    let mut trace = Vec::new();
    let mut max_order_reached = false;
    let mut best_overall: Option<(Candidate, f64)> = None;

    let mut rho = cfg.rho_init;
    while rho <= cfg.rho_max * (1.0 + 1e-12) {
        let mut selected: Option<Candidate> = None;
        for n in 1..=cfg.max_order {
            if data.len() < n + 2 {
                info!(
                    "order {n} skipped: {} samples leave fewer than 2 rows",
                    data.len()
                );
                break;
            }
            if orders.len() < n {
                orders.push(OrderData::new(data, n, cfg.degree)?);
            }
            let od = &orders[n - 1];
            let search = min_feasible_gamma(
                &od.table,
                &od.neighbors,
                od.eta,
                rho,
                cfg.gamma_tol,
                cfg.gamma_max,
            );
            let (gamma, coeffs) = match search {
                Ok(s) => (s.gamma, s.coeffs),
                Err(Error::IdentificationFailed(msg)) => {
                    debug!("order {n}, rho {rho}: {msg}");
                    (f64::INFINITY, vec![0.0; od.basis.len()])
                }
                Err(e) => return Err(e),
            };
            let coeffs = prune(coeffs);
            trace.push(TraceEntry {
                rho,
                order: n,
                eta: od.eta,
                gamma_y: gamma,
                l1_norm: coeffs.iter().map(|c| c.abs()).sum(),
                nnz: coeffs.iter().filter(|c| **c != 0.0).count(),
            });
            info!(
                "rho {rho:.4}, order {n}: eta = {:.3e}, gamma_y = {gamma:.4}",
                od.eta
            );

            let candidate = Candidate {
                order: n,
                gamma,
                eta: od.eta,
                coeffs,
            };
            match &selected {
                None => selected = Some(candidate),
                Some(prev) => {
                    let improvement = if prev.gamma.is_finite() && prev.gamma > 0.0 {
                        (prev.gamma - gamma) / prev.gamma
                    } else if prev.gamma.is_infinite() && gamma.is_finite() {
                        1.0
                    } else if prev.gamma == 0.0 && gamma == 0.0 && prev.eta > eta_floor {
                        // gamma cannot improve further; let the residual decide
                        (prev.eta - od.eta) / prev.eta
                    } else {
                        0.0
                    };
                    if improvement < cfg.order_rel_tol {
                        break;
                    }
                    selected = Some(candidate);
                }
            }
            if n == cfg.max_order {
                max_order_reached = true;
            }
        }

        let Some(candidate) = selected else {
            return Err(Error::InsufficientData(format!(
                "{} samples are too few for any model order",
                data.len()
            )));
        };
        let done = candidate.gamma < 1.0;
        let better = best_overall
            .as_ref()
            .is_none_or(|(best, _)| candidate.gamma < best.gamma);
        if done || better {
            best_overall = Some((candidate, rho));
        }
        if done {
            break;
        }
        rho *= cfg.rho_growth;
    }

    let (candidate, rho) = best_overall.expect("at least one rho pass runs");
    let od = &orders[candidate.order - 1];
    let converged = candidate.gamma < 1.0;
    let fit_error = residual_inf(&od.table.phi, &od.table.target, &candidate.coeffs);
    if fit_error > od.eta * rho + FEAS_TOL && candidate.gamma.is_finite() {
        debug!(
            "residual {fit_error:.3e} exceeds eta*rho = {:.3e}",
            od.eta * rho
        );
    }
    let tail_start = od.table.rows() - (od.table.rows() / 5).max(1);
    let tail_error = residual_inf(
        &od.table.phi[tail_start..],
        &od.table.target[tail_start..],
        &candidate.coeffs,
    );

    let (terms, coeffs): (Vec<_>, Vec<_>) = od
        .basis
        .iter()
        .zip(&candidate.coeffs)
        .filter(|(_, c)| **c != 0.0)
        .map(|(t, c)| (t.clone(), *c))
        .unzip();
    let model = PolyModel::new(
        candidate.order,
        cfg.degree,
        terms,
        coeffs,
        od.scaler.clone(),
        norm.rho_y,
        norm.rho_u,
    )?;
    Ok(IdentResult {
        model,
        eta: od.eta,
        gamma_y: candidate.gamma,
        rho,
        converged,
        trace,
        fit_error,
        tail_error,
        max_order_reached,
    })
}

fn prune(mut coeffs: Vec<f64>) -> Vec<f64> {
    let max = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let cut = PRUNE_REL * (1.0 + max);
    for c in &mut coeffs {
        if c.abs() <= cut {
            *c = 0.0;
        }
    }
    coeffs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_from_u(
        u_regs: Vec<Vec<f64>>,
        y_regs: Vec<Vec<f64>>,
        target: Vec<f64>,
    ) -> RegressionTable {
        let rows = target.len();
        RegressionTable {
            order: u_regs[0].len(),
            phi: vec![vec![1.0]; rows],
            times: (0..rows).collect(),
            target,
            y_regressors: y_regs,
            u_regressors: u_regs,
        }
    }

    #[test]
    fn data_set_validation() {
        assert!(DataSet::new(vec![1.0], vec![1.0]).is_err());
        assert!(DataSet::new(vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(DataSet::new(vec![1.0, f64::NAN], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn regression_unrolls_rows() {
        let data = DataSet::new(vec![0.1, 0.2, 0.3], vec![1.0, 2.0, 3.0]).unwrap();
        let basis = generate_basis(2, 1);
        let scaler = AffineScaler::identity(2);
        let t = build_regression(&data, 1, &basis, &scaler).unwrap();
        assert_eq!(t.rows(), 2);
        assert_eq!(t.phi[1], vec![1.0, 2.0, 0.2]);
        assert_eq!(t.target, vec![2.0, 3.0]);

        let t =
            build_regression(&data, 2, &generate_basis(4, 1), &AffineScaler::identity(4)).unwrap();
        assert_eq!(t.rows(), 1);
        assert_eq!(t.y_regressors[0], vec![2.0, 1.0]);
        assert_eq!(t.u_regressors[0], vec![0.2, 0.1]);
        assert!(
            build_regression(&data, 3, &generate_basis(6, 1), &AffineScaler::identity(6)).is_err()
        );
    }

    #[test]
    fn regression_row_count() {
        for len in [3usize, 7, 20, 51] {
            for n in 1..len.min(5) {
                let data =
                    DataSet::new(vec![0.5; len], (0..len).map(|i| i as f64).collect()).unwrap();
                let basis = generate_basis(2 * n, 2);
                let scaler = regressor_scaler(&data, n).unwrap();
                let t = build_regression(&data, n, &basis, &scaler).unwrap();
                // rows t = n-1 ..= len-2
                assert_eq!(t.rows(), (n - 1..len - 1).count());
                assert_eq!(t.rows(), len - n);
            }
        }
    }

    #[test]
    fn neighbor_example() {
        let t = table_from_u(
            vec![vec![0.0], vec![1.0], vec![3.0]],
            vec![vec![0.0]; 3],
            vec![0.0; 3],
        );
        let nb = neighbor_sets(&t).unwrap();
        assert_eq!(nb.zeta, 2.0);
        assert_eq!(nb.sets[2], vec![1, 2]);
        assert_eq!(nb.sets[0], vec![0, 1]);
        assert_eq!(nb.sets[1], vec![0, 1, 2]);
    }

    #[test]
    fn neighbor_two_rows_and_identical() {
        let t = table_from_u(
            vec![vec![0.5], vec![-0.25]],
            vec![vec![0.0]; 2],
            vec![0.0; 2],
        );
        let nb = neighbor_sets(&t).unwrap();
        assert_eq!(nb.zeta, 0.75);
        assert_eq!(nb.sets, vec![vec![0, 1], vec![0, 1]]);

        let t = table_from_u(
            vec![vec![1.0, 2.0]; 4],
            vec![vec![0.0, 0.0]; 4],
            vec![0.0; 4],
        );
        let nb = neighbor_sets(&t).unwrap();
        assert_eq!(nb.zeta, 0.0);
        assert!(nb.sets.iter().all(|s| s.len() == 4));

        let t = table_from_u(vec![vec![1.0]], vec![vec![0.0]], vec![0.0]);
        assert!(neighbor_sets(&t).is_err());
    }

    #[test]
    fn sc_skips_self_pairs_and_matches_zero_beta() {
        let t = table_from_u(
            vec![vec![0.0], vec![1.0], vec![3.0]],
            vec![vec![0.0], vec![0.5], vec![2.0]],
            vec![0.1, 0.4, -0.2],
        );
        let nb = neighbor_sets(&t).unwrap();
        let sc = sc_constraints(&t, &nb, 0.5, 0.05, 1.1);
        // pairs {0,1}, {1,2}
        assert_eq!(sc.len(), 4);
        let zero = [0.0];
        let zero_ok = sc.iter().all(|c| c.violation(&zero) <= 0.0);
        let direct = [(0usize, 1usize), (1, 2)].iter().all(|&(k, l)| {
            let dy = (t.y_regressors[l][0] - t.y_regressors[k][0]).abs();
            (t.target[l] - t.target[k]).abs() <= 0.5 * 1.1 * dy + 2.0 * 0.05 * 1.1
        });
        assert_eq!(zero_ok, direct);
    }

    #[test]
    fn config_validation() {
        assert!(IdentConfig::default().validate().is_ok());
        let bad = IdentConfig {
            rho_init: 1.0,
            ..IdentConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = IdentConfig {
            degree: 9,
            ..IdentConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn prune_drops_round_off() {
        assert_eq!(prune(vec![1.0, 1e-15, -0.5]), vec![1.0, 0.0, -0.5]);
    }

    #[test]
    fn sc_gamma_is_the_smallest_feasible_gamma() {
        let u: Vec<f64> = (0..40)
            .map(|k| ((k * 7919) % 41) as f64 / 20.0 - 1.0)
            .collect();
        let mut y = vec![0.1];
        for k in 0..39 {
            let prev: f64 = y[k];
            y.push(0.7 * prev + 0.4 * u[k] + 0.3 * prev * prev);
        }
        let data = DataSet::new(u, y).unwrap();
        let basis = generate_basis(2, 1);
        let scaler = regressor_scaler(&data, 1).unwrap();
        let table = build_regression(&data, 1, &basis, &scaler).unwrap();
        let nb = neighbor_sets(&table).unwrap();
        let (eta, beta) = min_linf(&table.phi, &table.target).unwrap();
        let rho = 1.05;
        let g = sc_gamma(&table, &nb, &beta, eta, rho);
        let holds = |gamma: f64| {
            sc_constraints(&table, &nb, gamma, eta, rho)
                .iter()
                .all(|c| c.violation(&beta) <= 1e-12)
        };
        assert!(holds(g));
        if g > 0.0 {
            assert!(!holds(g * 0.99));
        }
        let zero = vec![0.0; beta.len()];
        let g0 = sc_gamma(&table, &nb, &zero, 0.0, 1.0);
        let naive = sc_pairs(&nb)
            .into_iter()
            .map(|(k, l)| {
                let d = inf_distance(&table.y_regressors[k], &table.y_regressors[l]);
                (table.target[k] - table.target[l]).abs() / d
            })
            .fold(0.0, f64::max);
        assert!((g0 - naive).abs() <= 1e-12 * (1.0 + naive));
    }

    #[test]
    fn model_gamma_of_identified_model_is_within_its_bound() {
        let u: Vec<f64> = (0..60)
            .map(|k| ((k * 37) % 61) as f64 / 30.0 - 1.0)
            .collect();
        let mut y = vec![0.0];
        for k in 0..59 {
            let prev: f64 = y[k];
            y.push(0.5 * prev + 0.3 * u[k] + 0.05 * u[k] * u[k] * u[k]);
        }
        let data = DataSet::new(u, y).unwrap();
        let cfg = IdentConfig {
            max_order: 2,
            ..IdentConfig::default()
        };
        let res = identify_model(&data, &cfg).unwrap();
        let g = model_gamma(&data, &res.model, res.eta, res.rho).unwrap();
        assert!(g <= res.gamma_y + 1e-6, "{g} > {}", res.gamma_y);
    }
}
