//! Dense linear programming and the two LP reformulations used by the
//! identification: minimum-`l_inf` residual fitting and `l1` minimization
//! under linear inequality constraints.
//!
//! The solver is a two-phase tableau simplex with Dantzig pricing that falls
//! back to Bland's rule after a run of degenerate pivots. Problems with many
//! more constraints than variables and a nonnegative cost are solved through
//! their dual, whose origin is feasible, which keeps the tableau small.

use log::trace;

use crate::consts::{FEAS_TOL, OPT_TOL, PIVOT_TOL};
use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// `min c.x  s.t.  A x <= b,  lo <= x <= hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    /// Row-major constraint matrix.
    pub constraints: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    /// `(lo, hi)` per variable, `None` for an infinite side.
    pub bounds: Vec<(Option<f64>, Option<f64>)>,
}

impl LinearProgram {
    /// An LP over free variables with no constraints.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            constraints: Vec::new(),
            rhs: Vec::new(),
            bounds: vec![(None, None); n],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.constraints.push(row);
        self.rhs.push(rhs);
        self
    }

    pub fn set_bounds(&mut self, var: usize, lo: Option<f64>, hi: Option<f64>) -> &mut Self {
        self.bounds[var] = (lo, hi);
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if self.bounds.len() != n {
            return Err(Error::Dimension {
                context: "LP bounds",
                expected: n,
                got: self.bounds.len(),
            });
        }
        if self.rhs.len() != self.constraints.len() {
            return Err(Error::Dimension {
                context: "LP right-hand side",
                expected: self.constraints.len(),
                got: self.rhs.len(),
            });
        }
        if let Some(row) = self.constraints.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension {
                context: "LP constraint row",
                expected: n,
                got: row.len(),
            });
        }
        ensure_finite(&self.objective, "LP objective")?;
        ensure_finite(&self.rhs, "LP right-hand side")?;
        for row in &self.constraints {
            ensure_finite(row, "LP constraint matrix")?;
        }
        for &(lo, hi) in &self.bounds {
            let finite = lo.is_none_or(f64::is_finite) && hi.is_none_or(f64::is_finite);
            if !finite {
                return Err(Error::NonFinite("LP bounds"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective_value: f64,
}

impl LpSolution {
    fn failed(status: LpStatus, n: usize) -> Self {
        LpSolution {
            status,
            x: vec![0.0; n],
            objective_value: f64::NAN,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solves a general LP.
///
/// `Optimal` solutions satisfy every constraint and bound within
/// [`FEAS_TOL`]. `Infeasible` is only reported with a certificate: a phase-1
/// residual above the tolerance or, on the dual route, an improving ray of
/// the dual.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let std = StandardForm::from_lp(lp);
    let x_std = match solve_standard(&std.cost, &std.a, &std.b) {
        StdOutcome::Optimal(x) => x,
        StdOutcome::Infeasible => return Ok(LpSolution::failed(LpStatus::Infeasible, lp.n_vars())),
        StdOutcome::Unbounded => return Ok(LpSolution::failed(LpStatus::Unbounded, lp.n_vars())),
        StdOutcome::IterationLimit => {
            return Ok(LpSolution::failed(LpStatus::IterationLimit, lp.n_vars()))
        }
    };
    let x = std.recover(&x_std);
    let objective_value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective_value,
    })
}

/// `min c.x  s.t.  A x <= b,  x >= 0` with `b` of either sign.
struct StandardForm {
    cost: Vec<f64>,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    /// For every original variable: constant shift and `(std index, sign)`
    /// contributions.
    maps: Vec<(f64, Vec<(usize, f64)>)>,
}

impl StandardForm {
    fn from_lp(lp: &LinearProgram) -> Self {
        let mut maps = Vec::with_capacity(lp.n_vars());
        let mut n_std = 0;
        let mut extra_rows: Vec<(usize, f64)> = Vec::new();
        for &(lo, hi) in &lp.bounds {
            match (lo, hi) {
                (Some(lo), hi) => {
                    maps.push((lo, vec![(n_std, 1.0)]));
                    if let Some(hi) = hi {
                        extra_rows.push((n_std, hi - lo));
                    }
                    n_std += 1;
                }
                (None, Some(hi)) => {
                    maps.push((hi, vec![(n_std, -1.0)]));
                    n_std += 1;
                }
                (None, None) => {
                    maps.push((0.0, vec![(n_std, 1.0), (n_std + 1, -1.0)]));
                    n_std += 2;
                }
            }
        }

        let mut cost = vec![0.0; n_std];
        for (c, (_, parts)) in lp.objective.iter().zip(&maps) {
            for &(j, s) in parts {
                cost[j] += c * s;
            }
        }
        let mut a = Vec::with_capacity(lp.constraints.len() + extra_rows.len());
        let mut b = Vec::with_capacity(a.capacity());
        for (row, &rhs) in lp.constraints.iter().zip(&lp.rhs) {
            let mut std_row = vec![0.0; n_std];
            let mut shift = 0.0;
            for (coef, (c0, parts)) in row.iter().zip(&maps) {
                shift += coef * c0;
                for &(j, s) in parts {
                    std_row[j] += coef * s;
                }
            }
            a.push(std_row);
            b.push(rhs - shift);
        }
        for (j, width) in extra_rows {
            let mut std_row = vec![0.0; n_std];
            std_row[j] = 1.0;
            a.push(std_row);
            b.push(width);
        }
        StandardForm { cost, a, b, maps }
    }

    fn recover(&self, x_std: &[f64]) -> Vec<f64> {
        self.maps
            .iter()
            .map(|(c0, parts)| c0 + parts.iter().map(|&(j, s)| s * x_std[j]).sum::<f64>())
            .collect()
    }
}

enum StdOutcome {
    Optimal(Vec<f64>),
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Chooses between the primal tableau and the dual route.
fn solve_standard(cost: &[f64], a: &[Vec<f64>], b: &[f64]) -> StdOutcome {
    let m = a.len();
    let n = cost.len();
    if m > n && cost.iter().all(|&c| c >= 0.0) {
        match solve_via_dual(cost, a, b) {
            Some(outcome) => return outcome,
            None => trace!("dual route did not certify a primal solution; retrying primal"),
        }
    }
    primal_simplex(cost, a, b)
}

fn max_violation(a: &[Vec<f64>], b: &[f64], x: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(row, &bi)| row.iter().zip(x).map(|(r, v)| r * v).sum::<f64>() - bi)
        .chain(x.iter().map(|v| -v))
        .fold(0.0, f64::max)
}

/// Solves `min c.x, Ax <= b, x >= 0` (c >= 0) through the dual
/// `min b.p, -A^T p <= c, p >= 0`, whose origin is feasible.
///
/// The primal solution is read off the reduced costs of the dual's slack
/// columns. Returns `None` when the recovered point is not primal feasible
/// to tolerance, so the caller can fall back to the primal tableau.
fn solve_via_dual(cost: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<StdOutcome> {
    let m = a.len();
    let n = cost.len();
    let dual_a: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| -a[i][j]).collect()).collect();
    let mut tab = Tableau::new(b, &dual_a, cost);
    match tab.run() {
        TableauOutcome::Optimal => {
            let x: Vec<f64> = tab
                .slack_reduced_costs()
                .into_iter()
                .map(|v| v.max(0.0))
                .collect();
            (max_violation(a, b, &x) <= FEAS_TOL).then_some(StdOutcome::Optimal(x))
        }
        // dual feasible and unbounded: the primal is infeasible
        TableauOutcome::Unbounded => Some(StdOutcome::Infeasible),
        TableauOutcome::Infeasible => None,
        TableauOutcome::IterationLimit => Some(StdOutcome::IterationLimit),
    }
}

fn primal_simplex(cost: &[f64], a: &[Vec<f64>], b: &[f64]) -> StdOutcome {
    let mut tab = Tableau::new(cost, a, b);
    match tab.run() {
        TableauOutcome::Optimal => StdOutcome::Optimal(tab.structural_values()),
        TableauOutcome::Infeasible => StdOutcome::Infeasible,
        TableauOutcome::Unbounded => StdOutcome::Unbounded,
        TableauOutcome::IterationLimit => StdOutcome::IterationLimit,
    }
}

enum TableauOutcome {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Dense simplex tableau for `min c.x, A x + s = b, x, s >= 0`.
///
/// Columns are `[structural | slack | artificial]`; rows with negative `b`
/// are negated and receive an artificial variable.
struct Tableau {
    rows: usize,
    cols: usize,
    n_struct: usize,
    n_art: usize,
    /// `rows x (cols + 1)`, last column is the right-hand side.
    data: Vec<f64>,
    /// Reduced costs, last entry is minus the objective value.
    obj: Vec<f64>,
    basis: Vec<usize>,
    cost: Vec<f64>,
}

const DEGENERATE_RUN_BEFORE_BLAND: usize = 50;

impl Tableau {
    fn new(cost: &[f64], a: &[Vec<f64>], b: &[f64]) -> Self {
        let rows = a.len();
        let n_struct = cost.len();
        let n_art = b.iter().filter(|&&v| v < 0.0).count();
        let cols = n_struct + rows + n_art;
        let width = cols + 1;
        let mut data = vec![0.0; rows * width];
        let mut basis = Vec::with_capacity(rows);
        let mut art = n_struct + rows;
        for (i, (row, &bi)) in a.iter().zip(b).enumerate() {
            let line = &mut data[i * width..(i + 1) * width];
            let sign = if bi < 0.0 { -1.0 } else { 1.0 };
            for (dst, &v) in line.iter_mut().zip(row) {
                *dst = sign * v;
            }
            line[n_struct + i] = sign;
            line[cols] = sign * bi;
            if bi < 0.0 {
                line[art] = 1.0;
                basis.push(art);
                art += 1;
            } else {
                basis.push(n_struct + i);
            }
        }
        let mut full_cost = vec![0.0; cols];
        full_cost[..n_struct].copy_from_slice(cost);
        Tableau {
            rows,
            cols,
            n_struct,
            n_art,
            data,
            obj: vec![0.0; width],
            basis,
            cost: full_cost,
        }
    }

    #[inline]
    fn width(&self) -> usize {
        self.cols + 1
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width() + j]
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.n_struct + self.rows
    }

    fn run(&mut self) -> TableauOutcome {
        let limit = 50 * (self.rows + self.cols) + 1000;
        let mut iterations = 0;
        if self.n_art > 0 {
            let art_cost: Vec<f64> = (0..self.cols)
                .map(|j| if self.is_artificial(j) { 1.0 } else { 0.0 })
                .collect();
            self.price(&art_cost);
            // phase 1 is bounded below by zero, so only the limit can stop it early
            if let Some(TableauOutcome::IterationLimit) = self.iterate(limit, &mut iterations, true)
            {
                return TableauOutcome::IterationLimit;
            }
            if -self.obj[self.cols] > FEAS_TOL {
                trace!("phase 1 residual {}", -self.obj[self.cols]);
                return TableauOutcome::Infeasible;
            }
            self.drive_out_artificials();
        }
        let cost = self.cost.clone();
        self.price(&cost);
        match self.iterate(limit, &mut iterations, false) {
            Some(outcome) => outcome,
            None => TableauOutcome::Optimal,
        }
    }

    /// Rebuilds the reduced-cost row for `cost` from the current basis.
    fn price(&mut self, cost: &[f64]) {
        let width = self.width();
        self.obj.iter_mut().for_each(|v| *v = 0.0);
        self.obj[..self.cols].copy_from_slice(&cost[..self.cols]);
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let line = &self.data[i * width..(i + 1) * width];
                for (o, &v) in self.obj.iter_mut().zip(line) {
                    *o -= cb * v;
                }
            }
        }
    }

    /// Runs pivots until optimality (`None`) or a terminal outcome.
    fn iterate(
        &mut self,
        limit: usize,
        iterations: &mut usize,
        phase_one: bool,
    ) -> Option<TableauOutcome> {
        let mut degenerate_run = 0;
        loop {
            if *iterations >= limit {
                return Some(TableauOutcome::IterationLimit);
            }
            let bland = degenerate_run >= DEGENERATE_RUN_BEFORE_BLAND;
            let col = self.entering(bland, phase_one)?;
            let Some(row) = self.leaving(col, bland) else {
                return Some(TableauOutcome::Unbounded);
            };
            let step = self.at(row, self.cols) / self.at(row, col);
            if step.abs() <= 1e-14 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(row, col);
            *iterations += 1;
        }
    }

    fn entering(&self, bland: bool, phase_one: bool) -> Option<usize> {
        let allowed = |j: usize| phase_one || !self.is_artificial(j);
        if bland {
            (0..self.cols).find(|&j| allowed(j) && self.obj[j] < -OPT_TOL)
        } else {
            let mut best = None;
            let mut best_val = -OPT_TOL;
            for j in 0..self.cols {
                if allowed(j) && self.obj[j] < best_val {
                    best_val = self.obj[j];
                    best = Some(j);
                }
            }
            best
        }
    }

    fn leaving(&self, col: usize, bland: bool) -> Option<usize> {
        let mut min_ratio = f64::INFINITY;
        for i in 0..self.rows {
            let v = self.at(i, col);
            if v > PIVOT_TOL {
                min_ratio = min_ratio.min(self.at(i, self.cols).max(0.0) / v);
            }
        }
        if !min_ratio.is_finite() {
            return None;
        }
        let slack = 1e-12 * (1.0 + min_ratio);
        let mut chosen: Option<usize> = None;
        for i in 0..self.rows {
            let v = self.at(i, col);
            if v <= PIVOT_TOL || self.at(i, self.cols).max(0.0) / v > min_ratio + slack {
                continue;
            }
            chosen = match chosen {
                None => Some(i),
                Some(c) if bland => {
                    if self.basis[i] < self.basis[c] {
                        Some(i)
                    } else {
                        Some(c)
                    }
                }
                Some(c) => {
                    if v > self.at(c, col) {
                        Some(i)
                    } else {
                        Some(c)
                    }
                }
            };
        }
        chosen
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.width();
        let p = self.at(row, col);
        {
            let line = &mut self.data[row * width..(row + 1) * width];
            for v in line.iter_mut() {
                *v /= p;
            }
            line[col] = 1.0;
        }
        let pivot_row: Vec<f64> = self.data[row * width..(row + 1) * width].to_vec();
        for i in 0..self.rows {
            if i == row {
                continue;
            }
            let factor = self.data[i * width + col];
            if factor == 0.0 {
                continue;
            }
            let line = &mut self.data[i * width..(i + 1) * width];
            for (v, &pr) in line.iter_mut().zip(&pivot_row) {
                *v -= factor * pr;
            }
            line[col] = 0.0;
            if line[width - 1] < 0.0 && line[width - 1] > -1e-13 {
                line[width - 1] = 0.0;
            }
        }
        let factor = self.obj[col];
        if factor != 0.0 {
            for (v, &pr) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= factor * pr;
            }
            self.obj[col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Pivots basic artificials (at zero level) out of the basis where a
    /// non-artificial column is available; rows without one are redundant.
    fn drive_out_artificials(&mut self) {
        for i in 0..self.rows {
            if !self.is_artificial(self.basis[i]) {
                continue;
            }
            let candidate = (0..self.n_struct + self.rows)
                .filter(|&j| self.at(i, j).abs() > PIVOT_TOL)
                .max_by(|&a, &b| self.at(i, a).abs().total_cmp(&self.at(i, b).abs()));
            if let Some(j) = candidate {
                self.pivot(i, j);
            }
        }
    }

    fn structural_values(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n_struct];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n_struct {
                x[b] = self.at(i, self.cols).max(0.0);
            }
        }
        x
    }

    /// Reduced costs of the slack columns, i.e. minus the row duals.
    fn slack_reduced_costs(&self) -> Vec<f64> {
        self.obj[self.n_struct..self.n_struct + self.rows].to_vec()
    }
}

/// `min_beta ||y - Phi beta||_inf`, returning `(eta, beta)`.
///
/// Encoded with one slack `t`: `-t <= y_k - Phi_k beta <= t`, minimize `t`.
pub fn min_linf(phi: &[Vec<f64>], y: &[f64]) -> Result<(f64, Vec<f64>)> {
    if phi.len() != y.len() {
        return Err(Error::Dimension {
            context: "min_linf rows",
            expected: y.len(),
            got: phi.len(),
        });
    }
    let n = phi.first().map_or(0, Vec::len);
    let y_inf = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if phi.iter().all(|row| row.iter().all(|&v| v == 0.0)) {
        ensure_finite(y, "min_linf target")?;
        return Ok((y_inf, vec![0.0; n]));
    }
    let mut objective = vec![0.0; n + 1];
    objective[n] = 1.0;
    let mut lp = LinearProgram::new(objective);
    lp.set_bounds(n, Some(0.0), None);
    for (row, &yk) in phi.iter().zip(y) {
        if row.len() != n {
            return Err(Error::Dimension {
                context: "min_linf row",
                expected: n,
                got: row.len(),
            });
        }
        let mut up = row.clone();
        up.push(-1.0);
        lp.add_le(up, yk);
        let mut down: Vec<f64> = row.iter().map(|v| -v).collect();
        down.push(-1.0);
        lp.add_le(down, -yk);
    }
    let sol = solve_lp(&lp)?;
    if !sol.is_optimal() {
        return Err(Error::Solver(sol.status));
    }
    let beta = sol.x[..n].to_vec();
    let eta = residual_inf(phi, y, &beta);
    Ok((eta, beta))
}

/// `||y - Phi beta||_inf`.
pub fn residual_inf(phi: &[Vec<f64>], y: &[f64], beta: &[f64]) -> f64 {
    phi.iter()
        .zip(y)
        .map(|(row, &yk)| (yk - row.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()).abs())
        .fold(0.0, f64::max)
}

/// A single linear inequality `coeffs . beta <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearInequality {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl LinearInequality {
    pub fn violation(&self, beta: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .zip(beta)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            - self.rhs
    }
}

/// Upper bound on inequality rows added per cutting-plane round.
const CUTS_PER_ROUND: usize = 400;

/// `min ||beta||_1` subject to the inequalities `sc` and
/// `||y - Phi beta||_inf <= eta * rho`.
///
/// `beta` is split into nonnegative parts. The inequality set is handled by
/// constraint generation: the LP is re-solved with the most violated rows
/// added until every row holds within half of [`FEAS_TOL`]. This is exact
/// because a relaxation that is infeasible certifies infeasibility, and an
/// optimum of a relaxation that satisfies every row is optimal for the full
/// problem.
pub fn min_l1_constrained(
    phi: &[Vec<f64>],
    y: &[f64],
    sc: &[LinearInequality],
    eta: f64,
    rho: f64,
) -> Result<LpSolution> {
    if phi.len() != y.len() {
        return Err(Error::Dimension {
            context: "min_l1_constrained rows",
            expected: y.len(),
            got: phi.len(),
        });
    }
    if !(eta >= 0.0) || !(rho >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need eta >= 0 and rho >= 1, got eta = {eta}, rho = {rho}"
        )));
    }
    let n = phi
        .first()
        .map(Vec::len)
        .or_else(|| sc.first().map(|c| c.coeffs.len()))
        .unwrap_or(0);
    if let Some(c) = sc.iter().find(|c| c.coeffs.len() != n) {
        return Err(Error::Dimension {
            context: "min_l1_constrained inequality",
            expected: n,
            got: c.coeffs.len(),
        });
    }
    let bound = eta * rho;

    let mut base = LinearProgram::new(vec![1.0; 2 * n]);
    for j in 0..2 * n {
        base.set_bounds(j, Some(0.0), None);
    }
    let split = |row: &[f64], sign: f64| -> Vec<f64> {
        row.iter()
            .map(|v| sign * v)
            .chain(row.iter().map(|v| -sign * v))
            .collect()
    };
    for (row, &yk) in phi.iter().zip(y) {
        if row.len() != n {
            return Err(Error::Dimension {
                context: "min_l1_constrained row",
                expected: n,
                got: row.len(),
            });
        }
        base.add_le(split(row, 1.0), yk + bound);
        base.add_le(split(row, -1.0), bound - yk);
    }

    let mut active = vec![false; sc.len()];
    let mut lp = base;
    loop {
        let sol = solve_lp(&lp)?;
        if !sol.is_optimal() {
            return Ok(LpSolution::failed(sol.status, n));
        }
        let beta: Vec<f64> = (0..n).map(|j| sol.x[j] - sol.x[n + j]).collect();

        let violations = crate::par::map_slice(sc, |c| c.violation(&beta));
        let mut violated: Vec<(usize, f64)> = violations
            .into_iter()
            .enumerate()
            .filter(|&(i, v)| !active[i] && v > 0.5 * FEAS_TOL)
            .collect();
        if violated.is_empty() {
            let objective_value = beta.iter().map(|b| b.abs()).sum();
            return Ok(LpSolution {
                status: LpStatus::Optimal,
                x: beta,
                objective_value,
            });
        }
        violated.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let take = violated.len().min(CUTS_PER_ROUND.max(2 * n));
        trace!("adding {take} of {} violated rows", violated.len());
        for &(i, _) in &violated[..take] {
            active[i] = true;
            lp.add_le(split(&sc[i].coeffs, 1.0), sc[i].rhs);
        }
    }
}
