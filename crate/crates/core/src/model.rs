//! The identified one-step-ahead model `y[t+1] = f(q[t], u[t])`.
//!
//! Variables are ordered `y[t], .., y[t-n+1], u[t], .., u[t-n+1]`; the
//! regressor `q[t]` is the same list with `u[t]` removed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{AffineScaler, BasisTerm, PowerTable, UniPoly};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyModel {
    /// Model order `n`.
    pub order: usize,
    /// Total degree of the basis the model was drawn from.
    pub degree: u32,
    /// Nonzero terms only.
    pub terms: Vec<BasisTerm>,
    pub coeffs: Vec<f64>,
    pub scaler: AffineScaler,
    /// Output normalization `sum y^2` of the identification data.
    pub rho_y: f64,
    /// Input normalization `sum u^2` of the identification data.
    pub rho_u: f64,
}

impl PolyModel {
    pub fn new(
        order: usize,
        degree: u32,
        terms: Vec<BasisTerm>,
        coeffs: Vec<f64>,
        scaler: AffineScaler,
        rho_y: f64,
        rho_u: f64,
    ) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidParameter("model order must be >= 1".into()));
        }
        if terms.len() != coeffs.len() {
            return Err(Error::Dimension {
                context: "model coefficients",
                expected: terms.len(),
                got: coeffs.len(),
            });
        }
        if scaler.n_vars() != 2 * order {
            return Err(Error::Dimension {
                context: "model scaler",
                expected: 2 * order,
                got: scaler.n_vars(),
            });
        }
        if let Some(t) = terms.iter().find(|t| t.exponents.len() != 2 * order) {
            return Err(Error::Dimension {
                context: "model term",
                expected: 2 * order,
                got: t.exponents.len(),
            });
        }
        if !(rho_y > 0.0 && rho_u > 0.0) {
            return Err(Error::InvalidParameter(
                "normalization constants must be positive".into(),
            ));
        }
        if scaler.gain.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::InvalidParameter(
                "scaler gains must be positive".into(),
            ));
        }
        Ok(PolyModel {
            order,
            degree,
            terms,
            coeffs,
            scaler,
            rho_y,
            rho_u,
        })
    }

    pub fn n_vars(&self) -> usize {
        2 * self.order
    }

    /// Index of `u[t]` in the full variable list.
    pub fn u_index(&self) -> usize {
        self.order
    }

    pub fn regressor_len(&self) -> usize {
        2 * self.order - 1
    }

    fn max_degree(&self) -> usize {
        self.terms.iter().map(BasisTerm::degree).max().unwrap_or(0) as usize
    }

    /// Model output at a full raw point `(y-regressor, u-regressor)`.
    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.n_vars() {
            return Err(Error::Dimension {
                context: "model point",
                expected: self.n_vars(),
                got: point.len(),
            });
        }
        let powers = PowerTable::new(&self.scaler.scale_point(point), self.max_degree());
        Ok(self
            .terms
            .iter()
            .zip(&self.coeffs)
            .map(|(t, c)| c * powers.monomial(&t.exponents))
            .sum())
    }

    /// Model output at regressor `q` and current input `u`.
    pub fn eval_qu(&self, q: &[f64], u: f64) -> Result<f64> {
        self.eval(&self.full_point(q, u)?)
    }

    /// Splices `u` into the regressor at the `u[t]` slot.
    pub fn full_point(&self, q: &[f64], u: f64) -> Result<Vec<f64>> {
        if q.len() != self.regressor_len() {
            return Err(Error::Dimension {
                context: "model regressor",
                expected: self.regressor_len(),
                got: q.len(),
            });
        }
        let mut p = Vec::with_capacity(self.n_vars());
        p.extend_from_slice(&q[..self.order]);
        p.push(u);
        p.extend_from_slice(&q[self.order..]);
        Ok(p)
    }

    /// `f(q, .)` as an explicit polynomial in the raw input.
    pub fn restrict_to_u(&self, q: &[f64]) -> Result<UniPoly> {
        // Placeholder 0.0 for u[t]; its slot is never read from the table.
        let point = self.full_point(q, 0.0)?;
        let ui = self.u_index();
        let powers = PowerTable::new(&self.scaler.scale_point(&point), self.max_degree());
        let deg_u = self
            .terms
            .iter()
            .map(|t| t.exponents[ui] as usize)
            .max()
            .unwrap_or(0);
        let mut scaled = vec![0.0; deg_u + 1];
        for (t, c) in self.terms.iter().zip(&self.coeffs) {
            let rest = t
                .exponents
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != ui)
                .fold(
                    *c,
                    |acc, (i, &e)| if e == 0 { acc } else { acc * powers.pow(i, e) },
                );
            scaled[t.exponents[ui] as usize] += rest;
        }
        // s = gain * (u - offset) = -gain*offset + gain*u
        let gain = self.scaler.gain[ui];
        let offset = self.scaler.offset[ui];
        Ok(UniPoly::new(scaled).compose_affine(-gain * offset, gain))
    }

    /// Number of coefficients with nonzero value.
    pub fn nnz(&self) -> usize {
        self.coeffs.iter().filter(|c| **c != 0.0).count()
    }

    /// Whether any term depends on `u[t]`.
    pub fn depends_on_u(&self) -> bool {
        let ui = self.u_index();
        self.terms
            .iter()
            .zip(&self.coeffs)
            .any(|(t, c)| *c != 0.0 && t.exponents[ui] > 0)
    }
}
