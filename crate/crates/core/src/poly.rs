//! Multivariate monomial bases in affinely scaled variables, and the
//! univariate polynomials obtained by fixing every variable but the current
//! input.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::consts::{LEADING_COEFF_REL, REAL_ROOT_IMAG_TOL, ROOT_DEDUP_REL};
use crate::error::{ensure_finite, Error, Result};

/// Per-variable affine map `x -> gain * (x - offset)`.
///
/// Fitted so that the recorded range of every variable lands on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineScaler {
    pub offset: Vec<f64>,
    pub gain: Vec<f64>,
}

impl AffineScaler {
    pub fn identity(n_vars: usize) -> Self {
        AffineScaler {
            offset: vec![0.0; n_vars],
            gain: vec![1.0; n_vars],
        }
    }

    /// Fits one map per column from its min/max.
    ///
    /// A column with zero range gets gain 1 and offset equal to its constant
    /// value, so it scales to 0 on the data.
    pub fn fit<'a, I>(columns: I) -> Self
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut offset = Vec::new();
        let mut gain = Vec::new();
        for col in columns {
            let (lo, hi) = col
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            if !lo.is_finite() || !hi.is_finite() {
                offset.push(0.0);
                gain.push(1.0);
            } else if hi > lo {
                offset.push(0.5 * (hi + lo));
                gain.push(2.0 / (hi - lo));
            } else {
                offset.push(lo);
                gain.push(1.0);
            }
        }
        AffineScaler { offset, gain }
    }

    pub fn n_vars(&self) -> usize {
        self.gain.len()
    }

    #[inline]
    pub fn scale(&self, var: usize, x: f64) -> f64 {
        self.gain[var] * (x - self.offset[var])
    }

    pub fn scale_point(&self, point: &[f64]) -> Vec<f64> {
        point
            .iter()
            .enumerate()
            .map(|(i, &x)| self.scale(i, x))
            .collect()
    }
}

/// A monomial, stored as one exponent per regressor variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BasisTerm {
    pub exponents: Vec<u32>,
}

impl BasisTerm {
    pub fn new(exponents: Vec<u32>) -> Self {
        BasisTerm { exponents }
    }

    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    /// Value of the monomial at an already scaled point.
    pub fn eval_scaled(&self, scaled: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(scaled)
            .fold(1.0, |acc, (&e, &x)| acc * x.powi(e as i32))
    }
}

/// All monomials in `n_vars` variables of total degree at most `degree`.
///
/// Terms are grouped by total degree; inside a group, higher powers of the
/// earlier variables come first, so `(2, 2)` gives `1, x0, x1, x0^2, x0 x1,
/// x1^2`.
pub fn generate_basis(n_vars: usize, degree: u32) -> Vec<BasisTerm> {
    fn compositions(total: u32, slots: usize, prefix: &mut Vec<u32>, out: &mut Vec<BasisTerm>) {
        if slots == 1 {
            prefix.push(total);
            out.push(BasisTerm::new(prefix.clone()));
            prefix.pop();
            return;
        }
        for first in (0..=total).rev() {
            prefix.push(first);
            compositions(total - first, slots - 1, prefix, out);
            prefix.pop();
        }
    }

    let mut out = Vec::new();
    if n_vars == 0 {
        return out;
    }
    let mut prefix = Vec::with_capacity(n_vars);
    for d in 0..=degree {
        compositions(d, n_vars, &mut prefix, &mut out);
    }
    out
}

/// Evaluates every basis term at a raw (unscaled) point.
pub fn eval_basis(terms: &[BasisTerm], scaler: &AffineScaler, point: &[f64]) -> Result<Vec<f64>> {
    if point.len() != scaler.n_vars() {
        return Err(Error::Dimension {
            context: "eval_basis point",
            expected: scaler.n_vars(),
            got: point.len(),
        });
    }
    let max_deg = terms.iter().map(BasisTerm::degree).max().unwrap_or(0) as usize;
    let powers = PowerTable::new(&scaler.scale_point(point), max_deg);
    terms
        .iter()
        .map(|t| {
            if t.exponents.len() != point.len() {
                return Err(Error::Dimension {
                    context: "eval_basis term",
                    expected: point.len(),
                    got: t.exponents.len(),
                });
            }
            Ok(powers.monomial(&t.exponents))
        })
        .collect()
}

/// Cached `x_i^k` for `k <= max_deg`.
pub(crate) struct PowerTable {
    stride: usize,
    values: Vec<f64>,
}

impl PowerTable {
    pub(crate) fn new(scaled: &[f64], max_deg: usize) -> Self {
        let stride = max_deg + 1;
        let mut values = vec![1.0; scaled.len() * stride];
        for (i, &x) in scaled.iter().enumerate() {
            for k in 1..stride {
                values[i * stride + k] = values[i * stride + k - 1] * x;
            }
        }
        PowerTable { stride, values }
    }

    #[inline]
    pub(crate) fn pow(&self, var: usize, exp: u32) -> f64 {
        self.values[var * self.stride + exp as usize]
    }

    #[inline]
    pub(crate) fn monomial(&self, exponents: &[u32]) -> f64 {
        exponents.iter().enumerate().fold(
            1.0,
            |acc, (i, &e)| if e == 0 { acc } else { acc * self.pow(i, e) },
        )
    }
}

/// Dense univariate polynomial, coefficients in ascending degree.
///
/// Trailing exact zeros are trimmed on construction; the zero polynomial has
/// no coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UniPoly {
    coeffs: Vec<f64>,
}

impl UniPoly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        UniPoly { coeffs }
    }

    pub fn zero() -> Self {
        UniPoly { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        UniPoly::new(vec![c])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> UniPoly {
        UniPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn add(&self, other: &UniPoly) -> UniPoly {
        let len = self.coeffs.len().max(other.coeffs.len());
        let at = |p: &UniPoly, k: usize| p.coeffs.get(k).copied().unwrap_or(0.0);
        UniPoly::new((0..len).map(|k| at(self, k) + at(other, k)).collect())
    }

    pub fn scale(&self, s: f64) -> UniPoly {
        UniPoly::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn mul(&self, other: &UniPoly) -> UniPoly {
        if self.is_zero() || other.is_zero() {
            return UniPoly::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        UniPoly::new(out)
    }

    /// `p(a + b x)`, expanded by Horner's scheme.
    pub fn compose_affine(&self, a: f64, b: f64) -> UniPoly {
        let inner = UniPoly::new(vec![a, b]);
        self.coeffs.iter().rev().fold(UniPoly::zero(), |acc, &c| {
            acc.mul(&inner).add(&UniPoly::constant(c))
        })
    }

    /// Real roots in `[lo, hi]`, sorted and deduplicated.
    ///
    /// The interval is mapped onto `[-1, 1]` first; roots are the real
    /// eigenvalues of the companion matrix of the monic normalized
    /// polynomial, refined by a few guarded Newton steps. Roots within
    /// `1e-9 * (hi - lo)` outside the interval are clamped onto it.
    pub fn real_roots(&self, lo: f64, hi: f64) -> Result<Vec<f64>> {
        ensure_finite(&self.coeffs, "polynomial coefficients")?;
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::NonFinite("root interval"));
        }
        if lo > hi {
            return Err(Error::InvalidParameter(format!(
                "root interval [{lo}, {hi}] is empty"
            )));
        }
        if self.is_zero() {
            return Ok(Vec::new());
        }

        let center = 0.5 * (lo + hi);
        let half = if hi > lo { 0.5 * (hi - lo) } else { 1.0 };
        let local = strip_leading(self.compose_affine(center, half).coeffs);
        if local.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("scaled polynomial coefficients"));
        }

        let local_roots: Vec<f64> = match local.len() {
            0 | 1 => Vec::new(),
            2 => vec![-local[0] / local[1]],
            _ => companion_real_eigenvalues(&local),
        };

        let width = hi - lo;
        let tol = ROOT_DEDUP_REL * if width > 0.0 { width } else { 1.0 };
        let local_poly = UniPoly::new(local);
        let mut roots: Vec<f64> = local_roots
            .into_iter()
            .map(|s| polish_newton(&local_poly, s))
            .map(|s| center + half * s)
            .filter(|x| *x >= lo - tol && *x <= hi + tol)
            .map(|x| x.clamp(lo, hi))
            .collect();
        roots.sort_by(f64::total_cmp);
        roots.dedup_by(|a, b| (*a - *b).abs() <= tol);
        Ok(roots)
    }
}

fn strip_leading(mut coeffs: Vec<f64>) -> Vec<f64> {
    let max = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if max == 0.0 {
        return Vec::new();
    }
    while let Some(&last) = coeffs.last() {
        if last.abs() < LEADING_COEFF_REL * max {
            coeffs.pop();
        } else {
            break;
        }
    }
    coeffs
}

fn companion_real_eigenvalues(coeffs: &[f64]) -> Vec<f64> {
    let deg = coeffs.len() - 1;
    let lead = coeffs[deg];
    let mut companion = DMatrix::<f64>::zeros(deg, deg);
    for i in 1..deg {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        companion[(i, deg - 1)] = -coeffs[i] / lead;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= REAL_ROOT_IMAG_TOL * (1.0 + z.re.abs()))
        .map(|z| z.re)
        .collect()
}

/// Newton refinement that only accepts steps reducing `|p|`.
fn polish_newton(p: &UniPoly, mut x: f64) -> f64 {
    let dp = p.derivative();
    let mut fx = p.eval(x).abs();
    for _ in 0..8 {
        if fx == 0.0 {
            break;
        }
        let slope = dp.eval(x);
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let next = x - p.eval(x) / slope;
        let fnext = p.eval(next).abs();
        if !(fnext < fx) || (next - x).abs() > 0.1 {
            break;
        }
        x = next;
        fx = fnext;
    }
    x
}
