//! Set-membership estimate of the controller/model cascade gain and the
//! closed-loop stability check `Gamma_y < 1 - gamma_y`.
//!
//! The controller is replayed along the measured trajectory, fed the
//! measured next output as reference. The deviation of the model prediction
//! from that reference, as a function of the window of past measured outputs,
//! is the data set whose minimal validated Lipschitz constant estimates the
//! cascade gain.

use serde::{Deserialize, Serialize};

use crate::consts::GAMMA_HAT_DELTA;
use crate::error::{Error, Result};
use crate::identify::{y_window, DataSet};
use crate::invert::{control, ControllerConfig};
use crate::model::PolyModel;

/// Pairs `(window, value)` with a noise bound `epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaDataSet {
    pub windows: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub epsilon: f64,
}

impl GammaDataSet {
    pub fn new(windows: Vec<Vec<f64>>, values: Vec<f64>, epsilon: f64) -> Result<Self> {
        if windows.len() != values.len() {
            return Err(Error::Dimension {
                context: "validation data values",
                expected: windows.len(),
                got: values.len(),
            });
        }
        if let Some(first) = windows.first() {
            if let Some(w) = windows.iter().find(|w| w.len() != first.len()) {
                return Err(Error::Dimension {
                    context: "validation window",
                    expected: first.len(),
                    got: w.len(),
                });
            }
        }
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be >= 0, got {epsilon}"
            )));
        }
        Ok(GammaDataSet {
            windows,
            values,
            epsilon,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn window_len(&self) -> usize {
        self.windows.first().map_or(0, Vec::len)
    }
}

/// Closed-loop replay of the controller along a measured trajectory.
#[derive(Debug, Clone)]
pub struct ClosedLoopData {
    pub set: GammaDataSet,
    /// Model prediction `f(y-window, u_nl-window)` per emitted pair.
    pub predictions: Vec<f64>,
    /// Reference fed to the controller (the measured next output).
    pub references: Vec<f64>,
    /// Sample index of each pair's window head.
    pub times: Vec<usize>,
    /// Controller output for every sample; the first `n` are the measured
    /// inputs used as warm-up.
    pub commands: Vec<f64>,
}

/// Builds the validation data from a closed-loop replay.
///
/// For sample `i` the controller sees reference `y[i+1]` and regressor
/// `(y[i], .., y[i-n+1], u_nl[i-1], .., u_nl[i-n+1])`; the prediction is the
/// model output at that regressor and the chosen command. Pairs are emitted
/// for `i = m ..= L-2` with window `(y[i], .., y[i-m+1])` and value
/// `prediction - reference`.
pub fn closed_loop_prediction_data(
    model: &PolyModel,
    cfg: &ControllerConfig,
    data: &DataSet,
    m: usize,
    epsilon: f64,
) -> Result<ClosedLoopData> {
    let n = model.order;
    if m <= n {
        return Err(Error::InvalidParameter(format!(
            "window length m = {m} must exceed the model order {n}"
        )));
    }
    let len = data.len();
    if len < m + 2 {
        return Err(Error::InsufficientData(format!(
            "window length {m} needs at least {} samples, got {len}",
            m + 2
        )));
    }

    let mut commands = data.u[..n].to_vec();
    let mut predictions = Vec::with_capacity(len - m - 1);
    let mut references = Vec::with_capacity(len - m - 1);
    let mut windows = Vec::with_capacity(len - m - 1);
    let mut times = Vec::with_capacity(len - m - 1);
    for i in n..len - 1 {
        let mut q = y_window(data, i, n);
        q.extend((1..n).map(|j| commands[i - j]));
        let reference = data.y[i + 1];
        let u = control(model, &q, reference, cfg)?;
        commands.push(u);
        if i >= m {
            predictions.push(model.eval_qu(&q, u)?);
            references.push(reference);
            windows.push(y_window(data, i, m));
            times.push(i);
        }
    }
    let values = predictions
        .iter()
        .zip(&references)
        .map(|(p, r)| p - r)
        .collect();
    Ok(ClosedLoopData {
        set: GammaDataSet::new(windows, values, epsilon)?,
        predictions,
        references,
        times,
        commands,
    })
}

fn inf_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Upper envelope `min_t (v_t + eps + Gamma ||w - w_t||_inf)`.
pub fn f_bar(gamma: f64, w: &[f64], ds: &GammaDataSet) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::InsufficientData(
            "validation data set is empty".into(),
        ));
    }
    if w.len() != ds.window_len() {
        return Err(Error::Dimension {
            context: "f_bar window",
            expected: ds.window_len(),
            got: w.len(),
        });
    }
    Ok(ds
        .windows
        .iter()
        .zip(&ds.values)
        .map(|(wt, v)| v + ds.epsilon + gamma * inf_distance(w, wt))
        .fold(f64::INFINITY, f64::min))
}

/// Sufficient validation condition: `f_bar(Gamma, w_t) > v_t - eps` for
/// every sample.
///
/// A sample's own envelope term always clears its lower bound when
/// `eps > 0`, so only the other samples are compared; this keeps the test
/// meaningful for `eps = 0`. The pairwise form `Gamma d > dv - 2 eps` is
/// evaluated directly. Coincident windows need `dv <= 2 eps`.
pub fn check_validated(gamma: f64, ds: &GammaDataSet) -> bool {
    let n = ds.len();
    let eps2 = 2.0 * ds.epsilon;
    let violated = crate::par::map_range(n, |t| {
        (0..n).any(|k| {
            if k == t {
                return false;
            }
            let dv = ds.values[t] - ds.values[k] - eps2;
            let d = inf_distance(&ds.windows[t], &ds.windows[k]);
            if d == 0.0 {
                dv > 0.0
            } else {
                gamma * d <= dv
            }
        })
    });
    !violated.into_iter().any(|v| v)
}

/// Minimal validated Lipschitz constant.
///
/// `max(0, max_{k != t, w_k != w_t} (v_k - v_t - 2 eps) / ||w_k - w_t||_inf)`,
/// or `inf` when two coincident windows differ by more than `2 eps`.
pub fn gamma_min(ds: &GammaDataSet) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::InsufficientData(
            "validation data set is empty".into(),
        ));
    }
    let n = ds.len();
    let eps2 = 2.0 * ds.epsilon;
    let worst = crate::par::max_range(n, |t| {
        (0..n)
            .filter(|&k| k != t)
            .map(|k| {
                let dv = ds.values[t] - ds.values[k] - eps2;
                let d = inf_distance(&ds.windows[t], &ds.windows[k]);
                if d == 0.0 {
                    if dv > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    dv / d
                }
            })
            .fold(0.0, f64::max)
    });
    Ok(worst.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// `Gamma_hat < 1 - gamma_y`.
    ValidatedStable,
    /// A finite constant is validated but the margin is not positive.
    ValidatedUnstable,
    /// No finite Lipschitz constant is consistent with the data.
    Invalidated,
}

/// Validation outcome at one `mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuPoint {
    pub mu: f64,
    pub gamma_min: f64,
    pub gamma_hat: f64,
    pub margin: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub mu: f64,
    pub gamma_min: f64,
    pub gamma_hat: f64,
    pub epsilon: f64,
    pub gamma_y: f64,
    /// `1 - gamma_y - gamma_hat`.
    pub margin: f64,
    pub verdict: Verdict,
    pub window: usize,
    /// Every grid point, ascending in `mu`.
    pub grid: Vec<MuPoint>,
}

/// Classifies the stability condition at a given minimal constant.
pub fn assess(gamma_min: f64, gamma_y: f64) -> (f64, f64, Verdict) {
    let gamma_hat = gamma_min * (1.0 + GAMMA_HAT_DELTA);
    let margin = 1.0 - gamma_y - gamma_hat;
    let verdict = if !gamma_min.is_finite() {
        Verdict::Invalidated
    } else if margin > 0.0 {
        Verdict::ValidatedStable
    } else {
        Verdict::ValidatedUnstable
    };
    (gamma_hat, margin, verdict)
}

/// Evaluates the stability margin over `mu_grid` and picks the largest `mu`
/// such that it and every smaller grid value satisfy the margin. Falls back
/// to the `mu = 0` report (or the smallest grid value) when none does.
/// With `gamma_y >= 1` no margin exists and every point is
/// validated-unstable.
pub fn select_mu(
    model: &PolyModel,
    cfg: &ControllerConfig,
    data: &DataSet,
    gamma_y: f64,
    m: usize,
    epsilon: f64,
    mu_grid: &[f64],
) -> Result<ValidationReport> {
    if !(gamma_y >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma_y must be >= 0, got {gamma_y}"
        )));
    }
    if mu_grid.is_empty() {
        return Err(Error::InvalidParameter("mu grid is empty".into()));
    }
    if mu_grid.iter().any(|mu| !(*mu >= 0.0) || !mu.is_finite()) {
        return Err(Error::InvalidParameter(
            "mu grid values must be finite and >= 0".into(),
        ));
    }
    let mut grid: Vec<f64> = mu_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let points = crate::par::map_slice(&grid, |&mu| -> Result<MuPoint> {
        let ds = closed_loop_prediction_data(model, &cfg.with_mu(mu), data, m, epsilon)?;
        let gmin = gamma_min(&ds.set)?;
        let (gamma_hat, margin, verdict) = assess(gmin, gamma_y);
        Ok(MuPoint {
            mu,
            gamma_min: gmin,
            gamma_hat,
            margin,
            verdict,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let chosen = points
        .iter()
        .take_while(|p| p.verdict == Verdict::ValidatedStable)
        .last()
        .unwrap_or(&points[0])
        .clone();
    Ok(ValidationReport {
        mu: chosen.mu,
        gamma_min: chosen.gamma_min,
        gamma_hat: chosen.gamma_hat,
        epsilon,
        gamma_y,
        margin: chosen.margin,
        verdict: chosen.verdict,
        window: m,
        grid: points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{AffineScaler, BasisTerm};

    fn scalar_set(points: &[(f64, f64)], eps: f64) -> GammaDataSet {
        GammaDataSet::new(
            points.iter().map(|p| vec![p.0]).collect(),
            points.iter().map(|p| p.1).collect(),
            eps,
        )
        .unwrap()
    }

    fn identity_model() -> PolyModel {
        PolyModel::new(
            1,
            1,
            vec![BasisTerm::new(vec![0, 1])],
            vec![1.0],
            AffineScaler::identity(2),
            1.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn f_bar_single_pair() {
        let ds = scalar_set(&[(0.0, 1.0)], 0.1);
        assert!((f_bar(2.0, &[0.5], &ds).unwrap() - 2.1).abs() < 1e-15);
        assert!(f_bar(2.0, &[0.5], &scalar_set(&[], 0.1)).is_err());
    }

    #[test]
    fn f_bar_at_sample_bounded_by_value() {
        let ds = scalar_set(&[(0.0, 1.0), (1.0, -2.0), (0.3, 0.7)], 0.2);
        for (w, v) in [(0.0, 1.0), (1.0, -2.0), (0.3, 0.7)] {
            assert!(f_bar(5.0, &[w], &ds).unwrap() <= v + 0.2);
        }
    }

    #[test]
    fn f_bar_matches_naive_loop() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let pts: Vec<(f64, f64)> = (0..30)
                .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let ds = scalar_set(&pts, 0.05);
            let w = rng.random_range(-1.0..1.0);
            let mut naive = f64::INFINITY;
            for (x, v) in &pts {
                naive = naive.min(v + 0.05 + 1.5 * (w - x).abs());
            }
            assert_eq!(f_bar(1.5, &[w], &ds).unwrap(), naive);
        }
    }

    #[test]
    fn single_pair_always_validated() {
        let ds = scalar_set(&[(0.3, 5.0)], 0.1);
        for g in [0.0, 1.0, 100.0] {
            assert!(check_validated(g, &ds));
        }
        assert_eq!(gamma_min(&ds).unwrap(), 0.0);
    }

    #[test]
    fn two_pair_threshold() {
        let ds = scalar_set(&[(0.0, 0.0), (1.0, 3.0)], 0.5);
        assert!(!check_validated(2.0, &ds));
        assert!(!check_validated(1.9, &ds));
        assert!(check_validated(2.0001, &ds));
        assert!(check_validated(1e12, &ds));
        assert_eq!(gamma_min(&ds).unwrap(), 2.0);
    }

    #[test]
    fn equal_values_give_zero() {
        let ds = scalar_set(&[(0.0, 1.0), (0.5, 1.0), (2.0, 1.0)], 0.0);
        assert_eq!(gamma_min(&ds).unwrap(), 0.0);
    }

    #[test]
    fn coincident_windows_invalidate() {
        let ds = scalar_set(&[(0.5, 0.0), (0.5, 1.0)], 0.1);
        assert_eq!(gamma_min(&ds).unwrap(), f64::INFINITY);
        assert!(!check_validated(1e12, &ds));
        let (_, _, verdict) = assess(f64::INFINITY, 0.1);
        assert_eq!(verdict, Verdict::Invalidated);
    }

    #[test]
    fn perfect_inversion_replay() {
        // y[t+1] = u[t] and f = u: predictions equal references
        let u: Vec<f64> = (0..40)
            .map(|i| ((i * 7) % 11) as f64 / 11.0 - 0.5)
            .collect();
        let mut y = vec![0.0];
        y.extend_from_slice(&u[..39]);
        let data = DataSet::new(u, y.clone()).unwrap();
        let cfg = ControllerConfig::new(-1.0, 1.0, 0.0).unwrap();
        let cl = closed_loop_prediction_data(&identity_model(), &cfg, &data, 4, 0.0).unwrap();
        assert_eq!(cl.set.len(), 40 - 4 - 1);
        assert_eq!(cl.set.windows[0], vec![y[4], y[3], y[2], y[1]]);
        for (i, (p, r)) in cl.predictions.iter().zip(&cl.references).enumerate() {
            assert!((p - r).abs() < 1e-14);
            assert_eq!(*r, y[cl.times[i] + 1]);
        }
        for i in 1..39 {
            assert!((cl.commands[i] - y[i + 1]).abs() < 1e-14);
        }
    }

    #[test]
    fn pair_count_law() {
        let cfg = ControllerConfig::new(-1.0, 1.0, 0.0).unwrap();
        for (len, m) in [(10usize, 2usize), (25, 7), (50, 3), (12, 9)] {
            let u: Vec<f64> = (0..len).map(|i| (i as f64 * 0.37).sin()).collect();
            let data = DataSet::new(u.clone(), u).unwrap();
            let cl = closed_loop_prediction_data(&identity_model(), &cfg, &data, m, 0.0).unwrap();
            assert_eq!(cl.set.len(), len - m - 1);
        }
    }

    #[test]
    fn window_must_exceed_order() {
        let data = DataSet::new(vec![0.0; 10], vec![0.0; 10]).unwrap();
        let cfg = ControllerConfig::new(-1.0, 1.0, 0.0).unwrap();
        assert!(closed_loop_prediction_data(&identity_model(), &cfg, &data, 1, 0.0).is_err());
        assert!(closed_loop_prediction_data(&identity_model(), &cfg, &data, 9, 0.0).is_err());
    }

    #[test]
    fn select_mu_identity_system_is_stable() {
        let u: Vec<f64> = (0..60)
            .map(|i| ((i * 13) % 17) as f64 / 17.0 - 0.5)
            .collect();
        let mut y = vec![0.0];
        y.extend_from_slice(&u[..59]);
        let data = DataSet::new(u, y).unwrap();
        let cfg = ControllerConfig::new(-1.0, 1.0, 0.0).unwrap();
        let report = select_mu(&identity_model(), &cfg, &data, 0.0, 4, 0.0, &[0.0]).unwrap();
        assert_eq!(report.gamma_min, 0.0);
        assert_eq!(report.verdict, Verdict::ValidatedStable);
        assert_eq!(report.grid.len(), 1);
        let report = select_mu(&identity_model(), &cfg, &data, 1.0, 4, 0.0, &[0.0]).unwrap();
        assert_eq!(report.verdict, Verdict::ValidatedUnstable);
        assert!(select_mu(&identity_model(), &cfg, &data, f64::NAN, 4, 0.0, &[0.0]).is_err());
    }
}
