//! Plants, excitation signals, closed-loop runs and tracking metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::consts::DIVERGENCE_LIMIT;
use crate::error::{Error, Result};
use crate::identify::DataSet;
use crate::invert::{decide, ControllerConfig};
use crate::model::PolyModel;

/// A monomial of a polynomial plant in raw variables:
/// `coeff * prod y[t-j]^y_exps[j] * prod u[t-j]^u_exps[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantTerm {
    pub coeff: f64,
    #[serde(default)]
    pub y_exps: Vec<u32>,
    #[serde(default)]
    pub u_exps: Vec<u32>,
}

/// Update rule `y[t+1] = g(y-window, u-window) + xi[t]`.
#[derive(Debug, Clone, PartialEq)]
pub enum PlantKind {
    /// Polynomial NARX with configurable terms.
    Polynomial { order: usize, terms: Vec<PlantTerm> },
    /// Synthetic second-order system with a stiffening cubic restoring term
    /// and a cubic input nonlinearity:
    /// `y+ = 0.6 y - 0.15 y1 - 0.1 y^3 + 0.5 u + 0.2 u^3 - 0.05 u1`.
    StiffCorner,
    /// First-order system with a piecewise-linear input gain that flattens
    /// beyond `|u| = 0.5`: `y+ = 0.6 y + h(u)`.
    Piecewise,
    /// An identified model used as the plant.
    Model(PolyModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub kind: PlantKind,
    /// Additive disturbances are drawn from `[-xi_bound, xi_bound]`.
    pub xi_bound: f64,
}

impl Plant {
    pub fn new(kind: PlantKind, xi_bound: f64) -> Result<Self> {
        if !(xi_bound >= 0.0 && xi_bound.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "disturbance bound must be finite and >= 0, got {xi_bound}"
            )));
        }
        if let PlantKind::Polynomial { order, terms } = &kind {
            if *order == 0 {
                return Err(Error::InvalidParameter("plant order must be >= 1".into()));
            }
            for t in terms {
                if t.y_exps.len() > *order || t.u_exps.len() > *order {
                    return Err(Error::InvalidParameter(format!(
                        "plant term exponent list longer than order {order}"
                    )));
                }
            }
        }
        Ok(Plant { kind, xi_bound })
    }

    /// Looks up a built-in plant by name.
    pub fn named(name: &str, xi_bound: f64) -> Result<Self> {
        let kind = match name {
            "stiff-corner" => PlantKind::StiffCorner,
            "piecewise" => PlantKind::Piecewise,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown plant '{other}' (built-in: stiff-corner, piecewise)"
                )))
            }
        };
        Plant::new(kind, xi_bound)
    }

    pub fn order(&self) -> usize {
        match &self.kind {
            PlantKind::Polynomial { order, .. } => *order,
            PlantKind::StiffCorner => 2,
            PlantKind::Piecewise => 1,
            PlantKind::Model(m) => m.order,
        }
    }

    /// `g` without disturbance. Windows are most-recent first, length
    /// [`Plant::order`].
    pub fn g(&self, y: &[f64], u: &[f64]) -> f64 {
        match &self.kind {
            PlantKind::Polynomial { terms, .. } => terms
                .iter()
                .map(|t| {
                    let py: f64 = t
                        .y_exps
                        .iter()
                        .zip(y)
                        .map(|(&e, v)| v.powi(e as i32))
                        .product();
                    let pu: f64 = t
                        .u_exps
                        .iter()
                        .zip(u)
                        .map(|(&e, v)| v.powi(e as i32))
                        .product();
                    t.coeff * py * pu
                })
                .sum(),
            PlantKind::StiffCorner => {
                0.6 * y[0] - 0.15 * y[1] - 0.1 * y[0].powi(3) + 0.5 * u[0] + 0.2 * u[0].powi(3)
                    - 0.05 * u[1]
            }
            PlantKind::Piecewise => {
                let v = u[0];
                let h = if v.abs() <= 0.5 {
                    v
                } else {
                    v.signum() * (0.5 + 0.25 * (v.abs() - 0.5))
                };
                0.6 * y[0] + h
            }
            PlantKind::Model(m) => {
                let mut point = y.to_vec();
                point.extend_from_slice(u);
                m.eval(&point).unwrap_or(f64::NAN)
            }
        }
    }

    pub fn step(&self, y: &[f64], u: &[f64], xi: f64) -> f64 {
        self.g(y, u) + xi
    }

    /// `len` i.i.d. uniform disturbance samples in the plant's box.
    pub fn disturbances(&self, len: usize, seed: u64) -> Vec<f64> {
        if self.xi_bound == 0.0 {
            return vec![0.0; len];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len)
            .map(|_| rng.random_range(-self.xi_bound..=self.xi_bound))
            .collect()
    }
}

/// Shifts `value` into a most-recent-first window.
fn push_front(window: &mut [f64], value: f64) {
    window.rotate_right(1);
    window[0] = value;
}

/// Iterates the plant from the initial output window `y0` (most recent
/// first); inputs before time 0 are zero. Returns `y[0..=len]`.
pub fn simulate_open_loop(plant: &Plant, u: &[f64], xi: &[f64], y0: &[f64]) -> Result<Vec<f64>> {
    let n = plant.order();
    if y0.len() != n {
        return Err(Error::Dimension {
            context: "initial output window",
            expected: n,
            got: y0.len(),
        });
    }
    if xi.len() != u.len() {
        return Err(Error::Dimension {
            context: "disturbance sequence",
            expected: u.len(),
            got: xi.len(),
        });
    }
    let mut yw = y0.to_vec();
    let mut uw = vec![0.0; n];
    let mut out = Vec::with_capacity(u.len() + 1);
    out.push(y0[0]);
    for (t, (&ut, &xt)) in u.iter().zip(xi).enumerate() {
        push_front(&mut uw, ut);
        let next = plant.step(&yw, &uw, xt);
        if !next.is_finite() || next.abs() > DIVERGENCE_LIMIT {
            return Err(Error::InvalidParameter(format!(
                "plant diverged at step {t}"
            )));
        }
        push_front(&mut yw, next);
        out.push(next);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExcitationKind {
    /// i.i.d. uniform samples.
    Uniform,
    /// Sum of sines under a slow amplitude envelope.
    Multisine,
    /// Piecewise-constant uniform levels with random hold times.
    RandomSteps,
}

/// Deterministic excitation signal inside `[u_lo, u_hi]`.
pub fn generate_excitation(
    kind: ExcitationKind,
    len: usize,
    u_lo: f64,
    u_hi: f64,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mid = 0.5 * (u_lo + u_hi);
    let half = 0.5 * (u_hi - u_lo);
    if half <= 0.0 {
        return vec![u_lo; len];
    }
    let draw = |rng: &mut ChaCha8Rng| rng.random_range(u_lo..=u_hi);
    match kind {
        ExcitationKind::Uniform => (0..len).map(|_| draw(&mut rng)).collect(),
        ExcitationKind::RandomSteps => {
            let mut out = Vec::with_capacity(len);
            while out.len() < len {
                let level = draw(&mut rng);
                let hold = rng.random_range(1..=10usize);
                out.extend(std::iter::repeat_n(level, hold.min(len - out.len())));
            }
            out
        }
        ExcitationKind::Multisine => {
            let tones = 8;
            let freqs: Vec<f64> = (0..tones).map(|_| rng.random_range(0.01..0.45)).collect();
            let phases: Vec<f64> = (0..tones)
                .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                .collect();
            let env_freq = rng.random_range(0.002..0.02);
            (0..len)
                .map(|t| {
                    let t = t as f64;
                    let s: f64 = freqs
                        .iter()
                        .zip(&phases)
                        .map(|(f, p)| (std::f64::consts::TAU * f * t + p).sin())
                        .sum::<f64>()
                        / tones as f64;
                    let env = 0.6 + 0.4 * (std::f64::consts::TAU * env_freq * t).sin();
                    // |s| <= 1 and env <= 1, so the product stays in range
                    (mid + half * (2.5 * s).tanh() * env).clamp(u_lo, u_hi)
                })
                .collect()
        }
    }
}

/// Open-loop experiment producing an identification data set of `len`
/// samples: `y[i+1]` responds to `u[i]`.
pub fn generate_data(plant: &Plant, u: Vec<f64>, y0: &[f64], seed: u64) -> Result<DataSet> {
    let xi = plant.disturbances(u.len(), seed);
    let y = simulate_open_loop(plant, &u, &xi, y0)?;
    DataSet::new(u.clone(), y[..u.len()].to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Reference {
    Constant {
        value: f64,
    },
    /// Cycles through `levels`, holding each for `period` steps.
    Steps {
        levels: Vec<f64>,
        period: usize,
    },
    Sinusoid {
        amplitude: f64,
        period: f64,
        #[serde(default)]
        offset: f64,
    },
    /// First-order low-pass of uniform noise in `[-amplitude, amplitude]`.
    FilteredRandom {
        amplitude: f64,
        smoothing: f64,
        seed: u64,
    },
}

impl Reference {
    /// Samples `r[0..len]`.
    pub fn generate(&self, len: usize) -> Vec<f64> {
        match self {
            Reference::Constant { value } => vec![*value; len],
            Reference::Steps { levels, period } => (0..len)
                .map(|t| levels[(t / (*period).max(1)) % levels.len()])
                .collect(),
            Reference::Sinusoid {
                amplitude,
                period,
                offset,
            } => (0..len)
                .map(|t| offset + amplitude * (std::f64::consts::TAU * t as f64 / period).sin())
                .collect(),
            Reference::FilteredRandom {
                amplitude,
                smoothing,
                seed,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut state = 0.0;
                (0..len)
                    .map(|_| {
                        let v: f64 = rng.random_range(-*amplitude..=*amplitude);
                        state = smoothing * state + (1.0 - smoothing) * v;
                        state
                    })
                    .collect()
            }
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(format!("reference {what} must be finite"))
            }
        };
        match self {
            Reference::Constant { value } => finite(*value, "value"),
            Reference::Steps { levels, period } => {
                if levels.is_empty() || *period == 0 {
                    return Err("step reference needs levels and a period >= 1".into());
                }
                levels.iter().try_for_each(|v| finite(*v, "level"))
            }
            Reference::Sinusoid {
                amplitude,
                period,
                offset,
            } => {
                finite(*amplitude, "amplitude")?;
                finite(*offset, "offset")?;
                if !(*period > 0.0) {
                    return Err("sinusoid period must be > 0".into());
                }
                Ok(())
            }
            Reference::FilteredRandom {
                amplitude,
                smoothing,
                ..
            } => {
                finite(*amplitude, "amplitude")?;
                if !(0.0..1.0).contains(smoothing) {
                    return Err("smoothing must be in [0, 1)".into());
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Output history before time 0.
    #[serde(default)]
    pub initial_output: f64,
    pub reference: Reference,
    pub horizon: usize,
    #[serde(default)]
    pub disturbance_seed: u64,
}

impl Scenario {
    /// All problems with the scenario, empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.horizon == 0 {
            out.push(format!("scenario '{}': horizon must be >= 1", self.name));
        }
        if !self.initial_output.is_finite() {
            out.push(format!(
                "scenario '{}': initial output must be finite",
                self.name
            ));
        }
        if let Err(e) = self.reference.validate() {
            out.push(format!("scenario '{}': {e}", self.name));
        }
        out
    }
}

/// Row `t` pairs the command `u[t]` with the output `y[t+1]` it produced and
/// the reference `r[t+1]` it aimed at.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub r: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub xi: Vec<f64>,
    pub cost: Vec<f64>,
    pub saturated: Vec<bool>,
    /// Step at which the output left the finite range, if it did.
    pub diverged_at: Option<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Runs the inversion controller against `plant` for one scenario.
///
/// Divergence truncates the trajectory and sets `diverged_at`; it is not an
/// error.
pub fn run_closed_loop(
    plant: &Plant,
    model: &PolyModel,
    cfg: &ControllerConfig,
    scenario: &Scenario,
) -> Result<Trajectory> {
    cfg.validate()?;
    if let Some(p) = scenario.problems().into_iter().next() {
        return Err(Error::InvalidParameter(p));
    }
    let n_plant = plant.order();
    let n_model = model.order;
    let hist = n_plant.max(n_model);
    let mut yw = vec![scenario.initial_output; hist];
    let mut uw = vec![0.0; hist];
    let reference = scenario.reference.generate(scenario.horizon + 1);
    let xi = plant.disturbances(scenario.horizon, scenario.disturbance_seed);

    let mut traj = Trajectory::default();
    for t in 0..scenario.horizon {
        let mut q = yw[..n_model].to_vec();
        q.extend_from_slice(&uw[..n_model - 1]);
        let decision = decide(model, &q, reference[t + 1], cfg)?;
        push_front(&mut uw, decision.u);
        let next = plant.step(&yw[..n_plant], &uw[..n_plant], xi[t]);
        traj.r.push(reference[t + 1]);
        traj.u.push(decision.u);
        traj.xi.push(xi[t]);
        traj.cost.push(decision.cost);
        traj.saturated.push(decision.saturated);
        if !next.is_finite() || next.abs() > DIVERGENCE_LIMIT {
            traj.y.push(next);
            traj.diverged_at = Some(t);
            break;
        }
        traj.y.push(next);
        push_front(&mut yw, next);
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rms_error: f64,
    pub max_error: f64,
    /// `sum u^2`.
    pub command_energy: f64,
    /// Fraction of steps with the command on a bound.
    pub saturation_duty: f64,
    pub steps: usize,
    pub diverged: bool,
}

pub fn metrics(traj: &Trajectory) -> Result<Metrics> {
    if traj.is_empty() {
        return Err(Error::InsufficientData("empty trajectory".into()));
    }
    let errors: Vec<f64> = traj.y.iter().zip(&traj.r).map(|(y, r)| y - r).collect();
    let steps = errors.len();
    Ok(Metrics {
        rms_error: (errors.iter().map(|e| e * e).sum::<f64>() / steps as f64).sqrt(),
        max_error: errors.iter().fold(0.0, |m, e| m.max(e.abs())),
        command_energy: traj.u.iter().map(|u| u * u).sum(),
        saturation_duty: traj.saturated.iter().filter(|s| **s).count() as f64 / steps as f64,
        steps,
        diverged: traj.diverged_at.is_some(),
    })
}

/// Runs independent scenarios, in parallel when enabled. Results keep the
/// input order.
pub fn run_scenarios(
    plant: &Plant,
    model: &PolyModel,
    cfg: &ControllerConfig,
    scenarios: &[Scenario],
) -> Vec<Result<Trajectory>> {
    crate::par::map_slice(scenarios, |s| run_closed_loop(plant, model, cfg, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{AffineScaler, BasisTerm};

    fn linear_plant(a: f64, b: f64) -> Plant {
        Plant::new(
            PlantKind::Polynomial {
                order: 1,
                terms: vec![
                    PlantTerm {
                        coeff: a,
                        y_exps: vec![1],
                        u_exps: vec![],
                    },
                    PlantTerm {
                        coeff: b,
                        y_exps: vec![],
                        u_exps: vec![1],
                    },
                ],
            },
            0.0,
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
    fn geometric_decay() {
        let plant = linear_plant(0.5, 1.0);
        let y = simulate_open_loop(&plant, &[0.0; 10], &[0.0; 10], &[1.0]).unwrap();
        for (t, v) in y.iter().enumerate() {
            assert_eq!(*v, 0.5f64.powi(t as i32));
        }
    }

    #[test]
    fn zero_map_plant() {
        let plant = Plant::new(
            PlantKind::Polynomial {
                order: 1,
                terms: vec![],
            },
            0.0,
        )
        .unwrap();
        let y = simulate_open_loop(&plant, &[1.0; 5], &[0.0; 5], &[3.0]).unwrap();
        assert_eq!(y[0], 3.0);
        assert!(y[1..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn polynomial_plant_matches_hand_recursion() {
        let plant = Plant::new(
            PlantKind::Polynomial {
                order: 2,
                terms: vec![
                    PlantTerm {
                        coeff: 0.4,
                        y_exps: vec![1],
                        u_exps: vec![],
                    },
                    PlantTerm {
                        coeff: -0.2,
                        y_exps: vec![0, 1],
                        u_exps: vec![],
                    },
                    PlantTerm {
                        coeff: 0.3,
                        y_exps: vec![],
                        u_exps: vec![1, 1],
                    },
                    PlantTerm {
                        coeff: 0.1,
                        y_exps: vec![2],
                        u_exps: vec![1],
                    },
                ],
            },
            0.0,
        )
        .unwrap();
        let u = generate_excitation(ExcitationKind::Uniform, 50, -1.0, 1.0, 4);
        let xi: Vec<f64> = (0..50).map(|t| 0.001 * (t as f64).cos()).collect();
        let y = simulate_open_loop(&plant, &u, &xi, &[0.2, -0.1]).unwrap();
        let (mut y1, mut y0, mut u_prev) = (0.2, -0.1, 0.0);
        for t in 0..50 {
            let next = 0.4 * y1 - 0.2 * y0 + 0.3 * u[t] * u_prev + 0.1 * y1 * y1 * u[t] + xi[t];
            assert!((next - y[t + 1]).abs() < 1e-15);
            y0 = y1;
            y1 = next;
            u_prev = u[t];
        }
    }

    #[test]
    fn divergence_reported_with_step() {
        let plant = linear_plant(10.0, 0.0);
        let err = simulate_open_loop(&plant, &[0.0; 40], &[0.0; 40], &[1.0]).unwrap_err();
        assert!(err.to_string().contains("step 8"));
    }

    #[test]
    fn excitation_properties() {
        assert!(
            generate_excitation(ExcitationKind::Uniform, 20, 0.3, 0.3, 1)
                .iter()
                .all(|v| *v == 0.3)
        );
        for kind in [
            ExcitationKind::Uniform,
            ExcitationKind::Multisine,
            ExcitationKind::RandomSteps,
        ] {
            let a = generate_excitation(kind, 500, -2.0, 1.0, 42);
            let b = generate_excitation(kind, 500, -2.0, 1.0, 42);
            assert_eq!(a, b);
            assert_eq!(a.len(), 500);
            assert!(a.iter().all(|v| (-2.0..=1.0).contains(v)));
        }
        let u = generate_excitation(ExcitationKind::Uniform, 10_000, -1.0, 1.0, 3);
        let (lo, hi) = u
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(*v), b.max(*v))
            });
        assert!((hi - lo) >= 0.95 * 2.0);
    }

    #[test]
    fn perfect_inversion_tracks_exactly() {
        let plant = linear_plant(0.0, 1.0);
        let cfg = ControllerConfig::new(-1.0, 1.0, 0.0).unwrap();
        let sc = Scenario {
            name: "sine".into(),
            initial_output: 0.0,
            reference: Reference::Sinusoid {
                amplitude: 0.8,
                period: 25.0,
                offset: 0.0,
            },
            horizon: 100,
            disturbance_seed: 0,
        };
        let traj = run_closed_loop(&plant, &identity_model(), &cfg, &sc).unwrap();
        let m = metrics(&traj).unwrap();
        assert!(m.max_error <= 1e-14);
        assert_eq!(traj.len(), 100);
    }

    #[test]
    fn unreachable_reference_saturates() {
        let plant = linear_plant(0.0, 1.0);
        let cfg = ControllerConfig::new(-1.0, 1.0, 0.0).unwrap();
        let sc = Scenario {
            name: "step".into(),
            initial_output: 0.0,
            reference: Reference::Constant { value: 3.0 },
            horizon: 10,
            disturbance_seed: 0,
        };
        let traj = run_closed_loop(&plant, &identity_model(), &cfg, &sc).unwrap();
        assert!(traj.u.iter().all(|u| *u == 1.0));
        assert!(traj.saturated.iter().all(|s| *s));
        assert_eq!(metrics(&traj).unwrap().saturation_duty, 1.0);
    }

    #[test]
    fn divergence_truncates_trajectory() {
        let plant = linear_plant(100.0, 1.0);
        let cfg = ControllerConfig::new(-1.0, 1.0, 0.0).unwrap();
        let sc = Scenario {
            name: "blowup".into(),
            initial_output: 1.0,
            reference: Reference::Constant { value: 0.0 },
            horizon: 50,
            disturbance_seed: 0,
        };
        let traj = run_closed_loop(&plant, &identity_model(), &cfg, &sc).unwrap();
        assert!(traj.diverged_at.is_some());
        assert!(traj.len() < 50);
        assert!(metrics(&traj).unwrap().diverged);
    }

    #[test]
    fn metrics_examples() {
        let traj = Trajectory {
            r: vec![1.0, 2.0, 3.0],
            y: vec![1.0, 2.0, 3.0],
            u: vec![0.0, 1.0, 1.0],
            xi: vec![0.0; 3],
            cost: vec![0.0; 3],
            saturated: vec![false, true, false],
            diverged_at: None,
        };
        let m = metrics(&traj).unwrap();
        assert_eq!(
            (m.rms_error, m.max_error, m.command_energy),
            (0.0, 0.0, 2.0)
        );
        assert!((m.saturation_duty - 1.0 / 3.0).abs() < 1e-15);

        let offset = Trajectory {
            y: vec![1.5, 2.5, 3.5],
            ..traj.clone()
        };
        let m = metrics(&offset).unwrap();
        assert!((m.rms_error - 0.5).abs() < 1e-15 && (m.max_error - 0.5).abs() < 1e-15);
        assert!(metrics(&Trajectory::default()).is_err());
    }

    #[test]
    fn metrics_match_naive_formulas() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 64;
        let traj = Trajectory {
            r: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            y: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            u: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            xi: vec![0.0; n],
            cost: vec![0.0; n],
            saturated: (0..n).map(|_| rng.random_bool(0.3)).collect(),
            diverged_at: None,
        };
        let m = metrics(&traj).unwrap();
        let mut sq = 0.0;
        let mut mx: f64 = 0.0;
        let mut en = 0.0;
        let mut sat = 0;
        for i in 0..n {
            let e = traj.y[i] - traj.r[i];
            sq += e * e;
            mx = mx.max(e.abs());
            en += traj.u[i] * traj.u[i];
            sat += traj.saturated[i] as usize;
        }
        assert!((m.rms_error - (sq / n as f64).sqrt()).abs() < 1e-14);
        assert_eq!(m.max_error, mx);
        assert!((m.command_energy - en).abs() < 1e-12);
        assert_eq!(m.saturation_duty, sat as f64 / n as f64);
    }

    #[test]
    fn scenario_problems_listed() {
        let sc = Scenario {
            name: "bad".into(),
            initial_output: f64::NAN,
            reference: Reference::Steps {
                levels: vec![],
                period: 0,
            },
            horizon: 0,
            disturbance_seed: 0,
        };
        assert_eq!(sc.problems().len(), 3);
    }

    #[test]
    fn closed_loop_is_reproducible() {
        let plant = Plant::named("stiff-corner", 0.01).unwrap();
        let model = identity_model();
        let cfg = ControllerConfig::new(-1.0, 1.0, 0.0).unwrap();
        let sc = Scenario {
            name: "r".into(),
            initial_output: 0.1,
            reference: Reference::FilteredRandom {
                amplitude: 0.5,
                smoothing: 0.8,
                seed: 5,
            },
            horizon: 200,
            disturbance_seed: 77,
        };
        let a = run_closed_loop(&plant, &model, &cfg, &sc).unwrap();
        let b = run_closed_loop(&plant, &model, &cfg, &sc).unwrap();
        assert_eq!(a, b);
        assert!(a.u.iter().all(|u| (-1.0..=1.0).contains(u)));
    }
}
