//! Run configuration, read from a TOML file. Every section and key is
//! optional; unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;

use nic::sim::{ExcitationKind, Plant, PlantKind, PlantTerm, Scenario};
use nic::{ControllerConfig, IdentConfig};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Base seed for excitation and disturbances; `--seed` overrides it.
    pub seed: u64,
    pub data: DataSection,
    /// Model file read by `validate` and `simulate`; defaults to
    /// `<out>/model.toml`.
    pub model: Option<PathBuf>,
    pub plant: PlantSection,
    pub excitation: ExcitationSection,
    pub identification: IdentConfig,
    pub controller: ControllerSection,
    pub validation: ValidationSection,
    #[serde(rename = "scenario")]
    pub scenarios: Vec<Scenario>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Data CSV read by `identify` and `validate`; defaults to
    /// `<out>/data.csv`.
    pub path: Option<PathBuf>,
    /// Samples written by `generate-data`.
    pub length: usize,
    pub sample_time: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            path: None,
            length: 500,
            sample_time: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSection {
    /// `stiff-corner`, `piecewise` or `polynomial`.
    pub kind: String,
    /// Order of a `polynomial` plant.
    pub order: usize,
    pub terms: Vec<PlantTerm>,
    /// Bound on the additive disturbance.
    pub disturbance: f64,
    /// Output history before the first sample.
    pub initial_output: f64,
}

impl Default for PlantSection {
    fn default() -> Self {
        PlantSection {
            kind: "stiff-corner".into(),
            order: 1,
            terms: Vec::new(),
            disturbance: 0.0,
            initial_output: 0.0,
        }
    }
}

impl PlantSection {
    pub fn build(&self) -> anyhow::Result<Plant> {
        let plant = match self.kind.as_str() {
            "polynomial" => Plant::new(
                PlantKind::Polynomial {
                    order: self.order,
                    terms: self.terms.clone(),
                },
                self.disturbance,
            )?,
            name => {
                if !self.terms.is_empty() {
                    bail!("plant terms are only allowed for kind = \"polynomial\"");
                }
                Plant::named(name, self.disturbance)?
            }
        };
        Ok(plant)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExcitationSection {
    pub kind: ExcitationKind,
    pub u_lo: f64,
    pub u_hi: f64,
}

impl Default for ExcitationSection {
    fn default() -> Self {
        ExcitationSection {
            kind: ExcitationKind::Uniform,
            u_lo: -1.0,
            u_hi: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub u_lo: f64,
    pub u_hi: f64,
    /// Command weight used by `simulate`; the validated value is used when
    /// unset and a validation report exists in the output directory.
    pub mu: Option<f64>,
}

impl Default for ControllerSection {
    fn default() -> Self {
        ControllerSection {
            u_lo: -1.0,
            u_hi: 1.0,
            mu: None,
        }
    }
}

impl ControllerSection {
    pub fn build(&self, mu: f64) -> anyhow::Result<ControllerConfig> {
        Ok(ControllerConfig::new(self.u_lo, self.u_hi, mu)?)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSection {
    /// Window length `m`; `4 n` when unset.
    pub window: Option<usize>,
    /// Noise bound; `eta * rho` from the model file when unset.
    pub epsilon: Option<f64>,
    pub mu_grid: Vec<f64>,
}

impl Default for ValidationSection {
    fn default() -> Self {
        ValidationSection {
            window: None,
            epsilon: None,
            mu_grid: vec![0.0, 0.001, 0.01, 0.1, 1.0],
        }
    }
}

impl RunConfig {
    /// Reads the file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        resolve(&mut cfg.data.path);
        resolve(&mut cfg.model);
        Ok(cfg)
    }

    pub fn data_path(&self, out: &Path) -> PathBuf {
        self.data
            .path
            .clone()
            .unwrap_or_else(|| out.join("data.csv"))
    }

    pub fn model_path(&self, out: &Path) -> PathBuf {
        self.model.clone().unwrap_or_else(|| out.join("model.toml"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg.identification, IdentConfig::default());
        assert_eq!(cfg.validation.mu_grid.len(), 5);
        assert!(cfg.scenarios.is_empty());
    }

    #[test]
    fn full_config_parses() {
        let text = r#"
            seed = 3
            model = "m.toml"
            [data]
            length = 100
            [plant]
            kind = "polynomial"
            order = 1
            terms = [{ coeff = 0.5, y_exps = [1] }, { coeff = 0.3, u_exps = [1] }]
            [excitation]
            kind = "multisine"
            [identification]
            degree = 2
            rho_init = 1.1
            [controller]
            mu = 0.01
            [validation]
            window = 6
            mu_grid = [0.0, 0.1]
            [[scenario]]
            name = "steps"
            horizon = 50
            reference = { kind = "steps", levels = [0.1, -0.1], period = 10 }
        "#;
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.identification.degree, 2);
        assert_eq!(
            cfg.identification.max_order,
            IdentConfig::default().max_order
        );
        assert_eq!(cfg.scenarios.len(), 1);
        assert!(cfg.plant.build().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[controller]\nmu_max = 1").is_err());
        assert!(toml::from_str::<RunConfig>("colour = 1").is_err());
    }
}
