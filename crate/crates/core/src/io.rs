//! Data CSV, model file and trajectory CSV formats.
//!
//! Data files have the header `t,u,y`. Model files are TOML with a `version`
//! key; unknown keys are rejected.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identify::{DataSet, IdentResult};
use crate::model::PolyModel;
use crate::poly::{AffineScaler, BasisTerm};
use crate::sim::Trajectory;

pub const MODEL_FILE_VERSION: u32 = 1;

const DATA_HEADER: [&str; 3] = ["t", "u", "y"];

fn parse_error(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: line as usize,
        msg: msg.into(),
    }
}

/// Reads a `t,u,y` CSV. Rows must have strictly increasing `t`.
pub fn read_data_csv(path: &Path) -> Result<DataSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_data_csv(&text, path)
}

/// Parses CSV text; `path` is used only for diagnostics.
pub fn parse_data_csv(text: &str, path: &Path) -> Result<DataSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .clone();
    if header.iter().all(str::is_empty) {
        return Err(parse_error(path, 1, "empty file, expected header `t,u,y`"));
    }
    if header.iter().collect::<Vec<_>>() != DATA_HEADER {
        return Err(parse_error(
            path,
            1,
            format!(
                "expected header `t,u,y`, found `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let (mut ts, mut u, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let mut vals = [0.0; 3];
        for (k, v) in vals.iter_mut().enumerate() {
            let field = &record[k];
            *v = field
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| {
                    parse_error(
                        path,
                        line,
                        format!(
                            "column `{}`: `{field}` is not a finite number",
                            DATA_HEADER[k]
                        ),
                    )
                })?;
        }
        if let Some(&prev) = ts.last() {
            if vals[0] <= prev {
                return Err(parse_error(path, line, "t must be strictly increasing"));
            }
        }
        ts.push(vals[0]);
        u.push(vals[1]);
        y.push(vals[2]);
    }
    if ts.is_empty() {
        return Err(parse_error(path, 2, "no data rows"));
    }
    if ts.len() < 2 {
        return Err(parse_error(path, 2, "at least 2 data rows are required"));
    }
    let mut data = DataSet::new(u, y)?;
    data.sample_time = Some(ts[1] - ts[0]);
    Ok(data)
}

/// Writes `t,u,y` with `t = i * sample_time` (1 when unset).
pub fn write_data_csv(path: &Path, data: &DataSet) -> Result<()> {
    let ts = data.sample_time.unwrap_or(1.0);
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(DATA_HEADER).map_err(|e| csv_io(path, e))?;
    for (i, (u, y)) in data.u.iter().zip(&data.y).enumerate() {
        w.write_record([(i as f64 * ts).to_string(), u.to_string(), y.to_string()])
            .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermRecord {
    exponents: Vec<u32>,
    coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScalerRecord {
    offset: Vec<f64>,
    gain: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRecord {
    version: u32,
    order: usize,
    degree: u32,
    rho_y: f64,
    rho_u: f64,
    eta: f64,
    gamma_y: f64,
    rho: f64,
    scaler: ScalerRecord,
    #[serde(default)]
    terms: Vec<TermRecord>,
}

/// A model together with the identification figures needed downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: PolyModel,
    pub eta: f64,
    pub gamma_y: f64,
    pub rho: f64,
}

impl ModelFile {
    pub fn from_result(res: &IdentResult) -> Self {
        ModelFile {
            model: res.model.clone(),
            eta: res.eta,
            gamma_y: res.gamma_y,
            rho: res.rho,
        }
    }

    pub fn residual_bound(&self) -> f64 {
        self.eta * self.rho
    }

    pub fn to_toml(&self) -> String {
        let m = &self.model;
        let rec = ModelRecord {
            version: MODEL_FILE_VERSION,
            order: m.order,
            degree: m.degree,
            rho_y: m.rho_y,
            rho_u: m.rho_u,
            eta: self.eta,
            gamma_y: self.gamma_y,
            rho: self.rho,
            scaler: ScalerRecord {
                offset: m.scaler.offset.clone(),
                gain: m.scaler.gain.clone(),
            },
            terms: m
                .terms
                .iter()
                .zip(&m.coeffs)
                .map(|(t, c)| TermRecord {
                    exponents: t.exponents.clone(),
                    coeff: *c,
                })
                .collect(),
        };
        toml::to_string(&rec).expect("model record is always serializable")
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let bad = |msg: String| Error::ModelFile {
            path: path.to_path_buf(),
            msg,
        };
        let rec: ModelRecord = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        if rec.version != MODEL_FILE_VERSION {
            return Err(bad(format!(
                "unsupported model file version {} (this build reads version {MODEL_FILE_VERSION})",
                rec.version
            )));
        }
        if rec.scaler.offset.len() != rec.scaler.gain.len() {
            return Err(bad("scaler offset and gain lengths differ".into()));
        }
        let (terms, coeffs) = rec
            .terms
            .into_iter()
            .map(|t| (BasisTerm::new(t.exponents), t.coeff))
            .unzip();
        let scaler = AffineScaler {
            offset: rec.scaler.offset,
            gain: rec.scaler.gain,
        };
        let model = PolyModel::new(
            rec.order, rec.degree, terms, coeffs, scaler, rec.rho_y, rec.rho_u,
        )
        .map_err(|e| bad(e.to_string()))?;
        if model
            .coeffs
            .iter()
            .chain(&model.scaler.offset)
            .any(|v| !v.is_finite())
        {
            return Err(bad("non-finite coefficient or offset".into()));
        }
        Ok(ModelFile {
            model,
            eta: rec.eta,
            gamma_y: rec.gamma_y,
            rho: rec.rho,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }
}

/// Writes `t,r,y,u,xi,J,saturated`, one row per step.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(["t", "r", "y", "u", "xi", "J", "saturated"])
        .map_err(|e| csv_io(path, e))?;
    for t in 0..traj.len() {
        w.write_record([
            t.to_string(),
            traj.r[t].to_string(),
            traj.y[t].to_string(),
            traj.u[t].to_string(),
            traj.xi[t].to_string(),
            traj.cost[t].to_string(),
            (traj.saturated[t] as u8).to_string(),
        ])
        .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
