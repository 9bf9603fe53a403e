//! The four subcommands. Each writes its outputs before reporting a domain
//! failure, so a failed run still leaves its report behind.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use log::info;
use serde::Serialize;

use nic::identify::TraceEntry;
use nic::io::{read_data_csv, write_data_csv, write_trajectory_csv, ModelFile};
use nic::sim::{generate_data, generate_excitation, metrics, run_scenarios, Metrics};
use nic::validate::ValidationReport;
use nic::{identify_model, select_mu, Verdict};

use crate::config::RunConfig;

/// Failure classes with distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, configuration or input files.
    Usage(anyhow::Error),
    /// The computation ran but the outcome is a failure.
    Domain(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Usage(_) => 2,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            CliError::Usage(e) | CliError::Domain(e) => e,
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub trait Classify<T> {
    fn usage(self) -> CliResult<T>;
    fn domain(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> CliResult<T> {
        self.map_err(|e| CliError::Usage(e.into()))
    }

    fn domain(self) -> CliResult<T> {
        self.map_err(|e| CliError::Domain(e.into()))
    }
}

/// Library errors caused by inputs are usage errors; the rest are domain
/// failures.
fn lib<T>(r: nic::Result<T>) -> CliResult<T> {
    r.map_err(|e| match e {
        nic::Error::InvalidParameter(_)
        | nic::Error::Parse { .. }
        | nic::Error::ModelFile { .. }
        | nic::Error::Io { .. } => CliError::Usage(e.into()),
        _ => CliError::Domain(e.into()),
    })
}

pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub seed: u64,
}

impl Context {
    fn output(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let text = toml::to_string(value).domain()?;
    fs::write(path, text)
        .map_err(|e| anyhow!("writing {}: {e}", path.display()))
        .usage()
}

fn load_model(ctx: &Context) -> CliResult<ModelFile> {
    let path = ctx.config.model_path(&ctx.out);
    if !path.exists() {
        return Err(CliError::Usage(anyhow!(
            "model file {} not found (run `nic identify` first or set `model` in the config)",
            path.display()
        )));
    }
    lib(ModelFile::load(&path))
}

pub fn generate_data_cmd(ctx: &Context) -> CliResult {
    let cfg = &ctx.config;
    let plant = cfg.plant.build().usage()?;
    let ex = &cfg.excitation;
    if !(ex.u_lo <= ex.u_hi) {
        return Err(CliError::Usage(anyhow!("excitation needs u_lo <= u_hi")));
    }
    if !(cfg.data.sample_time > 0.0) {
        return Err(CliError::Usage(anyhow!("data.sample_time must be > 0")));
    }
    let u = generate_excitation(ex.kind, cfg.data.length, ex.u_lo, ex.u_hi, ctx.seed);
    let y0 = vec![cfg.plant.initial_output; plant.order()];
    let mut data = lib(generate_data(&plant, u, &y0, ctx.seed.wrapping_add(1)))?;
    data.sample_time = Some(cfg.data.sample_time);
    let path = ctx.output("data.csv");
    lib(write_data_csv(&path, &data))?;
    println!("wrote {} samples to {}", data.len(), path.display());
    Ok(())
}

#[derive(Serialize)]
struct IdentReport {
    converged: bool,
    order: usize,
    degree: u32,
    eta: f64,
    gamma_y: f64,
    rho: f64,
    residual_bound: f64,
    fit_error: f64,
    tail_error: f64,
    nonzero_terms: usize,
    max_order_reached: bool,
    trace: Vec<TraceEntry>,
}

pub fn identify_cmd(ctx: &Context) -> CliResult {
    let cfg = &ctx.config;
    lib(cfg.identification.validate())?;
    let data = lib(read_data_csv(&cfg.data_path(&ctx.out)))?;
    let res = lib(identify_model(&data, &cfg.identification))?;
    let model_path = ctx.output("model.toml");
    lib(ModelFile::from_result(&res).save(&model_path))?;
    let report = IdentReport {
        converged: res.converged,
        order: res.model.order,
        degree: res.model.degree,
        eta: res.eta,
        gamma_y: res.gamma_y,
        rho: res.rho,
        residual_bound: res.residual_bound(),
        fit_error: res.fit_error,
        tail_error: res.tail_error,
        nonzero_terms: res.model.nnz(),
        max_order_reached: res.max_order_reached,
        trace: res.trace.clone(),
    };
    write_toml(&ctx.output("identify_report.toml"), &report)?;
    println!(
        "order {}, {} terms, eta = {:.3e}, gamma_y = {:.4}, rho = {:.4}",
        res.model.order,
        res.model.nnz(),
        res.eta,
        res.gamma_y,
        res.rho
    );
    if !res.converged {
        return Err(CliError::Domain(anyhow!(
            "gamma_y = {} did not fall below 1 up to rho_max = {}; model and report written",
            res.gamma_y,
            cfg.identification.rho_max
        )));
    }
    Ok(())
}

pub fn validate_cmd(ctx: &Context) -> CliResult {
    let cfg = &ctx.config;
    let mf = load_model(ctx)?;
    if !(mf.gamma_y < 1.0) {
        return Err(CliError::Domain(anyhow!(
            "model has gamma_y = {} >= 1: no stability margin can exist, refusing to validate",
            mf.gamma_y
        )));
    }
    let data = lib(read_data_csv(&cfg.data_path(&ctx.out)))?;
    let window = cfg.validation.window.unwrap_or(4 * mf.model.order);
    let epsilon = cfg.validation.epsilon.unwrap_or(mf.residual_bound());
    let controller = cfg.controller.build(0.0).usage()?;
    let report = lib(select_mu(
        &mf.model,
        &controller,
        &data,
        mf.gamma_y,
        window,
        epsilon,
        &cfg.validation.mu_grid,
    ))?;
    write_toml(&ctx.output("validation.toml"), &report)?;
    for p in &report.grid {
        info!(
            "mu = {}: Gamma_min = {:.4e}, margin = {:.4}, {:?}",
            p.mu, p.gamma_min, p.margin, p.verdict
        );
    }
    println!(
        "mu = {}, Gamma_hat = {:.4e}, margin = {:.4}, verdict {:?}",
        report.mu, report.gamma_hat, report.margin, report.verdict
    );
    if report.verdict != Verdict::ValidatedStable {
        return Err(CliError::Domain(anyhow!(
            "stability condition not validated at any mu in the grid ({:?})",
            report.verdict
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct ScenarioMetrics {
    name: String,
    #[serde(flatten)]
    metrics: Metrics,
}

#[derive(Serialize)]
struct MetricsFile {
    mu: f64,
    scenario: Vec<ScenarioMetrics>,
}

/// `mu` from the config, else from a validation report next to the
/// outputs, else 0.
fn simulation_mu(ctx: &Context) -> CliResult<f64> {
    if let Some(mu) = ctx.config.controller.mu {
        return Ok(mu);
    }
    let path = ctx.output("validation.toml");
    if !path.exists() {
        return Ok(0.0);
    }
    let text = fs::read_to_string(&path)
        .map_err(|e| anyhow!("reading {}: {e}", path.display()))
        .usage()?;
    let report: ValidationReport = toml::from_str(&text)
        .map_err(|e| anyhow!("parsing {}: {e}", path.display()))
        .usage()?;
    Ok(if report.verdict == Verdict::ValidatedStable {
        report.mu
    } else {
        0.0
    })
}

pub fn simulate_cmd(ctx: &Context) -> CliResult {
    let cfg = &ctx.config;
    if cfg.scenarios.is_empty() {
        return Err(CliError::Usage(anyhow!(
            "no [[scenario]] entries in the config"
        )));
    }
    let mut problems: Vec<String> = cfg.scenarios.iter().flat_map(|s| s.problems()).collect();
    let mut names = BTreeSet::new();
    for s in &cfg.scenarios {
        if !names.insert(s.name.as_str()) {
            problems.push(format!("scenario name '{}' is used more than once", s.name));
        }
        if s.name.is_empty()
            || !s
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            problems.push(format!(
                "scenario name '{}' must be non-empty [A-Za-z0-9_-]",
                s.name
            ));
        }
    }
    if !problems.is_empty() {
        return Err(CliError::Usage(anyhow!(
            "invalid scenarios:\n  {}",
            problems.join("\n  ")
        )));
    }
    let mf = load_model(ctx)?;
    let plant = cfg.plant.build().usage()?;
    let mu = simulation_mu(ctx)?;
    let controller = cfg.controller.build(mu).usage()?;
    let scenarios: Vec<_> = cfg
        .scenarios
        .iter()
        .cloned()
        .map(|mut s| {
            s.disturbance_seed = s.disturbance_seed.wrapping_add(ctx.seed);
            s
        })
        .collect();

    let runs = run_scenarios(&plant, &mf.model, &controller, &scenarios);
    let mut out = MetricsFile {
        mu,
        scenario: Vec::new(),
    };
    let mut diverged = Vec::new();
    for (sc, run) in scenarios.iter().zip(runs) {
        let traj = lib(run)?;
        lib(write_trajectory_csv(
            &ctx.output(&format!("trajectory_{}.csv", sc.name)),
            &traj,
        ))?;
        let m = lib(metrics(&traj))?;
        println!(
            "{}: rms = {:.4e}, max = {:.4e}, energy = {:.4}, saturation = {:.1}%",
            sc.name,
            m.rms_error,
            m.max_error,
            m.command_energy,
            100.0 * m.saturation_duty
        );
        if m.diverged {
            diverged.push(sc.name.clone());
        }
        out.scenario.push(ScenarioMetrics {
            name: sc.name.clone(),
            metrics: m,
        });
    }
    write_toml(&ctx.output("metrics.toml"), &out)?;
    if !diverged.is_empty() {
        return Err(CliError::Domain(anyhow!(
            "closed loop diverged in: {}",
            diverged.join(", ")
        )));
    }
    Ok(())
}
