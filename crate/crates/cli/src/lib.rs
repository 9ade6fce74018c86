//! Command implementations behind the `jumpbounds` binary.

pub mod config;
pub mod output;

use std::fmt;
use std::path::{Path, PathBuf};

use jumpbounds::bounds::{run_analysis, AnalysisConfig, BoundReport};
use jumpbounds::liouvillian::{build_liouvillian, steady_state};
use jumpbounds::model::validate;
use jumpbounds::monitoring::{steady_state_coefficients, BoundKind};
use serde::Serialize;
use serde_json::{json, Value};

use config::RunConfig;
use output::{
    failure_row, flat_summary, provenance, sweep_row, write_json, write_samples, SweepWriter,
};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "JUMPBOUNDS_OUT";
/// Exit status when a check runs but does not pass.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Exit status for errors, reported as JSON on stderr.
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Model(jumpbounds::Error),
    Io(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Io(format!("{}: {e}", path.display()))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Model(_) => "model",
            Self::Io(_) => "io",
        }
    }

    /// `{"error": {"kind": ..., "message": ...}}`.
    pub fn to_json(&self) -> Value {
        json!({ "error": { "kind": self.kind(), "message": self.to_string() } })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "invalid configuration: {m}"),
            Self::Model(e) => write!(f, "{e}"),
            Self::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<jumpbounds::Error> for CliError {
    fn from(e: jumpbounds::Error) -> Self {
        Self::Model(e)
    }
}

/// Output directory: explicit flag, then the config, then [`OUT_ENV`], then
/// `./jumpbounds-out`.
pub fn resolve_out_dir(flag: Option<PathBuf>, config: &RunConfig) -> PathBuf {
    flag.or_else(|| config.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("jumpbounds-out"))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn analysis_config(cfg: &RunConfig) -> AnalysisConfig {
    AnalysisConfig {
        kind: cfg.bound_kind,
        tau: cfg.tau,
        trajectories: cfg.trajectories,
        master_seed: cfg.master_seed,
        sampler: cfg.sampler.clone(),
        bootstrap_resamples: cfg.bootstrap_resamples,
        workers: cfg.workers,
    }
}

/// Runs one analysis and writes `summary.json`, `samples.csv` and
/// `provenance.json` into `out`.
pub fn cmd_run(cfg: &RunConfig, out: &Path) -> Result<BoundReport, CliError> {
    cfg.check()?;
    let model = cfg.model.build()?;
    let defs = cfg.observables(&model)?;
    let init = cfg.initial_state(&model)?;
    let result = run_analysis(&model, &defs, &init, &analysis_config(cfg))?;
    ensure_dir(out)?;
    write_json(&out.join("summary.json"), &flat_summary(&result.report))?;
    write_samples(
        &out.join("samples.csv"),
        &result.trajectories,
        &result.samples,
        &result.rows,
    )?;
    write_json(&out.join("provenance.json"), &provenance(cfg, "run"))?;
    Ok(result.report)
}

/// Result of a sweep: one entry per value, in order.
pub struct SweepOutcome {
    pub values: Vec<f64>,
    pub reports: Vec<Result<BoundReport, CliError>>,
}

impl SweepOutcome {
    pub fn failures(&self) -> usize {
        self.reports.iter().filter(|r| r.is_err()).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Evaluates every sweep value with the same master seed, writing
/// `sweep.csv` (flushed per row) or `sweep.json`, plus provenance. Failed
/// points get marker rows and do not stop the sweep.
pub fn cmd_sweep(cfg: &RunConfig, out: &Path, format: Format) -> Result<SweepOutcome, CliError> {
    cfg.check()?;
    let values = cfg.sweep_values()?;
    let parameter = cfg.sweep.as_ref().map(|s| s.parameter.clone()).unwrap_or_default();
    ensure_dir(out)?;
    write_json(&out.join("provenance.json"), &provenance(cfg, "sweep"))?;
    let mut writer = match format {
        Format::Csv => Some(SweepWriter::create(&out.join("sweep.csv"))?),
        Format::Json => None,
    };
    let mut reports = Vec::with_capacity(values.len());
    let mut json_rows = Vec::new();
    for &v in &values {
        let result = (|| {
            let mut point = cfg.clone();
            point.apply(&parameter, v)?;
            point.check()?;
            let model = point.model.build()?;
            let defs = point.observables(&model)?;
            let init = point.initial_state(&model)?;
            Ok(run_analysis(&model, &defs, &init, &analysis_config(&point))?.report)
        })();
        let row = match &result {
            Ok(r) => sweep_row(v, r),
            Err(e) => failure_row(v, e),
        };
        if let Some(w) = writer.as_mut() {
            w.push(&row)?;
        } else {
            let mut obj = match &result {
                Ok(r) => flat_summary(r),
                Err(e) => e.to_json().as_object().cloned().unwrap_or_default(),
            };
            obj.insert("sweep_value".into(), json!(v));
            json_rows.push(Value::Object(obj));
        }
        reports.push(result);
    }
    if format == Format::Json {
        write_json(&out.join("sweep.json"), &json_rows)?;
    }
    Ok(SweepOutcome { values, reports })
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassicalCheck {
    pub fisher: [[f64; 2]; 2],
    pub fisher_se: [[f64; 2]; 2],
    pub activity: [f64; 2],
    /// z-score of `F̂₁₂ = 0`.
    pub z_offdiagonal: f64,
    /// z-scores of `F̂_αα = A_α`.
    pub z_diagonal: [f64; 2],
    pub threshold: f64,
    pub passed: bool,
}

pub const CLASSICAL_Z_THRESHOLD: f64 = 4.0;

/// Checks the diagonal classical Fisher matrix `F̂ = diag(A₁, A₂)`.
pub fn cmd_classical_check(cfg: &RunConfig, out: Option<&Path>) -> Result<ClassicalCheck, CliError> {
    cfg.check()?;
    let model = cfg.model.build()?;
    if !model.is_classical() {
        return Err(CliError::Config(format!(
            "classical-check needs a classical rate model, got `{}`",
            model.name()
        )));
    }
    let defs = cfg.observables(&model)?;
    let init = cfg.initial_state(&model)?;
    let mut acfg = analysis_config(cfg);
    acfg.kind = BoundKind::Kur;
    let r = run_analysis(&model, &defs, &init, &acfg)?.report;
    let z_offdiagonal = r.fisher.entry(0, 1).z_score(0.0);
    let z_diagonal = [0, 1].map(|a| r.fisher.entry(a, a).z_score(r.activity[a]));
    let passed = z_offdiagonal.abs() <= CLASSICAL_Z_THRESHOLD
        && z_diagonal.iter().all(|z| z.abs() <= CLASSICAL_Z_THRESHOLD);
    let check = ClassicalCheck {
        fisher: r.fisher.values,
        fisher_se: r.fisher.std_errors,
        activity: r.activity,
        z_offdiagonal,
        z_diagonal,
        threshold: CLASSICAL_Z_THRESHOLD,
        passed,
    };
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_json(&dir.join("classical_check.json"), &check)?;
        write_json(&dir.join("provenance.json"), &provenance(cfg, "classical-check"))?;
    }
    Ok(check)
}

/// `ρ_ss` as `{re, im}` matrices and, for paired models, `l_ss`.
pub fn cmd_steady_state(cfg: &RunConfig) -> Result<Value, CliError> {
    let model = cfg.model.build()?;
    let rho = steady_state(&build_liouvillian(&model)?)?;
    let m = rho.matrix();
    let part = |f: fn(&jumpbounds::linalg::C64) -> f64| -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
            .collect()
    };
    let l_ss = if model.fully_paired() {
        Some(steady_state_coefficients(&model, &rho)?)
    } else {
        None
    };
    Ok(json!({
        "model": model.name(),
        "rho_ss": { "re": part(|z| z.re), "im": part(|z| z.im) },
        "l_ss": l_ss,
    }))
}

/// Lint report and whether the model passes.
pub fn cmd_validate(cfg: &RunConfig) -> Result<(Value, bool), CliError> {
    let model = cfg.model.build()?;
    let report = validate(&model);
    let passed = report.passed();
    let mut value = serde_json::to_value(&report).map_err(|e| CliError::Io(e.to_string()))?;
    if let Some(obj) = value.as_object_mut() {
        obj.insert("passed".into(), json!(passed));
        obj.insert("tur_ready".into(), json!(report.tur_ready()));
    }
    Ok((value, passed))
}
