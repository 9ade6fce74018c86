//! Artifact formats: flat JSON summaries, CSV rows and provenance.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use jumpbounds::bounds::BoundReport;
use jumpbounds::statistics::{Estimate, ObservableSample, Row};
use jumpbounds::monitoring::ScoredTrajectory;
use jumpbounds::statistics::feature;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

/// Columns of a sweep CSV, in order.
pub const SWEEP_COLUMNS: [&str; 15] = [
    "sweep_value", "lhs_det", "lhs_se", "k12", "k12_se", "half_k1k2", "corr_coeff", "A1", "A2",
    "Q1", "Q2", "F12", "phi1", "phi2", "flags",
];

pub const SAMPLE_COLUMNS: [&str; 10] = [
    "trajectory", "seed", "jumps", "phi1", "phi2", "n1", "n2", "s1", "s2", "s_single",
];

/// Decimal with 12 significant digits, trailing zeros removed.
pub fn sig12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let e = x.abs().log10().floor() as i32;
    if (-5..12).contains(&e) {
        let s = format!("{:.*}", (11 - e).max(0) as usize, x);
        trim_zeros(&s).to_string()
    } else {
        let s = format!("{:.11e}", x);
        let (mantissa, exp) = s.split_once('e').unwrap_or((&s, "0"));
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

fn put_estimate(map: &mut Map<String, Value>, key: &str, e: Estimate) {
    map.insert(key.into(), num(e.value));
    map.insert(format!("{key}_se"), num(e.se));
}

/// The report as one flat object. Non-finite values become `null`.
pub fn flat_summary(report: &BoundReport) -> Map<String, Value> {
    let mut m = Map::new();
    let r = report;
    m.insert("kind".into(), serde_json::to_value(r.kind).unwrap_or(Value::Null));
    m.insert("tau".into(), num(r.tau));
    m.insert("trajectories".into(), Value::from(r.sample_count));
    put_estimate(&mut m, "lhs_det", r.lhs_det);
    put_estimate(&mut m, "lhs_half", r.lhs_half);
    put_estimate(&mut m, "k12", r.k12);
    put_estimate(&mut m, "half_k1k2", r.half_k1k2);
    put_estimate(&mut m, "k1", r.k_single[0]);
    put_estimate(&mut m, "k2", r.k_single[1]);
    put_estimate(&mut m, "saturation", r.saturation);
    put_estimate(&mut m, "gap_det", r.gap_det);
    put_estimate(&mut m, "gap_half", r.gap_half);
    put_estimate(&mut m, "gap_difference", r.gap_difference);
    put_estimate(&mut m, "corr_coeff", r.stats.correlation);
    put_estimate(&mut m, "mean1", r.stats.means[0]);
    put_estimate(&mut m, "mean2", r.stats.means[1]);
    put_estimate(&mut m, "var1", r.stats.cov[0][0]);
    put_estimate(&mut m, "var2", r.stats.cov[1][1]);
    put_estimate(&mut m, "cov12", r.stats.cov[0][1]);
    put_estimate(&mut m, "rel_var1", r.stats.relative_variances[0]);
    put_estimate(&mut m, "rel_var2", r.stats.relative_variances[1]);
    put_estimate(&mut m, "rel_cov12", r.stats.relative_covariance);
    put_estimate(&mut m, "F11", r.fisher.entry(0, 0));
    put_estimate(&mut m, "F12", r.fisher.entry(0, 1));
    put_estimate(&mut m, "F22", r.fisher.entry(1, 1));
    put_estimate(&mut m, "F_single", r.fisher.single);
    put_estimate(&mut m, "score_mean1", r.fisher.score_means[0]);
    put_estimate(&mut m, "score_mean2", r.fisher.score_means[1]);
    put_estimate(&mut m, "score_mean_single", r.fisher.single_score_mean);
    put_estimate(&mut m, "Q1", r.q[0]);
    put_estimate(&mut m, "Q2", r.q[1]);
    m.insert("A1".into(), num(r.activity[0]));
    m.insert("A2".into(), num(r.activity[1]));
    let sigma = r.sigma.unwrap_or([f64::NAN; 2]);
    m.insert("Sigma1".into(), num(sigma[0]));
    m.insert("Sigma2".into(), num(sigma[1]));
    let entropy = r.thermo.entropy.as_ref();
    m.insert("delta_s".into(), num(entropy.map_or(f64::NAN, |e| e.delta_s)));
    m.insert("delta_s_env".into(), num(entropy.map_or(f64::NAN, |e| e.delta_s_env)));
    let c = &r.thermo.corrections;
    for a in 0..2 {
        let i = a + 1;
        m.insert(format!("phi{i}"), num(c.ratios[a]));
        m.insert(format!("phi_star{i}"), num(c.star[a]));
        m.insert(format!("phi_mean{i}"), num(c.means[a]));
        m.insert(format!("phi_single{i}"), num(c.single_ratios[a]));
    }
    m.insert("flags".into(), Value::from(r.flags.join(";")));
    m
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn write_samples(
    path: &Path,
    trajectories: &[ScoredTrajectory],
    samples: &[ObservableSample],
    rows: &[Row],
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(e.to_string()))?;
    w.write_record(SAMPLE_COLUMNS).map_err(|e| CliError::Io(e.to_string()))?;
    for (i, ((t, s), row)) in trajectories.iter().zip(samples).zip(rows).enumerate() {
        let record = [
            i.to_string(),
            t.record.seed.to_string(),
            t.record.events.len().to_string(),
            sig12(s.phi[0]),
            sig12(s.phi[1]),
            s.counts[0].to_string(),
            s.counts[1].to_string(),
            sig12(row[feature::S1]),
            sig12(row[feature::S2]),
            sig12(row[feature::S_SINGLE]),
        ];
        w.write_record(&record).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// One sweep row in [`SWEEP_COLUMNS`] order.
pub fn sweep_row(value: f64, r: &BoundReport) -> Vec<String> {
    let c = &r.thermo.corrections;
    vec![
        sig12(value),
        sig12(r.lhs_det.value),
        sig12(r.lhs_det.se),
        sig12(r.k12.value),
        sig12(r.k12.se),
        sig12(r.half_k1k2.value),
        sig12(r.stats.correlation.value),
        sig12(r.activity[0]),
        sig12(r.activity[1]),
        sig12(r.q[0].value),
        sig12(r.q[1].value),
        sig12(r.fisher.values[0][1]),
        sig12(c.ratios[0]),
        sig12(c.ratios[1]),
        r.flags.join(";"),
    ]
}

/// Marker row for a sweep point that failed.
pub fn failure_row(value: f64, error: &CliError) -> Vec<String> {
    let mut row = vec![sig12(value)];
    row.extend(std::iter::repeat_n("nan".to_string(), SWEEP_COLUMNS.len() - 2));
    let message: String = error
        .to_string()
        .chars()
        .map(|c| if c == ',' || c == ';' || c == '\n' { ' ' } else { c })
        .collect();
    row.push(format!("error:{}:{message}", error.kind()));
    row
}

/// Sweep CSV writer that flushes after every row, so partial results survive
/// a failure.
pub struct SweepWriter {
    inner: csv::Writer<File>,
}

impl SweepWriter {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        let mut inner = csv::Writer::from_path(path).map_err(|e| CliError::Io(e.to_string()))?;
        inner.write_record(SWEEP_COLUMNS).map_err(|e| CliError::Io(e.to_string()))?;
        inner.flush().map_err(|e| CliError::io(path, e))?;
        Ok(Self { inner })
    }

    pub fn push(&mut self, row: &[String]) -> Result<(), CliError> {
        self.inner.write_record(row).map_err(|e| CliError::Io(e.to_string()))?;
        self.inner.flush().map_err(|e| CliError::Io(e.to_string()))
    }
}

/// Git blob-style SHA-256: `sha256("blob <len>\0" ++ content)`.
pub fn content_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn provenance(config: &RunConfig, command: &str) -> Value {
    let echo = serde_json::to_value(config).unwrap_or(Value::Null);
    let canonical = serde_json::to_vec(&echo).unwrap_or_default();
    let mut m = Map::new();
    m.insert("command".into(), Value::from(command));
    m.insert("package_version".into(), Value::from(env!("CARGO_PKG_VERSION")));
    m.insert("master_seed".into(), Value::from(config.master_seed));
    m.insert("config_hash".into(), Value::from(content_hash(&canonical)));
    m.insert("config".into(), echo);
    if config.sweep.as_ref().is_some_and(|s| s.values.is_none()) {
        m.insert(
            "grid_note".into(),
            Value::from("default grid: 12 log-spaced drive values in [0.25, 8]; a project choice"),
        );
    }
    Value::Object(m)
}

/// Writes a line to stdout, ignoring a closed pipe.
pub fn print_line(s: &str) {
    let _ = writeln!(std::io::stdout(), "{s}");
}
