//! Run configuration. TOML by default; files ending in `.json` are read as
//! JSON with the same structure.

use std::path::{Path, PathBuf};

use jumpbounds::liouvillian::{build_liouvillian, steady_state};
use jumpbounds::model::{
    build_classical_network, build_driven_qubit, build_three_level_maser, LindbladModel,
    ObservableDef, TransitionGroup,
};
use jumpbounds::monitoring::BoundKind;
use jumpbounds::trajectory::{InitialState, SamplerConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_TRAJECTORIES: usize = 50_000;
pub const DEFAULT_TAU: f64 = 10.0;
pub const MIN_TRAJECTORIES: usize = 100;
/// Points of the default drive grid, log-spaced over `[0.25, 8]`.
pub const DEFAULT_GRID_POINTS: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    Qubit {
        #[serde(default)]
        detuning: f64,
        #[serde(default = "one")]
        drive: f64,
        #[serde(default = "one")]
        gamma: f64,
        #[serde(default = "one")]
        n: f64,
    },
    Maser {
        #[serde(default)]
        detuning: f64,
        #[serde(default = "one")]
        drive: f64,
        #[serde(default = "one")]
        gamma1: f64,
        #[serde(default = "one")]
        gamma2: f64,
        #[serde(default = "maser_n1")]
        n1: f64,
        #[serde(default = "maser_n2")]
        n2: f64,
    },
    Classical {
        /// `rates[to][from]`.
        rates: Vec<Vec<f64>>,
        transitions: Vec<TransitionGroup>,
    },
}

fn one() -> f64 {
    1.0
}

fn maser_n1() -> f64 {
    5.0
}

fn maser_n2() -> f64 {
    0.01
}

impl ModelConfig {
    pub fn build(&self) -> Result<LindbladModel, CliError> {
        Ok(match self {
            Self::Qubit { detuning, drive, gamma, n } => build_driven_qubit(*detuning, *drive, *gamma, *n)?,
            Self::Maser { detuning, drive, gamma1, gamma2, n1, n2 } => {
                build_three_level_maser(*detuning, *drive, *gamma1, *gamma2, *n1, *n2)?
            }
            Self::Classical { rates, transitions } => build_classical_network(rates, transitions)?,
        })
    }

    /// Sets a scalar model parameter by name.
    pub fn set(&mut self, name: &str, value: f64) -> Result<(), CliError> {
        let slot = match (self, name) {
            (Self::Qubit { detuning, .. } | Self::Maser { detuning, .. }, "detuning") => detuning,
            (Self::Qubit { drive, .. } | Self::Maser { drive, .. }, "drive") => drive,
            (Self::Qubit { gamma, .. }, "gamma") => gamma,
            (Self::Qubit { n, .. }, "n") => n,
            (Self::Maser { gamma1, .. }, "gamma1") => gamma1,
            (Self::Maser { gamma2, .. }, "gamma2") => gamma2,
            (Self::Maser { n1, .. }, "n1") => n1,
            (Self::Maser { n2, .. }, "n2") => n2,
            (_, other) => {
                return Err(CliError::Config(format!("model has no sweepable parameter `{other}`")))
            }
        };
        *slot = value;
        Ok(())
    }

    fn default_observables(&self) -> ObservablePreset {
        ObservablePreset::Counting
    }

    fn default_initial(&self) -> InitialConfig {
        match self {
            // |0⟩ for the qubit and |ε₂⟩ for the maser, as in the figures.
            Self::Qubit { .. } => InitialConfig::Basis(0),
            Self::Maser { .. } => InitialConfig::Basis(1),
            Self::Classical { .. } => InitialConfig::Named(NamedState::Steady),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservablePreset {
    /// `w_k = 1` on the channels of group α.
    Counting,
    /// `+1` on the lower-indexed channel of each reversed pair, `-1` on its
    /// partner.
    Current,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservablesConfig {
    pub preset: Option<ObservablePreset>,
    pub w1: Option<Vec<f64>>,
    pub w2: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedState {
    Steady,
}

/// A basis index or `"steady"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialConfig {
    Basis(usize),
    Named(NamedState),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// A model parameter name such as `drive`, optionally prefixed `model.`,
    /// or `tau`.
    pub parameter: String,
    /// Omitted: the default drive grid.
    pub values: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub observables: ObservablesConfig,
    #[serde(default = "default_kind")]
    pub bound_kind: BoundKind,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    #[serde(default)]
    pub master_seed: u64,
    pub initial_state: Option<InitialConfig>,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    pub workers: Option<usize>,
    pub sweep: Option<SweepConfig>,
    pub output_dir: Option<PathBuf>,
}

fn default_kind() -> BoundKind {
    BoundKind::Kur
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}

fn default_trajectories() -> usize {
    DEFAULT_TRAJECTORIES
}

fn default_resamples() -> usize {
    200
}

/// `DEFAULT_GRID_POINTS` log-spaced values in `[0.25, 8]`.
pub fn default_grid() -> Vec<f64> {
    let (lo, hi) = (0.25_f64.ln(), 8.0_f64.ln());
    let n = DEFAULT_GRID_POINTS;
    (0..n)
        .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn check(&self) -> Result<(), CliError> {
        if self.trajectories < MIN_TRAJECTORIES {
            return Err(CliError::Config(format!(
                "trajectories must be at least {MIN_TRAJECTORIES}, got {}",
                self.trajectories
            )));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(CliError::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be positive".into()));
        }
        self.sampler.check()?;
        if let Some(sweep) = &self.sweep {
            let values = self.sweep_values()?;
            if values.iter().any(|v| !v.is_finite()) {
                return Err(CliError::Config("sweep values must be finite".into()));
            }
            if values.windows(2).any(|w| w[0] > w[1]) {
                return Err(CliError::Config("sweep values must be sorted".into()));
            }
            let mut probe = self.clone();
            probe.apply(&sweep.parameter, values[0])?;
        }
        Ok(())
    }

    /// The sweep grid; errors on an empty list.
    pub fn sweep_values(&self) -> Result<Vec<f64>, CliError> {
        let sweep = self
            .sweep
            .as_ref()
            .ok_or_else(|| CliError::Config("no [sweep] section".into()))?;
        let values = sweep.values.clone().unwrap_or_else(default_grid);
        if values.is_empty() {
            return Err(CliError::Config("sweep has no values".into()));
        }
        Ok(values)
    }

    /// Sets `parameter` to `value`.
    pub fn apply(&mut self, parameter: &str, value: f64) -> Result<(), CliError> {
        match parameter.strip_prefix("model.").unwrap_or(parameter) {
            "tau" => {
                self.tau = value;
                Ok(())
            }
            name => self.model.set(name, value),
        }
    }

    pub fn observables(&self, model: &LindbladModel) -> Result<[ObservableDef; 2], CliError> {
        let k = model.channels().len();
        let preset = self.observables.preset.unwrap_or(match self.bound_kind {
            BoundKind::Kur => self.model.default_observables(),
            BoundKind::Tur => ObservablePreset::Current,
        });
        let from_preset = |alpha: usize| -> Vec<f64> {
            model
                .channels()
                .iter()
                .enumerate()
                .map(|(i, ch)| {
                    if ch.group != alpha {
                        0.0
                    } else {
                        match (preset, ch.reverse) {
                            (ObservablePreset::Counting, _) => 1.0,
                            (ObservablePreset::Current, Some(r)) if r > i => 1.0,
                            (ObservablePreset::Current, Some(_)) => -1.0,
                            (ObservablePreset::Current, None) => 0.0,
                        }
                    }
                })
                .collect()
        };
        let w1 = self.observables.w1.clone().unwrap_or_else(|| from_preset(0));
        let w2 = self.observables.w2.clone().unwrap_or_else(|| from_preset(1));
        for (i, w) in [&w1, &w2].into_iter().enumerate() {
            if w.len() != k {
                return Err(CliError::Config(format!(
                    "observable {} has {} weights for {k} channels",
                    i + 1,
                    w.len()
                )));
            }
        }
        Ok([ObservableDef::new("phi1", w1), ObservableDef::new("phi2", w2)])
    }

    pub fn initial_state(&self, model: &LindbladModel) -> Result<InitialState, CliError> {
        match self.initial_state.unwrap_or_else(|| self.model.default_initial()) {
            InitialConfig::Basis(i) if i < model.dim() => Ok(InitialState::basis(model.dim(), i)),
            InitialConfig::Basis(i) => Err(CliError::Config(format!(
                "initial basis state {i} out of range for dimension {}",
                model.dim()
            ))),
            InitialConfig::Named(NamedState::Steady) => {
                Ok(InitialState::Mixed(steady_state(&build_liouvillian(model)?)?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_is_log_spaced() {
        let g = default_grid();
        assert_eq!(g.len(), 12);
        assert!((g[0] - 0.25).abs() < 1e-12 && (g[11] - 8.0).abs() < 1e-12);
        let r = g[1] / g[0];
        assert!(g.windows(2).all(|w| (w[1] / w[0] - r).abs() < 1e-12));
    }

    #[test]
    fn current_preset_matches_heat_weights() {
        let cfg = RunConfig::from_toml("bound_kind = \"tur\"\n[model]\ntype = \"maser\"\n").unwrap();
        let m = cfg.model.build().unwrap();
        let defs = cfg.observables(&m).unwrap();
        assert_eq!(defs[0].weights, vec![1.0, -1.0, 0.0, 0.0]);
        assert_eq!(defs[1].weights, vec![0.0, 0.0, 1.0, -1.0]);
    }

    #[test]
    fn unknown_sweep_parameter_is_rejected() {
        let mut cfg = RunConfig::from_toml("[model]\ntype = \"qubit\"\n").unwrap();
        assert!(cfg.apply("n1", 1.0).is_err());
        cfg.apply("model.drive", 3.0).unwrap();
        assert!(matches!(cfg.model, ModelConfig::Qubit { drive, .. } if drive == 3.0));
    }
}
