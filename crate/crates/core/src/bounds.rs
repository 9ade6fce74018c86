//! Assembly of the single and multidimensional KUR/TUR bounds, and the
//! end-to-end analysis pipeline that feeds them.
//!
//! Every Monte Carlo quantity is a function of the ensemble [`Moments`], so
//! it is evaluated on the full sample and on each bootstrap replicate of the
//! same [`Resampled`] set. Differences such as `LHS - K₁₂` therefore carry
//! joint standard errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liouvillian::{build_liouvillian, steady_state};
use crate::model::{check_observable_pair, LindbladModel, ObservableDef};
use crate::monitoring::{
    estimate_fisher, fisher_entry, make_scheme, run_fisher_ensemble, BoundKind,
    FisherMatrixEstimate, ScoredTrajectory, SINGLE,
};
use crate::statistics::{
    estimate_statistics, evaluate_observables, lhs_det, lhs_half, Bootstrap, CovarianceEstimate,
    Estimate, Moments, ObservableSample, Resampled, Row,
};
use crate::thermo::{thermo_report, ThermoReport};
use crate::trajectory::{counter_hash, InitialState, SamplerConfig};

/// Flags attached to a report. They describe limitations, not failures.
pub mod flag {
    /// `det F̂ ≤ 0` (or its TUR analog) on the full sample.
    pub const K12_INAPPLICABLE: &str = "k12_inapplicable";
    /// The global-parameter Fisher information is not positive.
    pub const SINGLE_INAPPLICABLE: &str = "single_inapplicable";
    pub const CORRECTION_UNDEFINED: &str = "correction_undefined";
    /// Long-time corrections applied to a run not started in `ρ_ss`.
    pub const TRANSIENT_NEGLECTED: &str = "transient_neglected";
    /// Entropy quadrature started at `10⁻³τ` because `ρ₀` is singular.
    pub const SINGULAR_START: &str = "singular_start";
}

/// Closed-form pieces of the bounds that do not depend on the sample.
#[derive(Clone, Copy, Debug)]
struct Formulas {
    kind: BoundKind,
    /// Numerator of `K₁₂`.
    num12: f64,
    /// Numerators of the single-observable bounds.
    num_single: [f64; 2],
}

impl Formulas {
    fn new(thermo: &ThermoReport) -> Self {
        let c = &thermo.corrections;
        let sq = |x: f64| (1.0 + x).powi(2);
        let prefactor = match thermo.kind {
            BoundKind::Kur => 1.0,
            BoundKind::Tur => 2.0,
        };
        Self {
            kind: thermo.kind,
            num12: prefactor * sq(c.ratios[0]) * sq(c.ratios[1]),
            num_single: c.single_ratios.map(|r| prefactor * sq(r)),
        }
    }

    /// KUR: `F₁₁F₂₂ - F₁₂²`, which equals `(A₁+Q₁)(A₂+Q₂) - F₁₂²`.
    /// TUR: `(Σ₁+2Q′₁)(Σ₂+2Q′₂) - 2F₁₂² = 4F₁₁F₂₂ - 2F₁₂²`.
    fn denom12(&self, m: &Moments) -> f64 {
        let (f11, f22, f12) = (fisher_entry(m, 0, 0), fisher_entry(m, 1, 1), fisher_entry(m, 0, 1));
        match self.kind {
            BoundKind::Kur => f11 * f22 - f12 * f12,
            BoundKind::Tur => 4.0 * f11 * f22 - 2.0 * f12 * f12,
        }
    }

    /// `A + Q` (KUR) or `Σ + 2Q′` (TUR) of the global parameter.
    fn denom_single(&self, m: &Moments) -> f64 {
        let f = fisher_entry(m, SINGLE, SINGLE);
        match self.kind {
            BoundKind::Kur => f,
            BoundKind::Tur => 2.0 * f,
        }
    }

    fn k12(&self, m: &Moments) -> f64 {
        positive_ratio(self.num12, self.denom12(m))
    }

    fn k_single(&self, m: &Moments, alpha: usize) -> f64 {
        positive_ratio(self.num_single[alpha], self.denom_single(m))
    }

    fn half(&self, m: &Moments) -> f64 {
        0.5 * self.k_single(m, 0) * self.k_single(m, 1)
    }
}

fn positive_ratio(num: f64, denom: f64) -> f64 {
    if denom > 0.0 {
        num / denom
    } else {
        f64::NAN
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub tau: f64,
    pub sample_count: usize,
    /// `det Ξ/(⟨Φ₁⟩²⟨Φ₂⟩²)`.
    pub lhs_det: Estimate,
    /// Relative variances' product minus half the squared relative covariance.
    pub lhs_half: Estimate,
    pub k12: Estimate,
    /// `½K₁K₂`.
    pub half_k1k2: Estimate,
    /// Single-observable bounds `K` for each observable.
    pub k_single: [Estimate; 2],
    /// `lhs_det / k12`.
    pub saturation: Estimate,
    /// `lhs_det - k12`.
    pub gap_det: Estimate,
    /// `lhs_half - half_k1k2`.
    pub gap_half: Estimate,
    /// `gap_det - gap_half`, negative when the multidimensional bound is tighter.
    pub gap_difference: Estimate,
    pub fisher: FisherMatrixEstimate,
    pub stats: CovarianceEstimate,
    pub activity: [f64; 2],
    /// `Σ_α`, TUR only.
    pub sigma: Option<[f64; 2]>,
    /// `F̂_αα - A_α` (KUR) or `F̂_αα - Σ_α/2` (TUR).
    pub q: [Estimate; 2],
    pub thermo: ThermoReport,
    pub flags: Vec<String>,
}

impl BoundReport {
    pub fn has_flag(&self, f: &str) -> bool {
        self.flags.iter().any(|x| x == f)
    }
}

/// Combines the deterministic report with the resampled ensemble.
pub fn assemble_bounds(thermo: &ThermoReport, data: &Resampled) -> Result<BoundReport> {
    let stats = estimate_statistics(data)?;
    let fisher = estimate_fisher(data)?;
    let formulas = Formulas::new(thermo);
    let mut flags = Vec::new();
    if !(formulas.denom12(&data.full) > 0.0) {
        flags.push(flag::K12_INAPPLICABLE.to_string());
    }
    if !(formulas.denom_single(&data.full) > 0.0) {
        flags.push(flag::SINGLE_INAPPLICABLE.to_string());
    }
    let c = &thermo.corrections;
    if c.ratios.iter().chain(&c.single_ratios).any(|r| !r.is_finite()) {
        flags.push(flag::CORRECTION_UNDEFINED.to_string());
    }
    if thermo.transient_neglected {
        flags.push(flag::TRANSIENT_NEGLECTED.to_string());
    }
    if thermo.entropy.as_ref().is_some_and(|e| e.singular_start()) {
        flags.push(flag::SINGULAR_START.to_string());
    }

    let sigma = thermo.entropy.as_ref().map(|e| [e.sigma[0], e.sigma[1]]);
    let offsets = match (thermo.kind, sigma) {
        (BoundKind::Tur, Some(s)) => [0.5 * s[0], 0.5 * s[1]],
        _ => thermo.activity,
    };
    let f = formulas;
    Ok(BoundReport {
        kind: thermo.kind,
        tau: thermo.tau,
        sample_count: data.sample_count(),
        lhs_det: data.estimate(lhs_det),
        lhs_half: data.estimate(lhs_half),
        k12: data.estimate(|m| f.k12(m)),
        half_k1k2: data.estimate(|m| f.half(m)),
        k_single: [
            data.estimate(|m| f.k_single(m, 0)),
            data.estimate(|m| f.k_single(m, 1)),
        ],
        saturation: data.estimate(|m| lhs_det(m) / f.k12(m)),
        gap_det: data.estimate(|m| lhs_det(m) - f.k12(m)),
        gap_half: data.estimate(|m| lhs_half(m) - f.half(m)),
        gap_difference: data.estimate(|m| (lhs_det(m) - f.k12(m)) - (lhs_half(m) - f.half(m))),
        q: [
            data.estimate(|m| fisher_entry(m, 0, 0) - offsets[0]),
            data.estimate(|m| fisher_entry(m, 1, 1) - offsets[1]),
        ],
        fisher,
        stats,
        activity: thermo.activity,
        sigma,
        thermo: thermo.clone(),
        flags,
    })
}

/// Settings of one analysis run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub kind: BoundKind,
    pub tau: f64,
    pub trajectories: usize,
    pub master_seed: u64,
    pub sampler: SamplerConfig,
    pub bootstrap_resamples: usize,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl AnalysisConfig {
    pub fn new(kind: BoundKind, tau: f64, trajectories: usize, master_seed: u64) -> Self {
        Self {
            kind,
            tau,
            trajectories,
            master_seed,
            sampler: SamplerConfig::default(),
            bootstrap_resamples: 200,
            workers: None,
        }
    }

    /// The bootstrap stream is derived from the master seed on an index no
    /// trajectory uses.
    pub fn bootstrap(&self) -> Bootstrap {
        Bootstrap {
            resamples: self.bootstrap_resamples,
            seed: counter_hash(self.master_seed, u64::MAX),
        }
    }
}

pub struct AnalysisOutput {
    pub report: BoundReport,
    pub trajectories: Vec<ScoredTrajectory>,
    pub samples: Vec<ObservableSample>,
    pub rows: Vec<Row>,
}

/// Simulates, scores and evaluates the two observables, then assembles the
/// bounds. TUR runs need a paired model and start from `ρ_ss` whatever `init`
/// says, as the correction formulas require.
pub fn run_analysis(
    model: &LindbladModel,
    defs: &[ObservableDef; 2],
    init: &InitialState,
    config: &AnalysisConfig,
) -> Result<AnalysisOutput> {
    if init.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: init.dim(),
        });
    }
    check_observable_pair(model, defs)?;
    if config.kind == BoundKind::Tur {
        for (alpha, def) in defs.iter().enumerate() {
            if !def.is_current(model) {
                return Err(Error::InvalidObservable(alpha, "TUR needs antisymmetric current weights".into()));
            }
        }
    }
    let rho_ss = steady_state(&build_liouvillian(model)?)?;
    let scheme = make_scheme(model, config.kind, Some(&rho_ss))?;
    let init = match config.kind {
        BoundKind::Kur => init.clone(),
        BoundKind::Tur => InitialState::Mixed(rho_ss),
    };
    let thermo = thermo_report(model, config.kind, defs, &init.density(), config.tau)?;
    let trajectories = run_fisher_ensemble(
        model,
        &scheme,
        &init,
        config.tau,
        config.trajectories,
        config.master_seed,
        &config.sampler,
        config.workers,
    )?;
    let samples = trajectories
        .iter()
        .map(|t| evaluate_observables(&t.record, model, defs))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Row> = samples
        .iter()
        .zip(&trajectories)
        .map(|(s, t)| s.row(&t.scores))
        .collect();
    let data = config.bootstrap().resample(&rows)?;
    let report = assemble_bounds(&thermo, &data)?;
    Ok(AnalysisOutput {
        report,
        trajectories,
        samples,
        rows,
    })
}
