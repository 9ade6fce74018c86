//! Counting observables, sample moments and bootstrap uncertainties.
//!
//! Every per-trajectory quantity (observables, jump counts, scores) is
//! collected in one [`Row`]. A single bootstrap index stream resamples whole
//! rows, so any derived quantity and any difference of derived quantities
//! gets a joint standard error from the same replicates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LindbladModel, ObservableDef};
use crate::trajectory::{counter_hash, TrajectoryRecord};

/// Number of per-trajectory features.
pub const FEATURES: usize = 7;

/// Column indices of a [`Row`].
pub mod feature {
    pub const PHI1: usize = 0;
    pub const PHI2: usize = 1;
    /// Score of the group-1 parameter.
    pub const S1: usize = 2;
    /// Score of the group-2 parameter.
    pub const S2: usize = 3;
    /// Score of the single global parameter.
    pub const S_SINGLE: usize = 4;
    pub const N1: usize = 5;
    pub const N2: usize = 6;
}

pub type Row = [f64; FEATURES];

/// Minimum ensemble size for statistics and Fisher estimates.
pub const MIN_SAMPLES: usize = 100;

/// Observables `Φ_α = Σ_{j∈T_α} w_{k_j}` and group jump counts `N_α`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservableSample {
    pub phi: [f64; 2],
    pub counts: [u64; 2],
}

impl ObservableSample {
    /// Joins the observables with the scores `[s_1, s_2, s_single]`.
    pub fn row(&self, scores: &[f64]) -> Row {
        let mut row = [0.0; FEATURES];
        row[feature::PHI1] = self.phi[0];
        row[feature::PHI2] = self.phi[1];
        for (i, s) in scores.iter().take(3).enumerate() {
            row[feature::S1 + i] = *s;
        }
        row[feature::N1] = self.counts[0] as f64;
        row[feature::N2] = self.counts[1] as f64;
        row
    }
}

pub fn evaluate_observables(
    record: &TrajectoryRecord,
    model: &LindbladModel,
    defs: &[ObservableDef; 2],
) -> Result<ObservableSample> {
    let channels = model.channels();
    for (i, def) in defs.iter().enumerate() {
        if def.weights.len() != channels.len() {
            return Err(Error::InvalidObservable(
                i,
                format!("{} weights for {} channels", def.weights.len(), channels.len()),
            ));
        }
    }
    let mut out = ObservableSample::default();
    for &(_, k) in &record.events {
        let ch = channels.get(k).ok_or(Error::UnknownChannel(k))?;
        if ch.group < 2 {
            out.counts[ch.group] += 1;
        }
        out.phi[0] += defs[0].weights[k];
        out.phi[1] += defs[1].weights[k];
    }
    Ok(out)
}

/// Weighted first and second moments of the rows, shifted by a fixed
/// reference point for numerical stability.
#[derive(Clone, Debug)]
pub struct Moments {
    pub count: f64,
    shift: Row,
    /// `E[x_j - c_j]`.
    centered_mean: Row,
    /// `E[(x_j - c_j)(x_k - c_k)]`.
    centered_cross: [Row; FEATURES],
}

impl Moments {
    fn accumulate(rows: &[Row], weights: Option<&[u32]>, shift: Row) -> Self {
        let mut count = 0.0;
        let mut mean = [0.0; FEATURES];
        let mut cross = [[0.0; FEATURES]; FEATURES];
        for (i, row) in rows.iter().enumerate() {
            let w = weights.map_or(1.0, |w| w[i] as f64);
            if w == 0.0 {
                continue;
            }
            count += w;
            let mut x = [0.0; FEATURES];
            for j in 0..FEATURES {
                x[j] = row[j] - shift[j];
                mean[j] += w * x[j];
            }
            for j in 0..FEATURES {
                for k in j..FEATURES {
                    cross[j][k] += w * x[j] * x[k];
                }
            }
        }
        for j in 0..FEATURES {
            mean[j] /= count;
            for k in j..FEATURES {
                cross[j][k] /= count;
                cross[k][j] = cross[j][k];
            }
        }
        Self {
            count,
            shift,
            centered_mean: mean,
            centered_cross: cross,
        }
    }

    pub fn mean(&self, j: usize) -> f64 {
        self.shift[j] + self.centered_mean[j]
    }

    /// `E[x_j x_k]`.
    pub fn raw(&self, j: usize, k: usize) -> f64 {
        let (cj, ck) = (self.shift[j], self.shift[k]);
        self.centered_cross[j][k] + cj * self.centered_mean[k] + ck * self.centered_mean[j] + cj * ck
    }

    /// Unbiased covariance (denominator `M - 1`).
    pub fn cov(&self, j: usize, k: usize) -> f64 {
        let biased = self.centered_cross[j][k] - self.centered_mean[j] * self.centered_mean[k];
        biased * self.count / (self.count - 1.0)
    }
}

/// A value with its bootstrap standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    /// `(value - target) / se`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.value - target) / self.se
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bootstrap {
    pub resamples: usize,
    pub seed: u64,
}

impl Bootstrap {
    pub fn new(seed: u64) -> Self {
        Self { resamples: 200, seed }
    }

    /// Full-sample moments plus one set per resample.
    pub fn resample(&self, rows: &[Row]) -> Result<Resampled> {
        let m = rows.len();
        if m < 2 {
            return Err(Error::TooFewSamples { required: 2, found: m });
        }
        let full = Moments::accumulate(rows, None, [0.0; FEATURES]);
        let shift: Row = std::array::from_fn(|j| full.mean(j));
        let full = Moments::accumulate(rows, None, shift);
        let stream = self.seed ^ 0xB0B5_7A4F_0000_0001;
        let replicates = (0..self.resamples)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(counter_hash(stream, b as u64));
                let mut weights = vec![0u32; m];
                for _ in 0..m {
                    weights[rng.random_range(0..m)] += 1;
                }
                Moments::accumulate(rows, Some(&weights), shift)
            })
            .collect();
        Ok(Resampled { full, replicates })
    }
}

/// Moments of the data and of each bootstrap replicate.
#[derive(Clone, Debug)]
pub struct Resampled {
    pub full: Moments,
    pub replicates: Vec<Moments>,
}

impl Resampled {
    pub fn sample_count(&self) -> usize {
        self.full.count as usize
    }

    /// Plug-in value and bootstrap standard error of `f`.
    pub fn estimate(&self, f: impl Fn(&Moments) -> f64) -> Estimate {
        let value = f(&self.full);
        let reps: Vec<f64> = self
            .replicates
            .iter()
            .map(&f)
            .filter(|v| v.is_finite())
            .collect();
        let n = reps.len() as f64;
        let se = if reps.len() < 2 {
            f64::NAN
        } else {
            let mean = reps.iter().sum::<f64>() / n;
            (reps.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Estimate { value, se }
    }
}

/// `Var(Φ_α)/⟨Φ_α⟩²`.
pub fn relative_variance(m: &Moments, alpha: usize) -> f64 {
    let j = feature::PHI1 + alpha;
    m.cov(j, j) / m.mean(j).powi(2)
}

/// `Cov(Φ_1,Φ_2)/(⟨Φ_1⟩⟨Φ_2⟩)`.
pub fn relative_covariance(m: &Moments) -> f64 {
    m.cov(feature::PHI1, feature::PHI2) / (m.mean(feature::PHI1) * m.mean(feature::PHI2))
}

/// `det(Ξ)/(⟨Φ_1⟩²⟨Φ_2⟩²)`, the left-hand side of the multidimensional bounds.
pub fn lhs_det(m: &Moments) -> f64 {
    let c = relative_covariance(m);
    relative_variance(m, 0) * relative_variance(m, 1) - c * c
}

/// Product of relative variances minus half the squared relative covariance.
pub fn lhs_half(m: &Moments) -> f64 {
    let c = relative_covariance(m);
    relative_variance(m, 0) * relative_variance(m, 1) - 0.5 * c * c
}

pub fn correlation(m: &Moments) -> f64 {
    let (a, b) = (feature::PHI1, feature::PHI2);
    m.cov(a, b) / (m.cov(a, a) * m.cov(b, b)).sqrt()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub means: [Estimate; 2],
    /// Unbiased covariance matrix `Ξ̂`.
    pub cov: [[Estimate; 2]; 2],
    pub relative_variances: [Estimate; 2],
    pub relative_covariance: Estimate,
    pub det_ratio: Estimate,
    pub correlation: Estimate,
    pub sample_count: usize,
}

pub fn estimate_statistics(data: &Resampled) -> Result<CovarianceEstimate> {
    let m = data.sample_count();
    if m < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            required: MIN_SAMPLES,
            found: m,
        });
    }
    let means = [
        data.estimate(|x| x.mean(feature::PHI1)),
        data.estimate(|x| x.mean(feature::PHI2)),
    ];
    for (index, e) in means.iter().enumerate() {
        if !(e.value.abs() > 3.0 * e.se) {
            return Err(Error::RelativeFluctuationUndefined {
                index,
                mean: e.value,
                se: e.se,
            });
        }
    }
    let cov = std::array::from_fn(|a| {
        std::array::from_fn(|b| data.estimate(|x| x.cov(feature::PHI1 + a, feature::PHI1 + b)))
    });
    Ok(CovarianceEstimate {
        means,
        cov,
        relative_variances: [
            data.estimate(|x| relative_variance(x, 0)),
            data.estimate(|x| relative_variance(x, 1)),
        ],
        relative_covariance: data.estimate(relative_covariance),
        det_ratio: data.estimate(lhs_det),
        correlation: data.estimate(correlation),
        sample_count: m,
    })
}
