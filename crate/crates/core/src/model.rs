//! Physical models: Hamiltonian, jump channels, channel groups and
//! local-detailed-balance metadata.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, CMatrix, Operator, C64, IM};

/// Residual above which a declared reverse pairing is reported as broken.
pub const DETAILED_BALANCE_TOL: f64 = 1e-10;

/// One monitored jump channel `L_k`.
#[derive(Clone, Debug)]
pub struct JumpChannel {
    pub label: String,
    pub operator: Operator,
    /// Zero-based group index; the one-based label is `group + 1`.
    pub group: usize,
    /// Environment entropy change `Δs_k` per jump (k_B = 1). Only meaningful
    /// for reverse-paired channels.
    pub entropy_jump: Option<f64>,
    /// Index of the reversed channel `k′`.
    pub reverse: Option<usize>,
}

impl JumpChannel {
    /// Zero-rate channels are kept for stable indexing but never sampled.
    pub fn is_inert(&self) -> bool {
        self.operator.max_abs() == 0.0
    }
}

/// A Markovian open quantum system in the form `ρ̇ = -i[H,ρ] + Σ_k D[L_k]ρ`.
#[derive(Clone, Debug)]
pub struct LindbladModel {
    name: String,
    hamiltonian: Operator,
    channels: Vec<JumpChannel>,
    group_count: usize,
    classical: bool,
}

impl LindbladModel {
    /// Structural checks only (dimensions, Hermiticity, indices). Physical
    /// consistency is reported by [`validate`].
    pub fn new(
        name: impl Into<String>,
        hamiltonian: Operator,
        channels: Vec<JumpChannel>,
        classical: bool,
    ) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::EmptyChannels);
        }
        if !hamiltonian.is_hermitian(1e-12) {
            return Err(Error::InvalidModel("Hamiltonian is not Hermitian".into()));
        }
        let d = hamiltonian.dim();
        for (k, ch) in channels.iter().enumerate() {
            if ch.operator.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: ch.operator.dim(),
                });
            }
            if let Some(r) = ch.reverse {
                if r >= channels.len() || r == k {
                    return Err(Error::InvalidModel(format!(
                        "channel {k} has invalid reverse index {r}"
                    )));
                }
            }
        }
        let group_count = channels.iter().map(|c| c.group).max().unwrap_or(0) + 1;
        Ok(Self {
            name: name.into(),
            hamiltonian,
            channels,
            group_count,
            classical,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[JumpChannel] {
        &self.channels
    }

    pub fn channel(&self, k: usize) -> Result<&JumpChannel> {
        self.channels.get(k).ok_or(Error::UnknownChannel(k))
    }

    pub fn group_count(&self) -> usize {
        self.group_count
    }

    pub fn is_classical(&self) -> bool {
        self.classical
    }

    /// Channel indices belonging to group `alpha`.
    pub fn group_members(&self, alpha: usize) -> Vec<usize> {
        self.channels
            .iter()
            .enumerate()
            .filter(|(_, c)| c.group == alpha)
            .map(|(k, _)| k)
            .collect()
    }

    /// `Σ_k L_k† L_k`.
    pub fn total_decay_operator(&self) -> CMatrix {
        let d = self.dim();
        self.channels
            .iter()
            .fold(CMatrix::zeros(d, d), |acc, c| {
                acc + c.operator.matrix().adjoint() * c.operator.matrix()
            })
    }

    /// `H_eff = H - (i/2) Σ_k L_k† L_k`.
    pub fn effective_hamiltonian(&self) -> Operator {
        let m = self.hamiltonian.matrix() - self.total_decay_operator() * (IM * 0.5);
        Operator::new(m).expect("effective Hamiltonian inherits a valid shape")
    }

    /// Mean jump rate `tr{L_k ρ L_k†}` of channel `k` in state `ρ`.
    pub fn jump_rate(&self, k: usize, rho: &Operator) -> f64 {
        let l = self.channels[k].operator.matrix();
        (l * rho.matrix() * l.adjoint()).trace().re
    }

    /// Whether every non-inert channel has a reverse partner.
    pub fn fully_paired(&self) -> bool {
        self.channels
            .iter()
            .all(|c| c.is_inert() || c.reverse.is_some())
    }
}

/// Outcome of [`validate`]: measured residuals plus every violated invariant.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    /// `(k, ‖L_k - e^{Δs_k/2} L_{k′}†‖_max)` for each paired channel.
    pub detailed_balance_residuals: Vec<(usize, f64)>,
    pub inert_channels: Vec<usize>,
    pub group_sizes: Vec<usize>,
    pub classical_flag: bool,
    pub violations: Vec<String>,
    /// Reversed pairs split across groups. Harmless for counting statistics
    /// and the KUR, but the TUR imprinting needs both directions in one group.
    pub group_pairing_violations: Vec<(usize, usize)>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn tur_ready(&self) -> bool {
        self.passed() && self.group_pairing_violations.is_empty()
    }

    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            Ok(self)
        } else {
            Err(Error::InvalidModel(self.violations.join("; ")))
        }
    }
}

/// Lints a model against the pairing, grouping and classicality invariants.
pub fn validate(model: &LindbladModel) -> ValidationReport {
    let mut report = ValidationReport {
        classical_flag: model.classical,
        group_sizes: (0..model.group_count)
            .map(|a| model.group_members(a).len())
            .collect(),
        ..Default::default()
    };
    for (alpha, size) in report.group_sizes.iter().enumerate() {
        if *size == 0 {
            report
                .violations
                .push(format!("group {} has no channels", alpha + 1));
        }
    }
    for (k, ch) in model.channels.iter().enumerate() {
        if ch.is_inert() {
            report.inert_channels.push(k);
        }
        let Some(r) = ch.reverse else { continue };
        let partner = &model.channels[r];
        if partner.reverse != Some(k) {
            report
                .violations
                .push(format!("channel {k} pairs with {r} but not conversely"));
        }
        if partner.group != ch.group && k < r {
            report.group_pairing_violations.push((k, r));
        }
        match (ch.entropy_jump, partner.entropy_jump) {
            (Some(s), Some(s_rev)) => {
                if (s + s_rev).abs() > 1e-12 {
                    report.violations.push(format!(
                        "entropy jumps of pair ({k}, {r}) are not antisymmetric"
                    ));
                }
                let scaled = partner.operator.matrix().adjoint() * C64::new((s / 2.0).exp(), 0.0);
                let residual = max_abs(&(ch.operator.matrix() - scaled));
                if residual > DETAILED_BALANCE_TOL {
                    report.violations.push(format!(
                        "detailed balance broken for channel {k}: residual {residual:.3e}"
                    ));
                }
                report.detailed_balance_residuals.push((k, residual));
            }
            _ => report
                .violations
                .push(format!("paired channel {k} lacks an entropy jump")),
        }
    }
    if model.classical {
        if !model.hamiltonian.is_diagonal(1e-12) {
            report
                .violations
                .push("classical flag set but Hamiltonian is not diagonal".into());
        }
        for (k, ch) in model.channels.iter().enumerate() {
            if !ch.is_inert() && classical_transition(&ch.operator).is_none() {
                report.violations.push(format!(
                    "classical flag set but channel {k} is not of the form sqrt(R)|mu><sigma|"
                ));
            }
        }
    }
    report
}

/// `(to, from, rate)` when the operator is `√R |to⟩⟨from|` with `to ≠ from`.
pub fn classical_transition(op: &Operator) -> Option<(usize, usize, f64)> {
    let d = op.dim();
    let mut found = None;
    for i in 0..d {
        for j in 0..d {
            let z = op.matrix()[(i, j)];
            if z.norm() > 0.0 {
                if found.is_some() || i == j || z.im.abs() > 1e-14 || z.re < 0.0 {
                    return None;
                }
                found = Some((i, j, z.re * z.re));
            }
        }
    }
    found
}

fn check_rate(name: &'static str, value: f64) -> Result<()> {
    if !(value >= 0.0) || !value.is_finite() {
        return Err(Error::NegativeRate { name, value });
    }
    Ok(())
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::NegativeRate { name, value });
    }
    Ok(())
}

/// Builds a thermal emission/absorption pair for one bath. The absorption
/// channel comes first. Returns unpaired channels when `n = 0`.
fn thermal_pair(
    absorb: Operator,
    emit: Operator,
    gamma: f64,
    n: f64,
    group: usize,
    first_index: usize,
    labels: (&str, &str),
) -> [JumpChannel; 2] {
    let paired = n > 0.0;
    let ds = if paired { Some(((n + 1.0) / n).ln()) } else { None };
    [
        JumpChannel {
            label: labels.0.into(),
            operator: absorb.scaled((gamma * n).sqrt()),
            group,
            entropy_jump: ds.map(|s| -s),
            reverse: paired.then_some(first_index + 1),
        },
        JumpChannel {
            label: labels.1.into(),
            operator: emit.scaled((gamma * (n + 1.0)).sqrt()),
            group,
            entropy_jump: ds,
            reverse: paired.then_some(first_index),
        },
    ]
}

/// Coherently driven qubit in the rotating frame, `H = (Δ/2)σ_z + Ωσ_x`, with
/// absorption `√(γn)σ₊` in group 1 and emission `√(γ(n+1))σ₋` in group 2.
///
/// Basis index 0 is `|0⟩` (ground) and 1 is `|1⟩` (excited).
pub fn build_driven_qubit(detuning: f64, drive: f64, gamma: f64, n: f64) -> Result<LindbladModel> {
    check_positive("gamma", gamma)?;
    check_rate("n", n)?;
    let h = Operator::from_real(2, &[-detuning / 2.0, drive, drive, detuning / 2.0])?;
    let sigma_plus = Operator::transition(2, 1, 0);
    let sigma_minus = Operator::transition(2, 0, 1);
    let [absorb, mut emit] = thermal_pair(sigma_plus, sigma_minus, gamma, n, 0, 0, ("1", "2"));
    // Absorption and emission are counted as separate observables, so the
    // reversed pair is split across groups and the model is not TUR-ready.
    emit.group = 1;
    LindbladModel::new("driven_qubit", h, vec![absorb, emit], false)
}

/// Three-level maser in the rotating frame, `H = Δσ₂₂ + Ω(σ₁₂ + σ₂₁)`.
///
/// Channels, in order: `1 = √(γ₁n₁)σ₃₁`, `1′ = √(γ₁(1+n₁))σ₁₃` (group 1),
/// `2 = √(γ₂n₂)σ₃₂`, `2′ = √(γ₂(1+n₂))σ₂₃` (group 2). Levels `ε₁, ε₂, ε₃` are
/// basis indices 0, 1, 2.
pub fn build_three_level_maser(
    detuning: f64,
    drive: f64,
    gamma1: f64,
    gamma2: f64,
    n1: f64,
    n2: f64,
) -> Result<LindbladModel> {
    check_positive("gamma1", gamma1)?;
    check_positive("gamma2", gamma2)?;
    check_rate("n1", n1)?;
    check_rate("n2", n2)?;
    let h = Operator::from_real(
        3,
        &[0.0, drive, 0.0, drive, detuning, 0.0, 0.0, 0.0, 0.0],
    )?;
    let sigma = |i: usize, j: usize| Operator::transition(3, i - 1, j - 1);
    let bath1 = thermal_pair(sigma(3, 1), sigma(1, 3), gamma1, n1, 0, 0, ("1", "1'"));
    let bath2 = thermal_pair(sigma(3, 2), sigma(2, 3), gamma2, n2, 1, 2, ("2", "2'"));
    let channels = bath1.into_iter().chain(bath2).collect();
    LindbladModel::new("three_level_maser", h, channels, false)
}

/// Assignment of one classical transition `from → to` to a group.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionGroup {
    pub to: usize,
    pub from: usize,
    /// Zero-based group index.
    pub group: usize,
}

/// Classical rate network with `H = 0` and one channel `√R_{μσ}|μ⟩⟨σ|` per
/// nonzero rate, where `rates[μ][σ]` is the rate of `σ → μ`.
///
/// Transitions whose reverse is also present are paired with
/// `Δs = ln(R_{μσ}/R_{σμ})`.
pub fn build_classical_network(
    rates: &[Vec<f64>],
    assignment: &[TransitionGroup],
) -> Result<LindbladModel> {
    let d = rates.len();
    if d < 2 {
        return Err(Error::DimensionTooSmall(d));
    }
    for (mu, row) in rates.iter().enumerate() {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: row.len(),
            });
        }
        for (sigma, &r) in row.iter().enumerate() {
            check_rate("rate", r)?;
            if mu == sigma && r != 0.0 {
                return Err(Error::InvalidModel("rate matrix diagonal must be zero".into()));
            }
        }
    }
    let mut group_of = vec![vec![None::<usize>; d]; d];
    for a in assignment {
        if a.to >= d || a.from >= d {
            return Err(Error::InvalidModel(format!(
                "assignment {}<-{} out of range",
                a.to, a.from
            )));
        }
        match group_of[a.to][a.from] {
            Some(g) if g != a.group => {
                return Err(Error::GroupConflict {
                    to: a.to,
                    from: a.from,
                })
            }
            _ => group_of[a.to][a.from] = Some(a.group),
        }
        if rates[a.to][a.from] == 0.0 {
            return Err(Error::InvalidModel(format!(
                "group assigned to zero-rate transition {}<-{}",
                a.to, a.from
            )));
        }
    }
    let mut index = vec![vec![None::<usize>; d]; d];
    let mut channels = Vec::new();
    for sigma in 0..d {
        for mu in 0..d {
            let r = rates[mu][sigma];
            if r == 0.0 {
                continue;
            }
            let group = group_of[mu][sigma].ok_or_else(|| {
                Error::InvalidModel(format!("transition {mu}<-{sigma} has no group"))
            })?;
            index[mu][sigma] = Some(channels.len());
            channels.push(JumpChannel {
                label: format!("{mu}<-{sigma}"),
                operator: Operator::transition(d, mu, sigma).scaled(r.sqrt()),
                group,
                entropy_jump: None,
                reverse: None,
            });
        }
    }
    for sigma in 0..d {
        for mu in 0..d {
            if let (Some(k), Some(kr)) = (index[mu][sigma], index[sigma][mu]) {
                channels[k].reverse = Some(kr);
                channels[k].entropy_jump = Some((rates[mu][sigma] / rates[sigma][mu]).ln());
            }
        }
    }
    LindbladModel::new("classical_network", Operator::zeros(d), channels, true)
}

/// A counting observable `Φ = Σ_j w_{k_j}` given by one weight per channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableDef {
    pub name: String,
    pub weights: Vec<f64>,
}

impl ObservableDef {
    pub fn new(name: impl Into<String>, weights: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            weights,
        }
    }

    /// The unique group containing every channel with nonzero weight, or
    /// `None` for an all-zero observable.
    pub fn support_group(&self, model: &LindbladModel) -> Result<Option<usize>> {
        if self.weights.len() != model.channels().len() {
            return Err(Error::DimensionMismatch {
                expected: model.channels().len(),
                found: self.weights.len(),
            });
        }
        let mut group = None;
        for (k, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let g = model.channels()[k].group;
            match group {
                None => group = Some(g),
                Some(existing) if existing != g => {
                    return Err(Error::InvalidModel(format!(
                        "observable '{}' spans groups {} and {}",
                        self.name,
                        existing + 1,
                        g + 1
                    )))
                }
                _ => {}
            }
        }
        Ok(group)
    }

    /// `w_k = -w_{k′}` for every reversed pair: a thermodynamic current.
    pub fn is_current(&self, model: &LindbladModel) -> bool {
        model.channels().iter().enumerate().all(|(k, c)| match c.reverse {
            Some(r) => (self.weights[k] + self.weights[r]).abs() < 1e-12,
            None => c.is_inert() || self.weights[k] == 0.0,
        })
    }
}

/// Checks that `defs[α]` is supported inside group `α` for both observables.
pub fn check_observable_pair(model: &LindbladModel, defs: &[ObservableDef; 2]) -> Result<()> {
    if model.group_count() != 2 {
        return Err(Error::UnsupportedGroupCount(model.group_count()));
    }
    for (alpha, def) in defs.iter().enumerate() {
        match def.support_group(model) {
            Ok(Some(g)) if g != alpha => {
                return Err(Error::InvalidObservable(
                    alpha,
                    format!("supported on group {} instead of {}", g + 1, alpha + 1),
                ))
            }
            Ok(_) => {}
            Err(e) => return Err(Error::InvalidObservable(alpha, e.to_string())),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qubit_channels_and_rates() {
        let m = build_driven_qubit(0.0, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(m.channels().len(), 2);
        let rate = |k: usize| {
            let l = m.channels()[k].operator.matrix();
            (l.adjoint() * l).trace().re
        };
        assert!((rate(0) - 1.0).abs() < 1e-14);
        assert!((rate(1) - 2.0).abs() < 1e-14);
        assert_eq!(m.channels()[0].group, 0);
        assert_eq!(m.channels()[1].group, 1);
        let report = validate(&m);
        assert!(report.passed());
        assert_eq!(report.detailed_balance_residuals.len(), 2);
        assert_eq!(report.group_pairing_violations, vec![(0, 1)]);
    }

    #[test]
    fn qubit_vacuum_bath_has_inert_absorption() {
        let m = build_driven_qubit(0.0, 1.0, 1.0, 0.0).unwrap();
        assert!(m.channels()[0].is_inert());
        assert!(!m.channels()[1].is_inert());
        let report = validate(&m);
        assert_eq!(report.inert_channels, vec![0]);
        assert!(report.passed());
    }

    #[test]
    fn qubit_entropy_jumps_follow_detailed_balance() {
        for n in [0.1, 1.0, 3.7] {
            let m = build_driven_qubit(0.3, 1.0, 2.0, n).unwrap();
            let ds = m.channels()[1].entropy_jump.unwrap();
            assert!((ds - ((n + 1.0) / n).ln()).abs() < 1e-15);
            let l1 = m.channels()[0].operator.matrix();
            let l2 = m.channels()[1].operator.matrix();
            let residual = max_abs(&(l2 - l1.adjoint() * C64::new((ds / 2.0).exp(), 0.0)));
            assert!(residual < 1e-12);
        }
    }

    #[test]
    fn negative_rates_rejected() {
        assert!(build_driven_qubit(0.0, 1.0, -1.0, 1.0).is_err());
        assert!(build_driven_qubit(0.0, 1.0, 1.0, -0.1).is_err());
        assert!(build_three_level_maser(0.0, 1.0, 1.0, 1.0, -5.0, 0.01).is_err());
    }

    #[test]
    fn maser_structure() {
        let m = build_three_level_maser(0.0, 1.0, 1.0, 1.0, 5.0, 0.01).unwrap();
        assert_eq!(m.channels().len(), 4);
        assert_eq!(m.group_members(0), vec![0, 1]);
        assert_eq!(m.group_members(1), vec![2, 3]);
        // 2' is σ₂₃ = |ε₂⟩⟨ε₃|, the adjoint of 2's operator structure.
        assert!((m.channels()[3].operator.matrix()[(1, 2)].re - (1.01_f64).sqrt()).abs() < 1e-15);
        let report = validate(&m);
        assert!(report.passed(), "{:?}", report.violations);
        assert_eq!(report.detailed_balance_residuals.len(), 4);
        assert!(report.detailed_balance_residuals.iter().all(|(_, r)| *r < 1e-12));
    }

    #[test]
    fn mislabeled_maser_group_is_reported() {
        let m = build_three_level_maser(0.0, 1.0, 1.0, 1.0, 5.0, 0.01).unwrap();
        let mut channels = m.channels().to_vec();
        channels[3].group = 0;
        let bad = LindbladModel::new("bad", m.hamiltonian().clone(), channels, false).unwrap();
        let report = validate(&bad);
        assert_eq!(report.group_pairing_violations, vec![(2, 3)]);
        assert!(!report.tur_ready());
        assert!(validate(&m).tur_ready());
    }

    #[test]
    fn classical_two_state() {
        let rates = vec![vec![0.0, 2.0], vec![1.0, 0.0]];
        let assignment = [
            TransitionGroup { to: 1, from: 0, group: 0 },
            TransitionGroup { to: 0, from: 1, group: 1 },
        ];
        let m = build_classical_network(&rates, &assignment).unwrap();
        assert_eq!(m.channels().len(), 2);
        assert!(m.is_classical());
        assert!(validate(&m).passed());
    }

    #[test]
    fn classical_cycle_partition() {
        let rates = vec![
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ];
        let assignment = [
            TransitionGroup { to: 1, from: 0, group: 0 },
            TransitionGroup { to: 2, from: 1, group: 1 },
            TransitionGroup { to: 0, from: 2, group: 0 },
        ];
        let m = build_classical_network(&rates, &assignment).unwrap();
        assert_eq!(m.group_members(0).len(), 2);
        assert_eq!(m.group_members(1).len(), 1);
        assert!(validate(&m).passed());
    }

    #[test]
    fn classical_rejects_negative_and_conflicts() {
        let bad = vec![vec![0.0, -1.0], vec![1.0, 0.0]];
        assert!(matches!(
            build_classical_network(&bad, &[]),
            Err(Error::NegativeRate { .. })
        ));
        let rates = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let conflicting = [
            TransitionGroup { to: 1, from: 0, group: 0 },
            TransitionGroup { to: 1, from: 0, group: 1 },
            TransitionGroup { to: 0, from: 1, group: 1 },
        ];
        assert!(matches!(
            build_classical_network(&rates, &conflicting),
            Err(Error::GroupConflict { to: 1, from: 0 })
        ));
    }

    #[test]
    fn injected_hamiltonian_breaks_classical_flag() {
        let rates = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let assignment = [
            TransitionGroup { to: 1, from: 0, group: 0 },
            TransitionGroup { to: 0, from: 1, group: 1 },
        ];
        let m = build_classical_network(&rates, &assignment).unwrap();
        let sigma_x = Operator::from_real(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let tampered = LindbladModel::new("tampered", sigma_x, m.channels().to_vec(), true).unwrap();
        let report = validate(&tampered);
        assert!(report.violations.iter().any(|v| v.contains("not diagonal")));
    }

    #[test]
    fn observable_support_and_current_flag() {
        let m = build_three_level_maser(0.0, 1.0, 1.0, 1.0, 5.0, 0.01).unwrap();
        let heat1 = ObservableDef::new("theta1", vec![1.0, -1.0, 0.0, 0.0]);
        let count1 = ObservableDef::new("phi1", vec![1.0, 1.0, 0.0, 0.0]);
        let mixed = ObservableDef::new("bad", vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(heat1.support_group(&m).unwrap(), Some(0));
        assert!(heat1.is_current(&m));
        assert!(!count1.is_current(&m));
        assert!(mixed.support_group(&m).is_err());
        let heat2 = ObservableDef::new("theta2", vec![0.0, 0.0, 1.0, -1.0]);
        assert!(check_observable_pair(&m, &[heat1.clone(), heat2.clone()]).is_ok());
        assert!(check_observable_pair(&m, &[heat2, heat1]).is_err());
    }
}
