//! Parameter imprintings, monitoring operators and Fisher-information
//! estimation along quantum-jump trajectories.
//!
//! Parameters are ordered `[φ_1, φ_2, φ]`: the two group parameters of the
//! multidimensional bounds, then the single global parameter of the
//! one-observable bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, Operator, C64, IM};
use crate::model::LindbladModel;
use crate::statistics::{feature, Estimate, Resampled, MIN_SAMPLES};
use crate::trajectory::{
    augmented_step, run_engine_ensemble, Engine, InitialState, Response, SamplerConfig,
    TrajectoryRecord,
};

/// Number of imprinted parameters.
pub const PARAMETERS: usize = 3;
/// Index of the global parameter.
pub const SINGLE: usize = 2;

/// Guard on `t·‖H_eff‖` for the augmented exponential.
const OVERFLOW_GUARD: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Kur,
    Tur,
}

/// Derivatives of `H` and of each `L_k` with respect to every parameter at
/// zero deformation: `∂H^{(p)}` and `∂L_k = c_k^{(p)} L_k`.
#[derive(Clone, Debug)]
pub struct ImprintingScheme {
    pub kind: BoundKind,
    pub d_hamiltonian: Vec<Operator>,
    pub jump_coeffs: Vec<Vec<f64>>,
    /// Steady-state `l_k` (TUR only).
    pub l_ss: Option<Vec<f64>>,
}

impl ImprintingScheme {
    /// `∂H_eff^{(p)} = ∂H^{(p)} - i Σ_k c_k^{(p)} L_k†L_k`.
    pub fn d_effective_hamiltonian(&self, model: &LindbladModel, p: usize) -> Operator {
        let mut m = self.d_hamiltonian[p].matrix().clone();
        for (k, ch) in model.channels().iter().enumerate() {
            let c = self.jump_coeffs[p][k];
            if c != 0.0 {
                let l = ch.operator.matrix();
                m -= l.adjoint() * l * (IM * c);
            }
        }
        Operator::new(m).expect("derivative inherits a valid shape")
    }

    pub fn parameter_count(&self) -> usize {
        self.d_hamiltonian.len()
    }

    /// All-zero imprinting with the same shape.
    pub fn null(model: &LindbladModel) -> Self {
        let d = model.dim();
        let k = model.channels().len();
        Self {
            kind: BoundKind::Kur,
            d_hamiltonian: vec![Operator::zeros(d); PARAMETERS],
            jump_coeffs: vec![vec![0.0; k]; PARAMETERS],
            l_ss: None,
        }
    }

    fn response(&self, model: &LindbladModel) -> Response {
        Response {
            d_generator: (0..self.parameter_count())
                .map(|p| self.d_effective_hamiltonian(model, p).matrix() * (-IM))
                .collect(),
            jump_coeffs: self.jump_coeffs.clone(),
        }
    }
}

/// `l_k = (r_k - r_k′)/(r_k + r_k′)` with `r_k = tr{L_k ρ L_k†}`.
pub fn steady_state_coefficients(model: &LindbladModel, rho: &Operator) -> Result<Vec<f64>> {
    model
        .channels()
        .iter()
        .enumerate()
        .map(|(k, ch)| {
            if ch.is_inert() && ch.reverse.is_none() {
                return Ok(0.0);
            }
            let kr = ch.reverse.ok_or(Error::UnpairedChannel(k))?;
            let (r, rr) = (model.jump_rate(k, rho), model.jump_rate(kr, rho));
            Ok(if r + rr > 0.0 { (r - rr) / (r + rr) } else { 0.0 })
        })
        .collect()
}

/// KUR: `H → (1+Σφ)H`, `L_k → √(1+φ_α) L_k` for `k ∈ S_α`.
/// TUR: the same Hamiltonian imprinting and `L_k → √(1+l_k^{ss}θ_α) L_k`.
pub fn make_scheme(
    model: &LindbladModel,
    kind: BoundKind,
    rho_ss: Option<&Operator>,
) -> Result<ImprintingScheme> {
    if model.group_count() != 2 {
        return Err(Error::UnsupportedGroupCount(model.group_count()));
    }
    let weights = match kind {
        BoundKind::Kur => vec![1.0; model.channels().len()],
        BoundKind::Tur => {
            let rho = rho_ss.ok_or_else(|| {
                Error::InvalidModel("TUR imprinting needs the steady state".into())
            })?;
            for (k, ch) in model.channels().iter().enumerate() {
                if let Some(kr) = ch.reverse {
                    if model.channels()[kr].group != ch.group {
                        return Err(Error::InvalidModel(format!(
                            "reversed channels {k} and {kr} lie in different groups"
                        )));
                    }
                }
            }
            steady_state_coefficients(model, rho)?
        }
    };
    let jump_coeffs = (0..PARAMETERS)
        .map(|p| {
            model
                .channels()
                .iter()
                .zip(&weights)
                .map(|(ch, w)| if p == SINGLE || ch.group == p { 0.5 * w } else { 0.0 })
                .collect()
        })
        .collect();
    Ok(ImprintingScheme {
        kind,
        d_hamiltonian: vec![model.hamiltonian().clone(); PARAMETERS],
        jump_coeffs,
        l_ss: (kind == BoundKind::Tur).then_some(weights),
    })
}

/// `U(t) = exp(-iH_eff t)` and `∂U = -i∫₀ᵗ U(t-s) ∂H_eff U(s) ds`, from the
/// block-triangular generator `[[-iH_eff, -i∂H_eff], [0, -iH_eff]]`.
pub fn propagator_and_derivative(
    h_eff: &Operator,
    d_h_eff: &Operator,
    t: f64,
) -> Result<(Operator, Operator)> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let size = t * h_eff.matrix().norm();
    if size > OVERFLOW_GUARD {
        return Err(Error::PropagatorOverflow(size));
    }
    let a = h_eff.matrix() * (-IM);
    let b = d_h_eff.matrix() * (-IM);
    let (u, du) = augmented_step(&a, &[b], t);
    let du = du.into_iter().next().expect("one derivative requested");
    Ok((Operator::new(u)?, Operator::new(du)?))
}

/// Conditional state with one monitoring operator `ξ^{(p)}` per parameter.
#[derive(Clone, Debug)]
pub struct MonitoringState {
    pub psi: CVector,
    pub xi: Vec<CMatrix>,
    pub t: f64,
}

impl MonitoringState {
    pub fn new(psi: CVector, parameters: usize) -> Self {
        let d = psi.len();
        Self {
            psi,
            xi: vec![CMatrix::zeros(d, d); parameters],
            t: 0.0,
        }
    }

    /// `s_p = tr ξ^{(p)}`.
    pub fn scores(&self) -> Vec<f64> {
        self.xi.iter().map(|x| x.trace().re).collect()
    }
}

/// One factor of the trajectory probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Segment {
    NoJump(f64),
    Jump(usize),
}

/// `ξ ← (KξK† + ∂K ψψ† K† + K ψψ† ∂K†)/p`, `ψ ← Kψ/√p`, `p = ‖Kψ‖²`.
pub fn evolve_monitoring(
    state: &MonitoringState,
    segment: Segment,
    model: &LindbladModel,
    scheme: &ImprintingScheme,
) -> Result<MonitoringState> {
    let params = state.xi.len();
    let (kraus, derivs, dt): (CMatrix, Vec<CMatrix>, f64) = match segment {
        Segment::NoJump(dt) => {
            let h_eff = model.effective_hamiltonian();
            let mut u = None;
            let mut du = Vec::with_capacity(params);
            for p in 0..params {
                let (up, dup) =
                    propagator_and_derivative(&h_eff, &scheme.d_effective_hamiltonian(model, p), dt)?;
                u = Some(up.into_matrix());
                du.push(dup.into_matrix());
            }
            let u = match u {
                Some(u) => u,
                None => crate::linalg::matrix_exponential(&h_eff, dt)?.into_matrix(),
            };
            (u, du, dt)
        }
        Segment::Jump(k) => {
            let l = model.channel(k)?.operator.matrix().clone();
            let du = (0..params)
                .map(|p| &l * C64::new(scheme.jump_coeffs[p][k], 0.0))
                .collect();
            (l, du, 0.0)
        }
    };
    let kpsi = &kraus * &state.psi;
    let prob = kpsi.norm_squared();
    if prob < 1e-300 {
        return Err(Error::Underflow(prob));
    }
    let proj = &state.psi * state.psi.adjoint();
    let xi = state
        .xi
        .iter()
        .zip(&derivs)
        .map(|(x, dk)| {
            let cross = dk * &proj * kraus.adjoint();
            (&kraus * x * kraus.adjoint() + &cross + cross.adjoint()) / C64::new(prob, 0.0)
        })
        .collect();
    Ok(MonitoringState {
        psi: kpsi / C64::new(prob.sqrt(), 0.0),
        xi,
        t: state.t + dt,
    })
}

/// Scores of a recorded trajectory by explicit monitoring-operator updates.
pub fn replay_scores(
    model: &LindbladModel,
    scheme: &ImprintingScheme,
    psi0: &CVector,
    events: &[(f64, usize)],
    tau: f64,
) -> Result<Vec<f64>> {
    let mut state = MonitoringState::new(psi0.clone(), scheme.parameter_count());
    let mut t = 0.0;
    for &(tj, k) in events {
        if tj > t {
            state = evolve_monitoring(&state, Segment::NoJump(tj - t), model, scheme)?;
        }
        state = evolve_monitoring(&state, Segment::Jump(k), model, scheme)?;
        t = tj;
    }
    if tau > t {
        state = evolve_monitoring(&state, Segment::NoJump(tau - t), model, scheme)?;
    }
    Ok(state.scores())
}

/// A trajectory together with its scores `[s_1, s_2, s_single]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredTrajectory {
    pub record: TrajectoryRecord,
    pub scores: Vec<f64>,
}

/// One trajectory with its scores, computed on the fly.
pub fn sample_scored(
    model: &LindbladModel,
    scheme: &ImprintingScheme,
    psi0: &CVector,
    tau: f64,
    seed: u64,
    config: &SamplerConfig,
) -> Result<ScoredTrajectory> {
    let engine = Engine::new(model, scheme.response(model), config)?;
    let out = engine.run(&InitialState::Pure(psi0.clone()), tau, seed)?;
    Ok(ScoredTrajectory {
        record: out.record,
        scores: out.scores,
    })
}

/// Fisher-Gillespie ensemble: trajectory `i` is the same as in
/// [`crate::trajectory::run_ensemble`] with equal arguments.
#[allow(clippy::too_many_arguments)]
pub fn run_fisher_ensemble(
    model: &LindbladModel,
    scheme: &ImprintingScheme,
    init: &InitialState,
    tau: f64,
    m: usize,
    master_seed: u64,
    config: &SamplerConfig,
    workers: Option<usize>,
) -> Result<Vec<ScoredTrajectory>> {
    let engine = Engine::new(model, scheme.response(model), config)?;
    Ok(run_engine_ensemble(&engine, init, tau, m, master_seed, workers)?
        .into_iter()
        .map(|o| ScoredTrajectory {
            record: o.record,
            scores: o.scores,
        })
        .collect())
}

/// `F̂_{αβ} = (1/M) Σ_i s_α^{(i)} s_β^{(i)}` with bootstrap errors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FisherMatrixEstimate {
    pub values: [[f64; 2]; 2],
    pub std_errors: [[f64; 2]; 2],
    pub score_means: [Estimate; 2],
    /// Fisher information of the global parameter.
    pub single: Estimate,
    pub single_score_mean: Estimate,
    pub sample_count: usize,
}

impl FisherMatrixEstimate {
    pub fn entry(&self, a: usize, b: usize) -> Estimate {
        Estimate {
            value: self.values[a][b],
            se: self.std_errors[a][b],
        }
    }
}

/// Fisher entry `(a, b)` of the score columns; index 2 is the global score.
pub fn fisher_entry(m: &crate::statistics::Moments, a: usize, b: usize) -> f64 {
    m.raw(feature::S1 + a, feature::S1 + b)
}

pub fn estimate_fisher(data: &Resampled) -> Result<FisherMatrixEstimate> {
    let m = data.sample_count();
    if m < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            required: MIN_SAMPLES,
            found: m,
        });
    }
    let entries: [[Estimate; 2]; 2] =
        std::array::from_fn(|a| std::array::from_fn(|b| data.estimate(|x| fisher_entry(x, a, b))));
    Ok(FisherMatrixEstimate {
        values: entries.map(|row| row.map(|e| e.value)),
        std_errors: entries.map(|row| row.map(|e| e.se)),
        score_means: [
            data.estimate(|x| x.mean(feature::S1)),
            data.estimate(|x| x.mean(feature::S2)),
        ],
        single: data.estimate(|x| fisher_entry(x, SINGLE, SINGLE)),
        single_score_mean: data.estimate(|x| x.mean(feature::S_SINGLE)),
        sample_count: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::liouvillian::{build_liouvillian, steady_state};
    use crate::model::{build_classical_network, build_driven_qubit, build_three_level_maser, TransitionGroup};

    fn qubit() -> LindbladModel {
        build_driven_qubit(0.0, 1.0, 1.0, 1.0).unwrap()
    }

    fn ground(d: usize) -> CVector {
        let mut v = CVector::zeros(d);
        v[0] = C64::new(1.0, 0.0);
        v
    }

    fn cycle() -> LindbladModel {
        let rates = vec![
            vec![0.0, 0.5, 2.0],
            vec![1.5, 0.0, 0.4],
            vec![0.3, 1.2, 0.0],
        ];
        let groups = [(1, 0, 0), (0, 1, 0), (2, 1, 1), (1, 2, 1), (0, 2, 1), (2, 0, 0)]
            .map(|(to, from, group)| TransitionGroup { to, from, group });
        build_classical_network(&rates, &groups).unwrap()
    }

    #[test]
    fn kur_qubit_coefficients() {
        let s = make_scheme(&qubit(), BoundKind::Kur, None).unwrap();
        assert_eq!(s.jump_coeffs[0], vec![0.5, 0.0]);
        assert_eq!(s.jump_coeffs[1], vec![0.0, 0.5]);
        assert_eq!(s.jump_coeffs[SINGLE], vec![0.5, 0.5]);
    }

    #[test]
    fn tur_maser_coefficients_are_antisymmetric() {
        let m = build_three_level_maser(0.0, 1.0, 1.0, 1.0, 5.0, 0.01).unwrap();
        let rho = steady_state(&build_liouvillian(&m).unwrap()).unwrap();
        let s = make_scheme(&m, BoundKind::Tur, Some(&rho)).unwrap();
        let l = s.l_ss.unwrap();
        for (k, ch) in m.channels().iter().enumerate() {
            let kr = ch.reverse.unwrap();
            assert!((l[k] + l[kr]).abs() < 1e-14);
            assert!(l[k].abs() > 0.0);
        }
    }

    #[test]
    fn tur_rejects_split_pairs() {
        let m = qubit();
        let rho = steady_state(&build_liouvillian(&m).unwrap()).unwrap();
        assert!(matches!(make_scheme(&m, BoundKind::Tur, Some(&rho)), Err(Error::InvalidModel(_))));
        let unpaired = build_driven_qubit(0.0, 1.0, 1.0, 0.0).unwrap();
        let rho = steady_state(&build_liouvillian(&unpaired).unwrap()).unwrap();
        assert!(matches!(steady_state_coefficients(&unpaired, &rho), Err(Error::UnpairedChannel(1))));
    }

    #[test]
    fn classical_kur_derivative_is_group_decay() {
        let m = cycle();
        let s = make_scheme(&m, BoundKind::Kur, None).unwrap();
        for alpha in 0..2 {
            let mut expected = CMatrix::zeros(3, 3);
            for k in m.group_members(alpha) {
                let l = m.channels()[k].operator.matrix();
                expected -= l.adjoint() * l * (IM * 0.5);
            }
            assert!(max_abs(&(s.d_effective_hamiltonian(&m, alpha).matrix() - expected)) < 1e-15);
        }
    }

    #[test]
    fn propagator_derivative_at_zero_time_vanishes() {
        let m = qubit();
        let s = make_scheme(&m, BoundKind::Kur, None).unwrap();
        let (u, du) = propagator_and_derivative(&m.effective_hamiltonian(), &s.d_effective_hamiltonian(&m, 0), 0.0).unwrap();
        assert!(max_abs(&(u.matrix() - CMatrix::identity(2, 2))) < 1e-15);
        assert!(du.max_abs() < 1e-15);
    }

    #[test]
    fn propagator_derivative_commuting_case() {
        let m = qubit();
        let h = m.effective_hamiltonian();
        let t = 0.9;
        let (u, du) = propagator_and_derivative(&h, &h, t).unwrap();
        let expected = h.matrix() * u.matrix() * (-IM * t);
        assert!(max_abs(&(du.matrix() - expected)) < 1e-12);
    }

    #[test]
    fn propagator_derivative_matches_finite_difference() {
        let m = qubit();
        let s = make_scheme(&m, BoundKind::Kur, None).unwrap();
        let h = m.effective_hamiltonian();
        let t = 0.7;
        let eps = 1e-5;
        for p in 0..PARAMETERS {
            let dh = s.d_effective_hamiltonian(&m, p);
            let (_, du) = propagator_and_derivative(&h, &dh, t).unwrap();
            let shifted = |e: f64| (( h.matrix() + dh.matrix() * C64::new(e, 0.0)) * (-IM * t)).exp();
            let fd = (shifted(eps) - shifted(-eps)) / C64::new(2.0 * eps, 0.0);
            assert!(max_abs(&(du.matrix() - fd)) < 1e-7);
        }
    }

    #[test]
    fn overflow_guard() {
        let m = qubit();
        let h = m.effective_hamiltonian();
        assert!(matches!(propagator_and_derivative(&h, &h, 1e4), Err(Error::PropagatorOverflow(_))));
        assert!(matches!(propagator_and_derivative(&h, &h, -1.0), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn null_imprinting_keeps_monitoring_operators_zero() {
        let m = qubit();
        let s = ImprintingScheme::null(&m);
        let rec = sample_scored(&m, &s, &ground(2), 10.0, 4, &SamplerConfig::default()).unwrap();
        assert!(rec.scores.iter().all(|&v| v == 0.0));
        let replay = replay_scores(&m, &s, &ground(2), &rec.record.events, 10.0).unwrap();
        assert!(replay.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_jump_adds_twice_the_coefficient() {
        let m = qubit();
        let s = make_scheme(&m, BoundKind::Kur, None).unwrap();
        let mut excited = CVector::zeros(2);
        excited[1] = C64::new(1.0, 0.0);
        let st = MonitoringState::new(excited, PARAMETERS);
        let after = evolve_monitoring(&st, Segment::Jump(1), &m, &s).unwrap();
        assert_eq!(after.scores(), vec![0.0, 1.0, 1.0]);
        assert!((after.psi[0].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn monitoring_trace_stays_real() {
        let m = build_three_level_maser(0.3, 1.0, 1.0, 1.0, 5.0, 0.01).unwrap();
        let s = make_scheme(&m, BoundKind::Kur, None).unwrap();
        let rec = sample_scored(&m, &s, &ground(3), 5.0, 1, &SamplerConfig::default()).unwrap();
        let mut st = MonitoringState::new(ground(3), PARAMETERS);
        let mut t = 0.0;
        for &(tj, k) in &rec.record.events {
            st = evolve_monitoring(&st, Segment::NoJump(tj - t), &m, &s).unwrap();
            st = evolve_monitoring(&st, Segment::Jump(k), &m, &s).unwrap();
            t = tj;
            for x in &st.xi {
                assert!(x.trace().im.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn vector_engine_matches_operator_replay() {
        let models = [qubit(), build_three_level_maser(0.0, 2.0, 1.0, 1.0, 5.0, 0.01).unwrap(), cycle()];
        for m in &models {
            let s = make_scheme(m, BoundKind::Kur, None).unwrap();
            let psi0 = ground(m.dim());
            for seed in 0..20 {
                let rec = sample_scored(m, &s, &psi0, 10.0, seed, &SamplerConfig::default()).unwrap();
                let replay = replay_scores(m, &s, &psi0, &rec.record.events, 10.0).unwrap();
                for (a, b) in rec.scores.iter().zip(&replay) {
                    assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn monitoring_does_not_change_the_record() {
        let m = qubit();
        let s = make_scheme(&m, BoundKind::Kur, None).unwrap();
        let init = InitialState::Pure(ground(2));
        let cfg = SamplerConfig::default();
        let plain = crate::trajectory::run_ensemble(&m, &init, 10.0, 50, 3, &cfg, None).unwrap();
        let scored = run_fisher_ensemble(&m, &s, &init, 10.0, 50, 3, &cfg, None).unwrap();
        for (a, b) in plain.iter().zip(&scored) {
            assert_eq!(a.events, b.record.events);
        }
    }

    /// Direct evaluation of `ln p_φ(γ)` for one trajectory with parameter
    /// `p` set to `phi`.
    fn log_likelihood(m: &LindbladModel, s: &ImprintingScheme, p: usize, phi: f64, psi0: &CVector, events: &[(f64, usize)], tau: f64) -> f64 {
        let h = m.effective_hamiltonian().matrix() + s.d_effective_hamiltonian(m, p).matrix() * C64::new(phi, 0.0);
        let u = |dt: f64| (&h * (-IM * dt)).exp();
        let mut psi = psi0.clone();
        let mut log_norm = 0.0;
        let mut t = 0.0;
        for &(tj, k) in events {
            psi = u(tj - t) * psi;
            let factor = 1.0 + 2.0 * s.jump_coeffs[p][k] * phi;
            psi = m.channels()[k].operator.matrix() * psi * C64::new(factor.sqrt(), 0.0);
            let n = psi.norm();
            log_norm += 2.0 * n.ln();
            psi /= C64::new(n, 0.0);
            t = tj;
        }
        psi = u(tau - t) * psi;
        log_norm + psi.norm_squared().ln()
    }

    #[test]
    fn scores_match_likelihood_finite_differences() {
        let models = [qubit(), build_three_level_maser(0.0, 1.0, 1.0, 1.0, 5.0, 0.01).unwrap()];
        let eps = 1e-5;
        for m in &models {
            let s = make_scheme(m, BoundKind::Kur, None).unwrap();
            let psi0 = ground(m.dim());
            for seed in 0..30 {
                let rec = sample_scored(m, &s, &psi0, 10.0, seed, &SamplerConfig::default()).unwrap();
                for p in 0..PARAMETERS {
                    let fd = (log_likelihood(m, &s, p, eps, &psi0, &rec.record.events, 10.0)
                        - log_likelihood(m, &s, p, -eps, &psi0, &rec.record.events, 10.0))
                        / (2.0 * eps);
                    let sc = rec.scores[p];
                    assert!((sc - fd).abs() <= 1e-4 * fd.abs() + 1e-8, "p={p}: {sc} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn classical_score_is_count_minus_integrated_rate() {
        let m = cycle();
        let s = make_scheme(&m, BoundKind::Kur, None).unwrap();
        let psi0 = ground(3);
        // Escape rate of state σ through group α.
        let escape = |alpha: usize, sigma: usize| -> f64 {
            m.group_members(alpha)
                .into_iter()
                .filter_map(|k| crate::model::classical_transition(&m.channels()[k].operator))
                .filter(|&(_, from, _)| from == sigma)
                .map(|(_, _, rate)| rate)
                .sum()
        };
        for seed in 0..20 {
            let rec = sample_scored(&m, &s, &psi0, 10.0, seed, &SamplerConfig::default()).unwrap();
            for alpha in 0..2 {
                let mut sigma = 0;
                let mut t = 0.0;
                let mut count = 0.0;
                let mut integral = 0.0;
                for &(tj, k) in &rec.record.events {
                    integral += escape(alpha, sigma) * (tj - t);
                    let (to, _, _) = crate::model::classical_transition(&m.channels()[k].operator).unwrap();
                    if m.channels()[k].group == alpha {
                        count += 1.0;
                    }
                    sigma = to;
                    t = tj;
                }
                integral += escape(alpha, sigma) * (10.0 - t);
                assert!((rec.scores[alpha] - (count - integral)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn fixed_step_scores_track_likelihood_derivative() {
        // The fixed-step sampler carries first-order derivative vectors; its
        // scores must be finite and consistent with the trajectory record.
        let m = qubit();
        let s = make_scheme(&m, BoundKind::Kur, None).unwrap();
        let rec = sample_scored(&m, &s, &ground(2), 2.0, 3, &SamplerConfig::fixed_dt(1e-4)).unwrap();
        let replay = replay_scores(&m, &s, &ground(2), &rec.record.events, 2.0).unwrap();
        for (a, b) in rec.scores.iter().zip(&replay) {
            assert!((a - b).abs() < 0.05 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }
}
