//! Deterministic bound ingredients: dynamical activities, entropy-production
//! components and the long-time correction terms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    matrix_log, max_abs, propagator, trace_functional, unvectorize, vectorize, CMatrix, CVector,
    LiouvilleVector, Operator, SuperKind, Superoperator, C64,
};
use crate::liouvillian::{
    build_liouvillian, drazin_inverse, jump_superoperator, spectral_decomposition, steady_state,
    weighted_liouvillian,
};
use crate::model::{LindbladModel, ObservableDef};
use crate::monitoring::{steady_state_coefficients, BoundKind};

/// Relative change at which grid doubling stops.
const QUAD_TOL: f64 = 1e-8;
const MAX_DOUBLINGS: usize = 20;

/// Composite Simpson rule for `∫ f(ρ(t)) dt` on `[t0, t1]` with
/// `ρ(t) = e^{ℒ(t-t0)}ρ(t0)`, doubling the grid until the relative change of
/// every component is below `tol`.
pub fn integrate_along(
    generator: &Superoperator,
    start: &Operator,
    t0: f64,
    t1: f64,
    tol: f64,
    f: impl Fn(&Operator) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    if t1 < t0 {
        return Err(Error::NegativeTime(t1 - t0));
    }
    let mut n = 8;
    let mut previous: Option<Vec<f64>> = None;
    let span = t1 - t0;
    for _ in 0..MAX_DOUBLINGS {
        let h = span / n as f64;
        let step = propagator(generator, h)?;
        let mut v = vectorize(start).into_vector();
        let mut sum: Option<Vec<f64>> = None;
        for i in 0..=n {
            if i > 0 {
                v = step.matrix() * v;
            }
            let rho = hermitized(&v)?;
            let values = f(&rho)?;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let acc = sum.get_or_insert_with(|| vec![0.0; values.len()]);
            for (a, x) in acc.iter_mut().zip(&values) {
                *a += w * x;
            }
        }
        let integral: Vec<f64> = sum
            .unwrap_or_default()
            .into_iter()
            .map(|s| s * h / 3.0)
            .collect();
        if let Some(prev) = &previous {
            let scale = integral
                .iter()
                .fold(0.0_f64, |m, x| m.max(x.abs()))
                .max(1e-14 * span);
            let change = integral
                .iter()
                .zip(prev)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            if change <= tol * scale {
                return Ok(integral);
            }
        }
        previous = Some(integral);
        n *= 2;
    }
    Ok(previous.unwrap_or_default())
}

fn hermitized(v: &CVector) -> Result<Operator> {
    let rho = unvectorize(&LiouvilleVector::new(v.clone()))?;
    Operator::new((rho.matrix() + rho.matrix().adjoint()) * C64::new(0.5, 0.0))
}

/// `A_α = ∫₀^τ Σ_{k∈S_α} tr{L_k ρ(t) L_k†} dt` for every group.
pub fn activities(model: &LindbladModel, rho0: &Operator, tau: f64) -> Result<Vec<f64>> {
    let l = build_liouvillian(model)?;
    let groups = model.group_count();
    integrate_along(&l, rho0, 0.0, tau, QUAD_TOL, |rho| {
        let mut out = vec![0.0; groups];
        for (k, ch) in model.channels().iter().enumerate() {
            out[ch.group] += model.jump_rate(k, rho);
        }
        Ok(out)
    })
}

pub fn dynamical_activity(model: &LindbladModel, rho0: &Operator, tau: f64, alpha: usize) -> Result<f64> {
    Ok(activities(model, rho0, tau)?.get(alpha).copied().unwrap_or(0.0))
}

/// Von Neumann entropy `-tr ρ ln ρ`, with `0 ln 0 = 0`.
pub fn von_neumann_entropy(rho: &Operator) -> f64 {
    let (values, _) = rho.hermitian_eigen();
    values
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntropyReport {
    /// `Σ_α`.
    pub sigma: Vec<f64>,
    /// `ΔS = S(ρ_τ) - S(ρ_{t0})`.
    pub delta_s: f64,
    /// `ΔS_E = ∫ Σ_k tr{L_k ρ L_k†} Δs_k dt`.
    pub delta_s_env: f64,
    /// Lower integration limit; positive when `ρ₀` was rank deficient.
    pub start_time: f64,
}

impl EntropyReport {
    pub fn total(&self) -> f64 {
        self.sigma.iter().sum()
    }

    pub fn singular_start(&self) -> bool {
        self.start_time > 0.0
    }
}

/// `Σ_α = ∫ Σ_{k∈S_α} tr{L_k ρ (Δs_k L_k† - [L_k†, ln ρ])} dt` together with
/// `ΔS` and `ΔS_E`. If `ρ₀` is singular the integrals start at `10⁻³τ`.
pub fn entropy_production_components(
    model: &LindbladModel,
    rho0: &Operator,
    tau: f64,
) -> Result<EntropyReport> {
    let channels = model.channels();
    for (k, ch) in channels.iter().enumerate() {
        if !ch.is_inert() && ch.entropy_jump.is_none() {
            return Err(Error::UnpairedChannel(k));
        }
    }
    let l = build_liouvillian(model)?;
    let groups = model.group_count();
    let integrand = |rho: &Operator| -> Result<Vec<f64>> {
        let log = matrix_log(rho)?;
        let (r, lg) = (rho.matrix(), log.matrix());
        let mut out = vec![0.0; groups + 1];
        for ch in channels {
            if ch.is_inert() {
                continue;
            }
            let lk = ch.operator.matrix();
            let ds = ch.entropy_jump.unwrap_or(0.0);
            let lr = lk * r;
            let rate = (&lr * lk.adjoint()).trace().re;
            let comm = lk.adjoint() * lg - lg * lk.adjoint();
            let sys = (&lr * comm).trace().re;
            out[ch.group] += ds * rate - sys;
            out[groups] += ds * rate;
        }
        Ok(out)
    };
    let (start, t0) = match matrix_log(rho0) {
        Ok(_) => (rho0.clone(), 0.0),
        Err(Error::SingularState(_)) => {
            let t0 = 1e-3 * tau;
            (crate::linalg::propagate(&l, rho0, t0)?, t0)
        }
        Err(e) => return Err(e),
    };
    let values = integrate_along(&l, &start, t0, tau, QUAD_TOL, integrand)?;
    let end = crate::linalg::propagate(&l, &start, tau - t0)?;
    Ok(EntropyReport {
        sigma: values[..groups].to_vec(),
        delta_s: von_neumann_entropy(&end) - von_neumann_entropy(&start),
        delta_s_env: values[groups],
        start_time: t0,
    })
}

/// `-τ ⟨𝟙|𝒥_w ℒ⁺ 𝒢|ρ_ss⟩` for a generator part `𝒢`.
pub fn drazin_correction(
    model: &LindbladModel,
    rho_ss: &Operator,
    drazin: &Superoperator,
    weights: &[f64],
    part: &Superoperator,
    tau: f64,
) -> f64 {
    let j = jump_superoperator(model, weights);
    let v = vectorize(rho_ss).into_vector();
    let x = drazin.matrix() * (part.matrix() * v);
    let y = j.matrix() * x;
    let trace = trace_functional(model.dim());
    -tau * (trace.transpose() * y)[(0, 0)].re
}

/// `τ Σ_k w_k tr{L_k ρ_ss L_k†}`.
pub fn stationary_mean(model: &LindbladModel, rho_ss: &Operator, weights: &[f64], tau: f64) -> f64 {
    tau * weights
        .iter()
        .enumerate()
        .map(|(k, w)| w * model.jump_rate(k, rho_ss))
        .sum::<f64>()
}

/// Long-time correction terms for the two observables.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Corrections {
    /// `⟨Φ*_α⟩` (or `⟨Θ*_α⟩`) under the group imprinting.
    pub star: [f64; 2],
    /// `⟨Φ_α⟩` in the long-time limit.
    pub means: [f64; 2],
    /// `φ_α = ⟨Φ*_α⟩/⟨Φ_α⟩`; NaN when the mean vanishes.
    pub ratios: [f64; 2],
    /// Corrections of the single-observable bounds (global imprinting).
    pub single_star: [f64; 2],
    pub single_ratios: [f64; 2],
}

impl Corrections {
    pub fn undefined(&self) -> [bool; 2] {
        self.ratios.map(|r| !r.is_finite())
    }
}

/// Group generator parts `𝒢_α` and the global part for each bound kind.
///
/// KUR: `ℒ_α = -i[H,·] + 𝒟_α`, global `ℒ`. TUR: `-i[H,·] + Σ_{k∈S_α} l_k 𝒟_k`,
/// global `-i[H,·] + Σ_k l_k 𝒟_k`.
pub fn imprinting_parts(
    model: &LindbladModel,
    kind: BoundKind,
    rho_ss: &Operator,
) -> Result<([Superoperator; 2], Superoperator)> {
    let coeffs = match kind {
        BoundKind::Kur => vec![1.0; model.channels().len()],
        BoundKind::Tur => steady_state_coefficients(model, rho_ss)?,
    };
    let groups = [
        weighted_liouvillian(model, Some(0), &coeffs),
        weighted_liouvillian(model, Some(1), &coeffs),
    ];
    Ok((groups, weighted_liouvillian(model, None, &coeffs)))
}

pub fn corrections(
    model: &LindbladModel,
    kind: BoundKind,
    defs: &[ObservableDef; 2],
    rho_ss: &Operator,
    drazin: &Superoperator,
    tau: f64,
) -> Result<Corrections> {
    let (parts, global) = imprinting_parts(model, kind, rho_ss)?;
    let scale = model
        .channels()
        .iter()
        .enumerate()
        .map(|(k, _)| model.jump_rate(k, rho_ss))
        .sum::<f64>()
        * tau;
    let ratio = |star: f64, mean: f64| {
        if mean.abs() > 1e-12 * scale.max(1e-300) {
            star / mean
        } else {
            f64::NAN
        }
    };
    let star: [f64; 2] = std::array::from_fn(|a| {
        drazin_correction(model, rho_ss, drazin, &defs[a].weights, &parts[a], tau)
    });
    let single_star: [f64; 2] = std::array::from_fn(|a| {
        drazin_correction(model, rho_ss, drazin, &defs[a].weights, &global, tau)
    });
    let means: [f64; 2] = std::array::from_fn(|a| stationary_mean(model, rho_ss, &defs[a].weights, tau));
    Ok(Corrections {
        star,
        means,
        ratios: std::array::from_fn(|a| ratio(star[a], means[a])),
        single_star,
        single_ratios: std::array::from_fn(|a| ratio(single_star[a], means[a])),
    })
}

/// Heisenberg-picture form of the correction for observable `alpha`:
/// `-(τ/2) Σ_{k∉S_α} c_k ∫₀^T ⟨[L_k†, W_α(t)] L_k + L_k†[W_α(t), L_k]⟩_ss dt`
/// with `W_α(t) = e^{ℒ†t} Σ_{k∈S_α} w_k L_k†L_k` and `c_k = 1` (KUR) or
/// `l_k^{ss}` (TUR).
pub fn commutator_form_correction(
    model: &LindbladModel,
    kind: BoundKind,
    defs: &[ObservableDef; 2],
    alpha: usize,
    tau: f64,
    horizon: f64,
) -> Result<f64> {
    let l = build_liouvillian(model)?;
    let rho_ss = steady_state(&l)?;
    let coeffs = match kind {
        BoundKind::Kur => vec![1.0; model.channels().len()],
        BoundKind::Tur => steady_state_coefficients(model, &rho_ss)?,
    };
    let d = model.dim();
    let mut w = CMatrix::zeros(d, d);
    for (k, ch) in model.channels().iter().enumerate() {
        let lk = ch.operator.matrix();
        w += lk.adjoint() * lk * C64::new(defs[alpha].weights[k], 0.0);
    }
    // The Hilbert-Schmidt adjoint of ℒ is its conjugate transpose under
    // column stacking.
    let dual = Superoperator::new(l.matrix().adjoint(), SuperKind::Liouvillian)?;
    let others: Vec<(CMatrix, f64)> = model
        .channels()
        .iter()
        .enumerate()
        .filter(|(_, ch)| ch.group != alpha && !ch.is_inert())
        .map(|(k, ch)| (ch.operator.matrix().clone(), coeffs[k]))
        .collect();
    // The integrand is taken on the fluctuation W(t) - ⟨W⟩_ss, whose
    // commutators are identical but which decays to zero.
    let w_op = Operator::new(w)?;
    let value = integrate_along(&dual, &w_op, 0.0, horizon, 1e-11, |wt| {
        let wt = wt.matrix();
        let mut acc = 0.0;
        for (lk, c) in &others {
            let ld = lk.adjoint();
            let term = (&ld * wt - wt * &ld) * lk + &ld * (wt * lk - lk * wt);
            acc += c * (rho_ss.matrix() * term).trace().re;
        }
        Ok(vec![acc])
    })?;
    Ok(-0.5 * tau * value[0])
}

/// Exact mean of `Σ_k w_k N_k` over `[0, t]` under the deformed dynamics
/// `-i[h_factor·H, ·] + Σ_k f_k D[L_k]` started from `rho0`.
pub fn deformed_observable_mean(
    model: &LindbladModel,
    rho0: &Operator,
    weights: &[f64],
    h_factor: f64,
    rate_factors: &[f64],
    t: f64,
) -> Result<f64> {
    let d = model.dim();
    let n = d * d;
    let mut gen = Superoperator::commutator(model.hamiltonian()).matrix() * C64::new(h_factor, 0.0);
    let mut counter = CMatrix::zeros(n, n);
    for (k, ch) in model.channels().iter().enumerate() {
        gen += Superoperator::dissipator(&ch.operator).matrix() * C64::new(rate_factors[k], 0.0);
        counter += Superoperator::jump(&ch.operator, 1.0).matrix()
            * C64::new(rate_factors[k] * weights[k], 0.0);
    }
    let trace = trace_functional(d);
    let mut big = CMatrix::zeros(n + 1, n + 1);
    big.view_mut((0, 0), (n, n)).copy_from(&gen);
    let row = trace.transpose() * counter;
    big.view_mut((n, 0), (1, n)).copy_from(&row);
    let e = (big * C64::new(t, 0.0)).exp();
    let mut start = CVector::zeros(n + 1);
    start.rows_mut(0, n).copy_from(vectorize(rho0).as_vector());
    Ok((e * start)[n].re)
}

/// Everything deterministic a bound needs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThermoReport {
    pub kind: BoundKind,
    pub tau: f64,
    pub activity: [f64; 2],
    pub entropy: Option<EntropyReport>,
    pub l_ss: Option<Vec<f64>>,
    pub corrections: Corrections,
    /// The initial state differs from `ρ_ss`, so the O(τ⁰) transient of the
    /// correction terms is neglected.
    pub transient_neglected: bool,
}

pub fn thermo_report(
    model: &LindbladModel,
    kind: BoundKind,
    defs: &[ObservableDef; 2],
    rho0: &Operator,
    tau: f64,
) -> Result<ThermoReport> {
    if !(tau > 0.0) {
        return Err(Error::NegativeTime(tau));
    }
    if model.group_count() != 2 {
        return Err(Error::UnsupportedGroupCount(model.group_count()));
    }
    let l = build_liouvillian(model)?;
    let rho_ss = steady_state(&l)?;
    let drazin = drazin_inverse(&l, &rho_ss)?;
    let act = activities(model, rho0, tau)?;
    let (entropy, l_ss) = match kind {
        BoundKind::Kur => (None, None),
        BoundKind::Tur => (
            Some(entropy_production_components(model, rho0, tau)?),
            Some(steady_state_coefficients(model, &rho_ss)?),
        ),
    };
    Ok(ThermoReport {
        kind,
        tau,
        activity: [act[0], act[1]],
        entropy,
        l_ss,
        corrections: corrections(model, kind, defs, &rho_ss, &drazin, tau)?,
        transient_neglected: max_abs(&(rho0.matrix() - rho_ss.matrix())) > 1e-8,
    })
}

/// Slowest relaxation rate of the Liouvillian.
pub fn relaxation_gap(model: &LindbladModel) -> Result<f64> {
    Ok(spectral_decomposition(&build_liouvillian(model)?)?.spectral_gap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_classical_network, build_driven_qubit, build_three_level_maser, TransitionGroup};

    fn maser() -> LindbladModel {
        build_three_level_maser(0.0, 1.0, 1.0, 1.0, 5.0, 0.01).unwrap()
    }

    fn heat_defs() -> [ObservableDef; 2] {
        [
            ObservableDef::new("heat1", vec![1.0, -1.0, 0.0, 0.0]),
            ObservableDef::new("heat2", vec![0.0, 0.0, 1.0, -1.0]),
        ]
    }

    fn count_defs() -> [ObservableDef; 2] {
        [
            ObservableDef::new("n1", vec![1.0, 1.0, 0.0, 0.0]),
            ObservableDef::new("n2", vec![0.0, 0.0, 1.0, 1.0]),
        ]
    }

    fn asymmetric_pair() -> LindbladModel {
        // Two parallel channel pairs between the same states, one per group.
        let rates_a: (f64, f64) = (0.7, 0.2);
        let rates_b: (f64, f64) = (0.3, 0.9);
        let s = |i: usize, j: usize, r: f64| Operator::transition(2, i, j).scaled(r.sqrt());
        let ch = |label: &str, op: Operator, group, ds, rev| crate::model::JumpChannel {
            label: label.into(),
            operator: op,
            group,
            entropy_jump: Some(ds),
            reverse: Some(rev),
        };
        let ds_a = (rates_a.0 / rates_a.1).ln();
        let ds_b = (rates_b.0 / rates_b.1).ln();
        LindbladModel::new(
            "two_bath_pair",
            Operator::zeros(2),
            vec![
                ch("a+", s(1, 0, rates_a.0), 0, ds_a, 1),
                ch("a-", s(0, 1, rates_a.1), 0, -ds_a, 0),
                ch("b+", s(1, 0, rates_b.0), 1, ds_b, 3),
                ch("b-", s(0, 1, rates_b.1), 1, -ds_b, 2),
            ],
            true,
        )
        .unwrap()
    }

    #[test]
    fn dark_state_has_no_activity() {
        let m = build_driven_qubit(0.0, 0.0, 1.0, 0.0).unwrap();
        let a = activities(&m, &Operator::transition(2, 0, 0), 10.0).unwrap();
        assert_eq!(a, vec![0.0, 0.0]);
    }

    #[test]
    fn poisson_activity() {
        // 0 -> 1 at rate γ, and 1 -> 0 in the other group at the same rate:
        // from either state the total escape rate is γ.
        let g = 2.5;
        let m = build_classical_network(
            &[vec![0.0, g], vec![g, 0.0]],
            &[
                TransitionGroup { to: 1, from: 0, group: 0 },
                TransitionGroup { to: 0, from: 1, group: 1 },
            ],
        )
        .unwrap();
        let a = activities(&m, &Operator::transition(2, 0, 0), 4.0).unwrap();
        assert!((a[0] + a[1] - g * 4.0).abs() < 1e-9);
    }

    #[test]
    fn stationary_qubit_emission_activity() {
        let n = 1.0;
        let m = build_driven_qubit(0.0, 1.0, 1.0, n).unwrap();
        let rho = steady_state(&build_liouvillian(&m).unwrap()).unwrap();
        let a = activities(&m, &rho, 10.0).unwrap();
        let pe = rho.matrix()[(1, 1)].re;
        assert!((a[1] - (n + 1.0) * pe * 10.0).abs() < 1e-9);
        let total = activities(&m, &rho, 10.0).unwrap().iter().sum::<f64>();
        assert!((a[0] + a[1] - total).abs() < 1e-12);
    }

    #[test]
    fn thermal_qubit_produces_no_entropy() {
        let m = build_driven_qubit(0.0, 0.0, 1.0, 1.0).unwrap();
        let rho = steady_state(&build_liouvillian(&m).unwrap()).unwrap();
        let e = entropy_production_components(&m, &rho, 5.0).unwrap();
        assert!(e.total().abs() < 1e-10, "{:?}", e);
    }

    #[test]
    fn maser_stationary_entropy_balance() {
        let m = maser();
        let rho = steady_state(&build_liouvillian(&m).unwrap()).unwrap();
        let e = entropy_production_components(&m, &rho, 10.0).unwrap();
        assert!(e.delta_s.abs() < 1e-9);
        let lhs = e.total();
        assert!((lhs - (e.delta_s + e.delta_s_env)).abs() < 1e-6 * lhs.abs());
        assert!(lhs > 0.0);
    }

    #[test]
    fn transient_entropy_balance() {
        let m = maser();
        let rho0 = Operator::from_real(3, &[0.2, 0.0, 0.0, 0.0, 0.5, 0.1, 0.0, 0.1, 0.3]).unwrap();
        let e = entropy_production_components(&m, &rho0, 3.0).unwrap();
        assert!((e.total() - (e.delta_s + e.delta_s_env)).abs() < 1e-6 * e.total().abs());
    }

    #[test]
    fn singular_initial_state_shifts_the_grid() {
        let m = maser();
        let e = entropy_production_components(&m, &Operator::transition(3, 1, 1), 10.0).unwrap();
        assert!(e.singular_start());
        assert!((e.start_time - 0.01).abs() < 1e-15);
    }

    #[test]
    fn classical_entropy_rate_is_flux_times_affinity() {
        // Unicyclic 3-state network with a driving affinity.
        let rates = vec![
            vec![0.0, 0.5, 2.0],
            vec![1.5, 0.0, 0.4],
            vec![0.3, 1.2, 0.0],
        ];
        let groups = [(1, 0, 0), (0, 1, 0), (2, 1, 1), (1, 2, 1), (0, 2, 1), (2, 0, 0)]
            .map(|(to, from, group)| TransitionGroup { to, from, group });
        let m = build_classical_network(&rates, &groups).unwrap();
        let rho = steady_state(&build_liouvillian(&m).unwrap()).unwrap();
        let p: Vec<f64> = (0..3).map(|i| rho.matrix()[(i, i)].re).collect();
        // Schnakenberg: Σ̇ = ½ Σ_{μσ} (R_μσ p_σ - R_σμ p_μ) ln(R_μσ p_σ / R_σμ p_μ).
        let mut rate = 0.0;
        for mu in 0..3 {
            for s in 0..3 {
                if mu != s {
                    let (f, b) = (rates[mu][s] * p[s], rates[s][mu] * p[mu]);
                    rate += 0.5 * (f - b) * (f / b).ln();
                }
            }
        }
        let e = entropy_production_components(&m, &rho, 2.0).unwrap();
        assert!((e.total() - 2.0 * rate).abs() < 1e-9 * rate.abs().max(1.0));
    }

    #[test]
    fn zero_weights_give_zero_correction() {
        let m = maser();
        let l = build_liouvillian(&m).unwrap();
        let rho = steady_state(&l).unwrap();
        let dz = drazin_inverse(&l, &rho).unwrap();
        let (parts, _) = imprinting_parts(&m, BoundKind::Kur, &rho).unwrap();
        assert_eq!(drazin_correction(&m, &rho, &dz, &[0.0; 4], &parts[0], 10.0), 0.0);
    }

    /// `∂_{φ_α}⟨Φ_α⟩ - ⟨Φ_α⟩` per unit time from exact deformed dynamics.
    fn fd_correction_rate(m: &LindbladModel, kind: BoundKind, defs: &[ObservableDef; 2], alpha: usize, global: bool) -> f64 {
        let l = build_liouvillian(m).unwrap();
        let rho = steady_state(&l).unwrap();
        let coeffs = match kind {
            BoundKind::Kur => vec![1.0; m.channels().len()],
            BoundKind::Tur => steady_state_coefficients(m, &rho).unwrap(),
        };
        let gap = relaxation_gap(m).unwrap();
        let t = 50.0 / gap;
        let eps = 1e-4;
        let mean_at = |phi: f64, t: f64| {
            let factors: Vec<f64> = m
                .channels()
                .iter()
                .enumerate()
                .map(|(k, ch)| if global || ch.group == alpha { 1.0 + coeffs[k] * phi } else { 1.0 })
                .collect();
            deformed_observable_mean(m, &rho, &defs[alpha].weights, 1.0 + phi, &factors, t).unwrap()
        };
        let deriv = |t: f64| (mean_at(eps, t) - mean_at(-eps, t)) / (2.0 * eps);
        let slope = (deriv(2.0 * t) - deriv(t)) / t;
        let mean_rate = stationary_mean(m, &rho, &defs[alpha].weights, 1.0);
        slope - mean_rate
    }

    fn drazin_rate(m: &LindbladModel, kind: BoundKind, defs: &[ObservableDef; 2]) -> Corrections {
        let l = build_liouvillian(m).unwrap();
        let rho = steady_state(&l).unwrap();
        let dz = drazin_inverse(&l, &rho).unwrap();
        corrections(m, kind, defs, &rho, &dz, 1.0).unwrap()
    }

    #[test]
    fn kur_corrections_match_deformed_dynamics() {
        for (m, defs) in [
            (maser(), count_defs()),
            (maser(), heat_defs()),
            (build_driven_qubit(0.0, 1.0, 1.0, 1.0).unwrap(), [
                ObservableDef::new("abs", vec![1.0, 0.0]),
                ObservableDef::new("emit", vec![0.0, 1.0]),
            ]),
        ] {
            let c = drazin_rate(&m, BoundKind::Kur, &defs);
            for alpha in 0..2 {
                let fd = fd_correction_rate(&m, BoundKind::Kur, &defs, alpha, false);
                assert!((c.star[alpha] - fd).abs() <= 1e-2 * fd.abs().max(1e-6), "{} vs {fd}", c.star[alpha]);
            }
        }
    }

    #[test]
    fn tur_corrections_match_deformed_dynamics() {
        let m = maser();
        let c = drazin_rate(&m, BoundKind::Tur, &heat_defs());
        for alpha in 0..2 {
            let fd = fd_correction_rate(&m, BoundKind::Tur, &heat_defs(), alpha, false);
            assert!((c.star[alpha] - fd).abs() <= 1e-2 * fd.abs().max(1e-6), "{} vs {fd}", c.star[alpha]);
            let fd_single = fd_correction_rate(&m, BoundKind::Tur, &heat_defs(), alpha, true);
            assert!((c.single_star[alpha] - fd_single).abs() <= 1e-2 * fd_single.abs().max(1e-6));
        }
    }

    #[test]
    fn single_kur_correction_vanishes_at_long_times() {
        let c = drazin_rate(&maser(), BoundKind::Kur, &count_defs());
        for a in 0..2 {
            assert!(c.single_ratios[a].abs() < 1e-10);
        }
    }

    #[test]
    fn flipping_weights_flips_star_but_not_ratio() {
        let m = maser();
        let flipped = heat_defs().map(|d| ObservableDef::new(d.name, d.weights.iter().map(|w| -w).collect()));
        let a = drazin_rate(&m, BoundKind::Tur, &heat_defs());
        let b = drazin_rate(&m, BoundKind::Tur, &flipped);
        for i in 0..2 {
            assert!((a.star[i] + b.star[i]).abs() < 1e-14);
            assert!((a.ratios[i] - b.ratios[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn equilibrium_currents_have_undefined_corrections() {
        let m = build_three_level_maser(0.0, 0.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let c = drazin_rate(&m, BoundKind::Tur, &heat_defs());
        assert_eq!(c.undefined(), [true, true]);
    }

    #[test]
    fn commutator_form_matches_drazin_form() {
        for (m, defs) in [
            (asymmetric_pair(), [
                ObservableDef::new("a", vec![1.0, -1.0, 0.0, 0.0]),
                ObservableDef::new("b", vec![0.0, 0.0, 1.0, -1.0]),
            ]),
            (maser(), count_defs()),
        ] {
            let c = drazin_rate(&m, BoundKind::Kur, &defs);
            let gap = relaxation_gap(&m).unwrap();
            for alpha in 0..2 {
                let h = commutator_form_correction(&m, BoundKind::Kur, &defs, alpha, 1.0, 40.0 / gap).unwrap();
                assert!((h - c.star[alpha]).abs() <= 1e-8 * c.star[alpha].abs().max(1e-3), "{h} vs {}", c.star[alpha]);
            }
        }
    }

    #[test]
    fn time_integral_drazin_oracle() {
        // ℒ⁺ = -∫₀^∞ e^{ℒt}(1 - P) dt, checked column by column.
        let m = maser();
        let l = build_liouvillian(&m).unwrap();
        let rho = steady_state(&l).unwrap();
        let dz = drazin_inverse(&l, &rho).unwrap();
        let gap = relaxation_gap(&m).unwrap();
        let probe = Operator::from_real(3, &[0.5, 0.2, 0.0, 0.2, -0.3, 0.1, 0.0, 0.1, -0.2]).unwrap();
        let traceless = Operator::new(probe.matrix() - rho.matrix() * probe.trace()).unwrap();
        let integral = integrate_along(&l, &traceless, 0.0, 40.0 / gap, 1e-12, |x| {
            Ok(x.matrix().iter().flat_map(|z| [z.re, z.im]).collect())
        })
        .unwrap();
        let direct = dz.apply(&traceless).unwrap();
        let direct: Vec<f64> = direct.matrix().iter().flat_map(|z| [z.re, z.im]).collect();
        for (a, b) in integral.iter().zip(&direct) {
            assert!((a + b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn thermo_report_flags_transients() {
        let m = maser();
        let rep = thermo_report(&m, BoundKind::Kur, &count_defs(), &Operator::transition(3, 1, 1), 10.0).unwrap();
        assert!(rep.transient_neglected);
        assert!(rep.entropy.is_none());
        let rho = steady_state(&build_liouvillian(&m).unwrap()).unwrap();
        let rep = thermo_report(&m, BoundKind::Tur, &heat_defs(), &rho, 10.0).unwrap();
        assert!(!rep.transient_neglected);
        let e = rep.entropy.unwrap();
        assert!((e.total() - e.delta_s_env).abs() < 1e-6 * e.total());
    }
}
