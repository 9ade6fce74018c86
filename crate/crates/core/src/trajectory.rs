//! Quantum-jump trajectory sampling over `[0, τ]`.
//!
//! The Gillespie sampler draws each waiting time by inverting the no-jump
//! survival probability `‖U(t)ψ‖²`. The same engine optionally carries
//! derivative vectors `∂_α ψ̃` of the unnormalized conditional state, which is
//! all the Fisher pipeline needs (see [`crate::monitoring`]).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, Operator, C64, IM, ZERO};
use crate::model::LindbladModel;

/// Tolerance on `‖ψ₀‖² = 1`.
const NORM_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMethod {
    Gillespie,
    FixedDt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub method: SamplerMethod,
    /// Step of the fixed-step sampler.
    pub dt: f64,
    /// Relative tolerance on jump times.
    pub root_tol: f64,
    pub max_jumps: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            method: SamplerMethod::Gillespie,
            dt: 1e-3,
            root_tol: 1e-10,
            max_jumps: 1_000_000,
        }
    }
}

impl SamplerConfig {
    pub fn fixed_dt(dt: f64) -> Self {
        Self {
            method: SamplerMethod::FixedDt,
            dt,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidSampler(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.root_tol > 0.0 && self.root_tol <= 1e-3) {
            return Err(Error::InvalidSampler(format!(
                "root_tol must lie in (0, 1e-3], got {}",
                self.root_tol
            )));
        }
        if self.max_jumps == 0 {
            return Err(Error::InvalidSampler("max_jumps must be positive".into()));
        }
        Ok(())
    }
}

/// One jump record `{(t_1,k_1), (t_2,k_2), …}` on `[0, τ]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub events: Vec<(f64, usize)>,
    pub tau: f64,
    pub seed: u64,
    pub final_state: CVector,
}

impl TrajectoryRecord {
    /// `seed t_1 k_1 t_2 k_2 …` on one line.
    pub fn dump_line(&self) -> String {
        let mut line = self.seed.to_string();
        for (t, k) in &self.events {
            line.push_str(&format!(" {t} {k}"));
        }
        line
    }

    /// Inverse of [`Self::dump_line`], returning the seed and events.
    pub fn parse_dump_line(line: &str) -> Option<(u64, Vec<(f64, usize)>)> {
        let mut tokens = line.split_whitespace();
        let seed = tokens.next()?.parse().ok()?;
        let rest: Vec<&str> = tokens.collect();
        if rest.len() % 2 != 0 {
            return None;
        }
        let events = rest
            .chunks(2)
            .map(|p| Some((p[0].parse().ok()?, p[1].parse().ok()?)))
            .collect::<Option<Vec<_>>>()?;
        Some((seed, events))
    }
}

/// Initial condition of an ensemble. Mixed states are sampled from their
/// eigen-ensemble, one pure component per trajectory.
#[derive(Clone, Debug)]
pub enum InitialState {
    Pure(CVector),
    Mixed(Operator),
}

impl InitialState {
    /// Basis state `|i⟩` in dimension `dim`.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = CVector::zeros(dim);
        v[i] = C64::new(1.0, 0.0);
        Self::Pure(v)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Pure(v) => v.len(),
            Self::Mixed(rho) => rho.dim(),
        }
    }

    /// The density matrix this ensemble reproduces.
    pub fn density(&self) -> Operator {
        match self {
            Self::Pure(v) => Operator::projector(v),
            Self::Mixed(rho) => rho.clone(),
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, Self::Pure(_))
    }

    fn sampler(&self) -> Result<ComponentSampler> {
        match self {
            Self::Pure(v) => {
                check_normalized(v)?;
                Ok(ComponentSampler {
                    weights: vec![1.0],
                    states: vec![v.clone()],
                })
            }
            Self::Mixed(rho) => {
                let trace = rho.trace().re;
                if (trace - 1.0).abs() > NORM_TOL {
                    return Err(Error::NotNormalized(trace));
                }
                let (values, vectors) = rho.hermitian_eigen();
                let mut weights = Vec::new();
                let mut states = Vec::new();
                for (j, &w) in values.iter().enumerate() {
                    if w > 0.0 {
                        weights.push(w);
                        states.push(vectors.column(j).into_owned());
                    }
                }
                Ok(ComponentSampler { weights, states })
            }
        }
    }
}

struct ComponentSampler {
    weights: Vec<f64>,
    states: Vec<CVector>,
}

impl ComponentSampler {
    fn draw(&self, rng: &mut ChaCha8Rng) -> CVector {
        if self.states.len() == 1 {
            return self.states[0].clone();
        }
        let total: f64 = self.weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for (w, s) in self.weights.iter().zip(&self.states) {
            if u < *w {
                return s.clone();
            }
            u -= w;
        }
        self.states.last().expect("non-empty ensemble").clone()
    }
}

fn check_normalized(psi: &CVector) -> Result<()> {
    let n = psi.norm_squared();
    if (n - 1.0).abs() > NORM_TOL || !n.is_finite() {
        return Err(Error::NotNormalized(n));
    }
    Ok(())
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of trajectory `index` under `master_seed`.
pub fn counter_hash(master_seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// Row-major dense matrix for allocation-free products in the hot loop.
#[derive(Clone, Debug)]
pub(crate) struct Dense {
    d: usize,
    m: Vec<C64>,
}

impl Dense {
    pub(crate) fn new(m: &CMatrix) -> Self {
        let d = m.nrows();
        let mut data = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                data.push(m[(i, j)]);
            }
        }
        Self { d, m: data }
    }

    #[inline]
    fn apply(&self, x: &[C64], out: &mut [C64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.d) {
            let row = &self.m[i * self.d..(i + 1) * self.d];
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    #[inline]
    fn apply_add(&self, x: &[C64], out: &mut [C64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.d) {
            let row = &self.m[i * self.d..(i + 1) * self.d];
            *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<C64>();
        }
    }
}

fn norm_sq(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

fn inner(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// First-order parameter response of the trajectory propagators.
///
/// Parameter `p` deforms the no-jump generator by `B_p = -i∂H_eff^{(p)}` and
/// each jump operator by `∂L_k = c_{pk} L_k`.
#[derive(Clone, Debug, Default)]
pub(crate) struct Response {
    pub(crate) d_generator: Vec<CMatrix>,
    pub(crate) jump_coeffs: Vec<Vec<f64>>,
}

impl Response {
    fn count(&self) -> usize {
        self.d_generator.len()
    }
}

/// Output of the engine: the record plus `2Re⟨ψ|∂_pψ⟩/‖ψ‖²` per parameter.
pub(crate) struct EngineOutput {
    pub(crate) record: TrajectoryRecord,
    pub(crate) scores: Vec<f64>,
}

/// Per-model cached data shared read-only by all trajectories.
pub(crate) struct Engine {
    d: usize,
    params: usize,
    /// `A = -iH_eff`.
    a: Dense,
    b: Vec<Dense>,
    decay: Dense,
    jumps: Vec<Dense>,
    active: Vec<usize>,
    coeffs: Vec<Vec<f64>>,
    step: f64,
    u: Dense,
    du: Vec<Dense>,
    /// Fixed-step `1 - iH_eff dt` and `B dt`, built on demand.
    euler: Option<(f64, Dense, Vec<Dense>)>,
    config: SamplerConfig,
}

impl Engine {
    pub(crate) fn new(model: &LindbladModel, response: Response, config: &SamplerConfig) -> Result<Self> {
        config.check()?;
        let d = model.dim();
        let a_mat = model.effective_hamiltonian().matrix() * (-IM);
        let decay_mat = model.total_decay_operator();
        let params = response.count();

        let (decay_values, _) = Operator::new(decay_mat.clone())?.hermitian_eigen();
        let gamma_max = decay_values.iter().copied().fold(0.0, f64::max);
        let a_norm = a_mat.iter().map(|z| z.norm()).sum::<f64>().max(1e-300);
        let mut step = (0.25 / a_norm).min(if gamma_max > 0.0 { 0.05 / gamma_max } else { f64::INFINITY });
        if !step.is_finite() {
            step = 1.0;
        }

        let (u, du) = augmented_step(&a_mat, &response.d_generator, step);
        let euler = (config.method == SamplerMethod::FixedDt).then(|| {
            let m0 = CMatrix::identity(d, d) + &a_mat * C64::new(config.dt, 0.0);
            let dm0 = response
                .d_generator
                .iter()
                .map(|b| Dense::new(&(b * C64::new(config.dt, 0.0))))
                .collect();
            (config.dt, Dense::new(&m0), dm0)
        });

        let active = (0..model.channels().len())
            .filter(|&k| !model.channels()[k].is_inert())
            .collect();
        Ok(Self {
            d,
            params,
            a: Dense::new(&a_mat),
            b: response.d_generator.iter().map(Dense::new).collect(),
            decay: Dense::new(&decay_mat),
            jumps: model
                .channels()
                .iter()
                .map(|c| Dense::new(c.operator.matrix()))
                .collect(),
            active,
            coeffs: response.jump_coeffs,
            step,
            u: Dense::new(&u),
            du: du.iter().map(Dense::new).collect(),
            euler,
            config: config.clone(),
        })
    }

    pub(crate) fn run(&self, init: &InitialState, tau: f64, seed: u64) -> Result<EngineOutput> {
        self.run_with(&init.sampler()?, tau, seed)
    }

    fn run_with(&self, init: &ComponentSampler, tau: f64, seed: u64) -> Result<EngineOutput> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::NegativeTime(tau));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi0 = init.draw(&mut rng);
        if psi0.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: psi0.len(),
            });
        }
        let mut st = WalkState::new(psi0.as_slice(), self.params);
        let events = match self.config.method {
            SamplerMethod::Gillespie => self.gillespie(&mut st, tau, &mut rng)?,
            SamplerMethod::FixedDt => self.fixed_step(&mut st, tau, &mut rng)?,
        };
        let norm = norm_sq(&st.psi);
        let scores = (0..self.params)
            .map(|p| 2.0 * inner(&st.psi, st.deriv(p)).re / norm)
            .collect();
        let scale = norm.sqrt();
        let final_state = CVector::from_iterator(self.d, st.psi.iter().map(|z| z / scale));
        Ok(EngineOutput {
            record: TrajectoryRecord {
                events,
                tau,
                seed,
                final_state,
            },
            scores,
        })
    }

    fn gillespie(&self, st: &mut WalkState, tau: f64, rng: &mut ChaCha8Rng) -> Result<Vec<(f64, usize)>> {
        let mut events = Vec::new();
        let mut t = 0.0;
        let mut next = WalkState::new(&st.psi, self.params);
        loop {
            // Survival target in (0, 1]; ψ is normalized at the start.
            let r = 1.0 - rng.random::<f64>();
            let remaining = tau - t;
            let mut s = 0.0;
            let mut crossed = None;
            while s < remaining {
                let full = s + self.step <= remaining;
                let h = if full { self.step } else { remaining - s };
                if full {
                    self.advance_cached(st, &mut next);
                } else {
                    self.advance_taylor(st, &mut next, h, true);
                }
                if norm_sq(&next.psi) < r {
                    crossed = Some(h);
                    break;
                }
                std::mem::swap(st, &mut next);
                s += h;
            }
            let Some(h) = crossed else {
                st.normalize();
                return Ok(events);
            };
            let delta = self.find_crossing(st, h, r, s);
            self.advance_taylor(st, &mut next, delta, true);
            std::mem::swap(st, &mut next);
            t += s + delta;
            if t > tau {
                // Rounding at the window edge.
                t = tau;
            }
            let k = self.select_channel(&st.psi, rng);
            self.apply_jump(st, &mut next, k)?;
            std::mem::swap(st, &mut next);
            events.push((t, k));
            if events.len() > self.config.max_jumps {
                return Err(Error::DivergingRate(self.config.max_jumps));
            }
        }
    }

    fn fixed_step(&self, st: &mut WalkState, tau: f64, rng: &mut ChaCha8Rng) -> Result<Vec<(f64, usize)>> {
        let (dt, m0, dm0) = self.euler.as_ref().expect("fixed-step data built for this method");
        let steps = (tau / dt).ceil() as usize;
        let mut events = Vec::new();
        let mut next = WalkState::new(&st.psi, self.params);
        let mut rates = vec![0.0; self.jumps.len()];
        let mut buf = vec![ZERO; self.d];
        for i in 0..steps {
            let t0 = i as f64 * dt;
            let h = dt.min(tau - t0);
            let norm = norm_sq(&st.psi);
            let mut total = 0.0;
            for &k in &self.active {
                self.jumps[k].apply(&st.psi, &mut buf);
                rates[k] = norm_sq(&buf) / norm;
                total += rates[k];
            }
            let u: f64 = rng.random();
            if u < total * h {
                let mut x = u / h;
                let mut chosen = *self.active.last().expect("active channel");
                for &k in &self.active {
                    if x < rates[k] {
                        chosen = k;
                        break;
                    }
                    x -= rates[k];
                }
                self.apply_jump(st, &mut next, chosen)?;
                events.push(((t0 + h).min(tau), chosen));
                if events.len() > self.config.max_jumps {
                    return Err(Error::DivergingRate(self.config.max_jumps));
                }
            } else if h == *dt {
                m0.apply(&st.psi, &mut next.psi);
                for p in 0..self.params {
                    let (src, dst) = (st.deriv(p), next.deriv_mut(p));
                    m0.apply(src, dst);
                    dm0[p].apply_add(&st.psi, dst);
                }
                next.normalize_by(norm_sq(&next.psi).sqrt());
            } else {
                // Last partial step.
                let frac = h / dt;
                for j in 0..self.d {
                    let mut acc = ZERO;
                    for (l, x) in st.psi.iter().enumerate() {
                        acc += self.a.m[j * self.d + l] * x;
                    }
                    next.psi[j] = st.psi[j] + acc * h;
                }
                for p in 0..self.params {
                    let src = st.deriv(p).to_vec();
                    let dst = next.deriv_mut(p);
                    self.a.apply(&src, dst);
                    for j in 0..self.d {
                        dst[j] = src[j] + dst[j] * h;
                    }
                    let mut tmp = vec![ZERO; self.d];
                    dm0[p].apply(&st.psi, &mut tmp);
                    for j in 0..self.d {
                        dst[j] += tmp[j] * frac;
                    }
                }
                next.normalize_by(norm_sq(&next.psi).sqrt());
            }
            std::mem::swap(st, &mut next);
        }
        st.normalize();
        Ok(events)
    }

    /// `next = U(h)·st` with the cached step propagators.
    fn advance_cached(&self, st: &WalkState, next: &mut WalkState) {
        self.u.apply(&st.psi, &mut next.psi);
        for p in 0..self.params {
            let dst = next.deriv_mut(p);
            self.u.apply(st.deriv(p), dst);
            self.du[p].apply_add(&st.psi, dst);
        }
    }

    /// `next = exp(δ[[A,B],[0,A]])·[∂ψ; ψ]` by Taylor series (`‖Aδ‖ ≤ 1/4`).
    fn advance_taylor(&self, st: &WalkState, next: &mut WalkState, delta: f64, with_derivs: bool) {
        let d = self.d;
        let params = if with_derivs { self.params } else { 0 };
        let mut y = st.psi.clone();
        let mut x: Vec<C64> = st.derivs[..params * d].to_vec();
        next.psi.copy_from_slice(&st.psi);
        next.derivs[..params * d].copy_from_slice(&x);
        let mut y_new = vec![ZERO; d];
        let mut x_new = vec![ZERO; params * d];
        for n in 1..40 {
            let f = delta / n as f64;
            for p in 0..params {
                let out = &mut x_new[p * d..(p + 1) * d];
                self.a.apply(&x[p * d..(p + 1) * d], out);
                self.b[p].apply_add(&y, out);
                out.iter_mut().for_each(|z| *z *= f);
            }
            self.a.apply(&y, &mut y_new);
            y_new.iter_mut().for_each(|z| *z *= f);
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut x, &mut x_new);
            for j in 0..d {
                next.psi[j] += y[j];
            }
            for (acc, term) in next.derivs.iter_mut().zip(&x) {
                *acc += term;
            }
            let size = norm_sq(&y) + norm_sq(&x);
            let total = norm_sq(&next.psi) + norm_sq(&next.derivs[..params * d]);
            if size <= 1e-34 * total || size == 0.0 {
                break;
            }
        }
    }

    /// Offset `δ ∈ (0, h]` with `‖ψ̃(δ)‖² = r`, by safeguarded Newton steps.
    fn find_crossing(&self, st: &WalkState, h: f64, r: f64, elapsed: f64) -> f64 {
        let mut lo = 0.0;
        let mut hi = h;
        let mut delta = 0.5 * h;
        let mut probe = WalkState::new(&st.psi, 0);
        let mut gpsi = vec![ZERO; self.d];
        let scale = (elapsed + h).max(h);
        for _ in 0..100 {
            self.advance_taylor(st, &mut probe, delta, false);
            let f = norm_sq(&probe.psi) - r;
            if f > 0.0 {
                lo = delta;
            } else {
                hi = delta;
            }
            self.decay.apply(&probe.psi, &mut gpsi);
            let slope = -inner(&probe.psi, &gpsi).re;
            let newton = delta - f / slope;
            let next = if slope < 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let moved = (next - delta).abs();
            delta = next;
            if moved <= self.config.root_tol * scale * 1e-3 || hi - lo <= self.config.root_tol * scale * 1e-3 {
                break;
            }
        }
        delta.clamp(0.0, h)
    }

    fn select_channel(&self, psi: &[C64], rng: &mut ChaCha8Rng) -> usize {
        let mut buf = vec![ZERO; self.d];
        let weights: Vec<f64> = self
            .active
            .iter()
            .map(|&k| {
                self.jumps[k].apply(psi, &mut buf);
                norm_sq(&buf)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for (&k, w) in self.active.iter().zip(&weights) {
            if u < *w {
                return k;
            }
            u -= w;
        }
        // Only reachable through rounding; pick the last channel with weight.
        let last = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        self.active[last]
    }

    /// `ψ'' = Lψ̃`, `∂ψ'' = c_k Lψ̃ + L∂ψ̃`, both normalized by `‖ψ''‖`.
    fn apply_jump(&self, st: &WalkState, next: &mut WalkState, k: usize) -> Result<()> {
        let l = &self.jumps[k];
        l.apply(&st.psi, &mut next.psi);
        for p in 0..self.params {
            let c = self.coeffs[p][k];
            let WalkState { psi, derivs, d } = next;
            let dst = &mut derivs[p * *d..(p + 1) * *d];
            l.apply(st.deriv(p), dst);
            for (z, x) in dst.iter_mut().zip(psi.iter()) {
                *z += x * c;
            }
        }
        let n = norm_sq(&next.psi);
        if n < 1e-300 {
            return Err(Error::Underflow(n));
        }
        next.normalize_by(n.sqrt());
        Ok(())
    }
}

/// Unnormalized conditional state and its parameter derivatives.
#[derive(Clone, Debug)]
struct WalkState {
    d: usize,
    psi: Vec<C64>,
    derivs: Vec<C64>,
}

impl WalkState {
    fn new(psi: &[C64], params: usize) -> Self {
        Self {
            d: psi.len(),
            psi: psi.to_vec(),
            derivs: vec![ZERO; params * psi.len()],
        }
    }

    fn deriv(&self, p: usize) -> &[C64] {
        &self.derivs[p * self.d..(p + 1) * self.d]
    }

    fn deriv_mut(&mut self, p: usize) -> &mut [C64] {
        &mut self.derivs[p * self.d..(p + 1) * self.d]
    }

    fn normalize(&mut self) {
        let n = norm_sq(&self.psi).sqrt();
        self.normalize_by(n);
    }

    /// Dividing state and derivatives by the same φ-independent constant
    /// leaves every score unchanged.
    fn normalize_by(&mut self, n: f64) {
        let inv = 1.0 / n;
        self.psi.iter_mut().for_each(|z| *z *= inv);
        self.derivs.iter_mut().for_each(|z| *z *= inv);
    }
}

/// `exp(h[[A,B_p],[0,A]])` blocks: the step propagator and its derivatives.
pub(crate) fn augmented_step(a: &CMatrix, b: &[CMatrix], h: f64) -> (CMatrix, Vec<CMatrix>) {
    let d = a.nrows();
    let u = (a * C64::new(h, 0.0)).exp();
    let du = b
        .iter()
        .map(|bp| {
            let mut big = CMatrix::zeros(2 * d, 2 * d);
            big.view_mut((0, 0), (d, d)).copy_from(a);
            big.view_mut((d, d), (d, d)).copy_from(a);
            big.view_mut((0, d), (d, d)).copy_from(bp);
            let e = (big * C64::new(h, 0.0)).exp();
            e.view((0, d), (d, d)).into_owned()
        })
        .collect();
    (u, du)
}

fn with_workers<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map(|pool| pool.install(job))
            .unwrap_or_else(|_| panic!("failed to build a {n}-thread pool")),
        None => job(),
    }
}

/// Runs `m` engine trajectories in parallel, merged by index.
pub(crate) fn run_engine_ensemble(
    engine: &Engine,
    init: &InitialState,
    tau: f64,
    m: usize,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<Vec<EngineOutput>> {
    if m == 0 {
        return Err(Error::TooFewSamples { required: 1, found: 0 });
    }
    let components = init.sampler()?;
    with_workers(workers, || {
        (0..m)
            .into_par_iter()
            .map(|i| {
                engine
                    .run_with(&components, tau, counter_hash(master_seed, i as u64))
                    .map_err(|e| Error::Trajectory {
                        index: i,
                        source: Box::new(e),
                    })
            })
            .collect()
    })
}

/// One trajectory of `model` from the normalized pure state `psi0`.
pub fn sample_trajectory(
    model: &LindbladModel,
    psi0: &CVector,
    tau: f64,
    seed: u64,
    config: &SamplerConfig,
) -> Result<TrajectoryRecord> {
    let engine = Engine::new(model, Response::default(), config)?;
    Ok(engine.run(&InitialState::Pure(psi0.clone()), tau, seed)?.record)
}

/// `m` trajectories; trajectory `i` uses seed `counter_hash(master_seed, i)`.
/// `workers = None` uses the global thread pool.
pub fn run_ensemble(
    model: &LindbladModel,
    init: &InitialState,
    tau: f64,
    m: usize,
    master_seed: u64,
    config: &SamplerConfig,
    workers: Option<usize>,
) -> Result<Vec<TrajectoryRecord>> {
    let engine = Engine::new(model, Response::default(), config)?;
    Ok(run_engine_ensemble(&engine, init, tau, m, master_seed, workers)?
        .into_iter()
        .map(|o| o.record)
        .collect())
}
