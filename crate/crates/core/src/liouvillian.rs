//! Liouvillian construction, steady states, the Drazin inverse and spectral
//! data.

use nalgebra::SVD;

use crate::error::{Error, Result};
use crate::linalg::{
    max_abs, trace_functional, unvectorize, vectorize, CMatrix, CVector, LiouvilleVector,
    Operator, SuperKind, Superoperator, C64, ONE,
};
use crate::model::LindbladModel;

/// Singular values below this (relative to the largest) count as zero modes.
const NULL_TOL: f64 = 1e-9;

/// `ℒρ = -i[H,ρ] + Σ_k D[L_k]ρ`.
pub fn build_liouvillian(model: &LindbladModel) -> Result<Superoperator> {
    if model.channels().is_empty() {
        return Err(Error::EmptyChannels);
    }
    let coeffs = vec![1.0; model.channels().len()];
    Ok(weighted_liouvillian(model, None, &coeffs))
}

/// `𝒟_α ρ = Σ_{k∈S_α} D[L_k]ρ`.
pub fn group_dissipator(model: &LindbladModel, alpha: usize) -> Superoperator {
    let mut out = Superoperator::zeros(model.dim(), SuperKind::DissipatorPart);
    for k in model.group_members(alpha) {
        out.add_scaled(&Superoperator::dissipator(&model.channels()[k].operator), 1.0);
    }
    out
}

/// `ℒ_α ρ = -i[H,ρ] + Σ_{k∈S_α} D[L_k]ρ`: the generator's response to the
/// KUR imprinting of parameter α.
pub fn group_liouvillian(model: &LindbladModel, alpha: usize) -> Superoperator {
    let coeffs = vec![1.0; model.channels().len()];
    weighted_liouvillian(model, Some(alpha), &coeffs)
}

/// `-i[H,·] + Σ_k c_k D[L_k]`, restricted to group `alpha` when given.
///
/// With `c_k = 1` this is the (group-restricted) Liouvillian; with
/// `c_k = l_k^ss` it is the TUR analog `ℒ_α[ρ_ss]`.
pub fn weighted_liouvillian(
    model: &LindbladModel,
    alpha: Option<usize>,
    coeffs: &[f64],
) -> Superoperator {
    let mut out = Superoperator::commutator(model.hamiltonian());
    for (k, ch) in model.channels().iter().enumerate() {
        if alpha.is_some_and(|a| ch.group != a) || coeffs[k] == 0.0 {
            continue;
        }
        out.add_scaled(&Superoperator::dissipator(&ch.operator), coeffs[k]);
    }
    out.with_kind(SuperKind::Liouvillian)
}

/// `𝒥 X = Σ_k w_k L_k X L_k†`.
pub fn jump_superoperator(model: &LindbladModel, weights: &[f64]) -> Superoperator {
    let mut out = Superoperator::zeros(model.dim(), SuperKind::JumpSuper);
    for (k, ch) in model.channels().iter().enumerate() {
        if weights[k] != 0.0 {
            out.add_scaled(&Superoperator::jump(&ch.operator, 1.0), weights[k]);
        }
    }
    out
}

fn zero_mode_count(m: &CMatrix) -> usize {
    let svd = SVD::new(m.clone(), false, false);
    let largest = svd.singular_values.max().max(1.0);
    svd.singular_values
        .iter()
        .filter(|&&s| s < NULL_TOL * largest)
        .count()
}

/// The unique density matrix with `ℒρ = 0`.
pub fn steady_state(liouvillian: &Superoperator) -> Result<Operator> {
    let m = liouvillian.matrix();
    let zeros = zero_mode_count(m);
    if zeros != 1 {
        return Err(Error::NonErgodicModel(zeros));
    }
    let d = liouvillian.dim();
    // The trace row is a combination of the population rows, so replacing the
    // first population row by the normalization keeps the system regular.
    let mut system = m.clone();
    let trace_row = trace_functional(d);
    for j in 0..d * d {
        system[(0, j)] = trace_row[j];
    }
    let mut rhs = CVector::zeros(d * d);
    rhs[0] = ONE;
    let solution = system
        .lu()
        .solve(&rhs)
        .ok_or(Error::NonErgodicModel(zeros))?;
    let rho = unvectorize(&LiouvilleVector::new(solution))?;
    let herm = (rho.matrix() + rho.matrix().adjoint()) * C64::new(0.5, 0.0);
    let trace = herm.trace();
    Operator::new(herm / trace)
}

/// `ℒ⁺ = (ℒ + |ρ_ss⟩⟨𝟙|)⁻¹ - |ρ_ss⟩⟨𝟙|`, the inverse on the complement of the
/// stationary mode.
pub fn drazin_inverse(liouvillian: &Superoperator, rho_ss: &Operator) -> Result<Superoperator> {
    let projector = stationary_projector(rho_ss);
    let shifted = liouvillian.matrix() + &projector;
    let inverse = shifted
        .try_inverse()
        .ok_or_else(|| Error::NonErgodicModel(zero_mode_count(liouvillian.matrix())))?;
    Superoperator::new(inverse - projector, SuperKind::Drazin)
}

/// `|ρ_ss⟩⟨𝟙|`.
pub fn stationary_projector(rho_ss: &Operator) -> CMatrix {
    let d = rho_ss.dim();
    vectorize(rho_ss).as_vector() * trace_functional(d).transpose()
}

/// Right/left eigenvectors of a diagonalizable Liouvillian, normalized so
/// that `⟨y_j|x_k⟩ = δ_jk`.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub eigenvalues: Vec<C64>,
    /// Right eigenvectors `|x_j⟩` as columns.
    pub right: CMatrix,
    /// Left eigenvectors `⟨y_j|` as rows.
    pub left: CMatrix,
}

impl SpectralData {
    /// Index of the eigenvalue closest to zero.
    pub fn stationary_index(&self) -> usize {
        (0..self.eigenvalues.len())
            .min_by(|&a, &b| {
                self.eigenvalues[a]
                    .norm()
                    .total_cmp(&self.eigenvalues[b].norm())
            })
            .unwrap_or(0)
    }

    /// `min_{j≠0} |Re λ_j|`, the relaxation rate of the slowest mode.
    pub fn spectral_gap(&self) -> f64 {
        let s = self.stationary_index();
        self.eigenvalues
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != s)
            .map(|(_, l)| l.re.abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// `Σ_j e^{λ_j t} |x_j⟩⟨y_j|`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        let n = self.eigenvalues.len();
        let mut scaled = self.right.clone();
        for j in 0..n {
            let f = (self.eigenvalues[j] * t).exp();
            for i in 0..n {
                scaled[(i, j)] *= f;
            }
        }
        scaled * &self.left
    }

    /// `max |⟨y_j|x_k⟩ - δ_jk|`.
    pub fn biorthogonality_defect(&self) -> f64 {
        let n = self.eigenvalues.len();
        max_abs(&(&self.left * &self.right - CMatrix::identity(n, n)))
    }
}

/// Eigendecomposition of a superoperator through its Schur eigenvalues and
/// per-eigenvalue null spaces.
pub fn spectral_decomposition(generator: &Superoperator) -> Result<SpectralData> {
    let m = generator.matrix();
    let n = m.nrows();
    let schur_values = m
        .clone()
        .schur()
        .eigenvalues()
        .ok_or(Error::NonDiagonalizable(f64::INFINITY))?;
    let scale = max_abs(m).max(1.0);

    // Group numerically equal eigenvalues so each cluster gets a full basis.
    let mut clusters: Vec<(C64, usize)> = Vec::new();
    for &lambda in schur_values.iter() {
        match clusters
            .iter_mut()
            .find(|(c, _)| (*c - lambda).norm() < 1e-7 * scale)
        {
            Some((c, count)) => {
                *c = (*c * (*count as f64) + lambda) / (*count as f64 + 1.0);
                *count += 1;
            }
            None => clusters.push((lambda, 1)),
        }
    }

    let mut right = CMatrix::zeros(n, n);
    let mut col = 0;
    for &(lambda, count) in &clusters {
        let shifted = m - CMatrix::identity(n, n) * lambda;
        let svd = SVD::new(shifted, false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
        for &idx in order.iter().take(count) {
            for i in 0..n {
                right[(i, col)] = v_t[(idx, i)].conj();
            }
            col += 1;
        }
    }

    let left = right
        .clone()
        .try_inverse()
        .ok_or(Error::NonDiagonalizable(f64::INFINITY))?;
    let cond = max_abs(&right) * max_abs(&left) * n as f64;
    if !cond.is_finite() || cond > 1e8 {
        return Err(Error::NonDiagonalizable(cond));
    }
    let diag = &left * m * &right;
    let eigenvalues = (0..n).map(|j| diag[(j, j)]).collect();
    Ok(SpectralData {
        eigenvalues,
        right,
        left,
    })
}
