//! Dense complex linear algebra on Hilbert and Liouville space.
//!
//! Vectorization is column-stacking throughout: the operator `X` maps to the
//! vector with entry `X[i, j]` at position `i + j * d`. Under this convention
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)`. Every superoperator in the crate is
//! assembled through [`sandwich`], so the convention is fixed in one place.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub(crate) const IM: C64 = C64::new(0.0, 1.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);

/// Tolerance used when an operator is asserted to be Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Largest modulus among the entries of a matrix.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// A square complex operator on a Hilbert space of dimension at least two.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator(CMatrix);

impl Operator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        if rows < 2 {
            return Err(Error::DimensionTooSmall(rows));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("operator"));
        }
        Ok(Self(matrix))
    }

    /// Builds a Hermitian operator, failing if the input is not Hermitian to
    /// [`HERMITIAN_TOL`].
    pub fn hermitian(matrix: CMatrix) -> Result<Self> {
        let op = Self::new(matrix)?;
        if !op.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::InvalidModel(format!(
                "operator is not Hermitian (asymmetry {:.3e})",
                op.hermiticity_defect()
            )));
        }
        Ok(op)
    }

    pub fn from_real(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Self::new(CMatrix::from_fn(dim, dim, |i, j| {
            C64::new(entries[i * dim + j], 0.0)
        }))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    /// The transition operator `|to⟩⟨from|`.
    pub fn transition(dim: usize, to: usize, from: usize) -> Self {
        let mut m = CMatrix::zeros(dim, dim);
        m[(to, from)] = ONE;
        Self(m)
    }

    /// The projector `|ψ⟩⟨ψ|` onto a (not necessarily normalized) vector.
    pub fn projector(psi: &CVector) -> Self {
        Self(psi * psi.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.map(|z| z * factor))
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.0)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        max_abs(&(&self.0 - self.0.adjoint()))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Whether every off-diagonal entry vanishes to `tol`.
    pub fn is_diagonal(&self, tol: f64) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| i == j || self.0[(i, j)].norm() <= tol))
    }

    /// Eigenvalues (ascending) and eigenvectors of the Hermitian part.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, CMatrix) {
        let herm = (&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(herm);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMatrix::from_fn(self.dim(), order.len(), |r, c| {
            eig.eigenvectors[(r, order[c])]
        });
        (values, vectors)
    }

    /// `tr(self · other)`.
    pub fn trace_product(&self, other: &Operator) -> C64 {
        let d = self.dim();
        let mut acc = ZERO;
        for i in 0..d {
            for j in 0..d {
                acc += self.0[(i, j)] * other.0[(j, i)];
            }
        }
        acc
    }
}

/// An operator flattened into Liouville space by column stacking.
#[derive(Clone, Debug, PartialEq)]
pub struct LiouvilleVector(CVector);

impl LiouvilleVector {
    pub fn new(v: CVector) -> Self {
        Self(v)
    }

    pub fn as_vector(&self) -> &CVector {
        &self.0
    }

    pub fn into_vector(self) -> CVector {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `⟨𝟙|v⟩`, the trace of the underlying operator.
    pub fn trace(&self) -> Result<C64> {
        let d = hilbert_dim(self.0.len())?;
        Ok((0..d).map(|i| self.0[i + i * d]).sum())
    }
}

fn hilbert_dim(len: usize) -> Result<usize> {
    let d = (len as f64).sqrt().round() as usize;
    if d * d != len {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            found: len,
        });
    }
    Ok(d)
}

pub fn vectorize(op: &Operator) -> LiouvilleVector {
    // nalgebra stores column-major, so the raw slice is already column-stacked.
    LiouvilleVector(CVector::from_column_slice(op.0.as_slice()))
}

pub fn unvectorize(v: &LiouvilleVector) -> Result<Operator> {
    let d = hilbert_dim(v.len())?;
    Operator::new(CMatrix::from_column_slice(d, d, v.0.as_slice()))
}

/// The trace functional `⟨𝟙|` as a row of length `d²`.
pub fn trace_functional(dim: usize) -> CVector {
    let mut row = CVector::zeros(dim * dim);
    for i in 0..dim {
        row[i + i * dim] = ONE;
    }
    row
}

/// Matrix of the map `X ↦ A X B` in the column-stacking convention.
pub fn sandwich(a: &CMatrix, b: &CMatrix) -> CMatrix {
    b.transpose().kronecker(a)
}

/// What a superoperator represents; carried for diagnostics and checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SuperKind {
    Liouvillian,
    JumpSuper,
    DissipatorPart,
    Drazin,
    Propagator,
}

/// A linear map on operators of Hilbert dimension `dim`, stored as a
/// `dim² × dim²` matrix.
#[derive(Clone, Debug)]
pub struct Superoperator {
    matrix: CMatrix,
    dim: usize,
    kind: SuperKind,
}

impl Superoperator {
    pub fn new(matrix: CMatrix, kind: SuperKind) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        let dim = hilbert_dim(rows)?;
        Ok(Self { matrix, dim, kind })
    }

    pub fn zeros(dim: usize, kind: SuperKind) -> Self {
        Self {
            matrix: CMatrix::zeros(dim * dim, dim * dim),
            dim,
            kind,
        }
    }

    /// `X ↦ -i[H, X]`.
    pub fn commutator(h: &Operator) -> Self {
        let id = CMatrix::identity(h.dim(), h.dim());
        let m = (sandwich(h.matrix(), &id) - sandwich(&id, h.matrix())) * (-IM);
        Self {
            matrix: m,
            dim: h.dim(),
            kind: SuperKind::Liouvillian,
        }
    }

    /// `X ↦ L X L† - ½{L†L, X}`.
    pub fn dissipator(l: &Operator) -> Self {
        let d = l.dim();
        let id = CMatrix::identity(d, d);
        let ldag = l.matrix().adjoint();
        let ldl = &ldag * l.matrix();
        let half = C64::new(0.5, 0.0);
        let m = sandwich(l.matrix(), &ldag) - (sandwich(&ldl, &id) + sandwich(&id, &ldl)) * half;
        Self {
            matrix: m,
            dim: d,
            kind: SuperKind::DissipatorPart,
        }
    }

    /// `X ↦ w L X L†`.
    pub fn jump(l: &Operator, weight: f64) -> Self {
        let m = sandwich(l.matrix(), &l.matrix().adjoint()) * C64::new(weight, 0.0);
        Self {
            matrix: m,
            dim: l.dim(),
            kind: SuperKind::JumpSuper,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> SuperKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: SuperKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn add_scaled(&mut self, other: &Superoperator, factor: f64) {
        self.matrix += &other.matrix * C64::new(factor, 0.0);
    }

    pub fn compose(&self, other: &Superoperator, kind: SuperKind) -> Superoperator {
        Superoperator {
            matrix: &self.matrix * &other.matrix,
            dim: self.dim,
            kind,
        }
    }

    pub fn apply_vec(&self, v: &LiouvilleVector) -> LiouvilleVector {
        LiouvilleVector(&self.matrix * v.as_vector())
    }

    pub fn apply(&self, op: &Operator) -> Result<Operator> {
        if op.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: op.dim(),
            });
        }
        unvectorize(&self.apply_vec(&vectorize(op)))
    }

    /// `⟨𝟙|S`, which vanishes for trace-preserving generators.
    pub fn trace_row(&self) -> CVector {
        self.matrix.tr_mul(&trace_functional(self.dim))
    }

    /// `⟨𝟙| S |v⟩`.
    pub fn trace_of_action(&self, v: &LiouvilleVector) -> C64 {
        let w = &self.matrix * v.as_vector();
        let d = self.dim;
        (0..d).map(|i| w[i + i * d]).sum()
    }
}

/// `e^{S t}` as a propagator superoperator.
pub fn propagator(generator: &Superoperator, t: f64) -> Result<Superoperator> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let m = (generator.matrix() * C64::new(t, 0.0)).exp();
    Ok(Superoperator {
        matrix: m,
        dim: generator.dim(),
        kind: SuperKind::Propagator,
    })
}

/// `e^{S t} ρ`.
pub fn propagate(generator: &Superoperator, state: &Operator, t: f64) -> Result<Operator> {
    propagator(generator, t)?.apply(state)
}

/// The non-unitary no-jump propagator `exp(-i H_eff t)`.
pub fn matrix_exponential(h_eff: &Operator, t: f64) -> Result<Operator> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    Operator::new((h_eff.matrix() * (-IM * t)).exp())
}

/// Smallest eigenvalue accepted by [`matrix_log`].
pub const LOG_EIGEN_FLOOR: f64 = 1e-12;

/// Hermitian matrix logarithm through the eigendecomposition.
pub fn matrix_log(rho: &Operator) -> Result<Operator> {
    let (values, vectors) = rho.hermitian_eigen();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= LOG_EIGEN_FLOOR {
        return Err(Error::SingularState(min));
    }
    let logs = CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|v| C64::new(v.ln(), 0.0)),
    ));
    Operator::new(&vectors * logs * vectors.adjoint())
}

/// Hermitian matrix exponential through the eigendecomposition.
pub fn hermitian_exp(op: &Operator) -> Operator {
    let (values, vectors) = op.hermitian_eigen();
    let exps = CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|v| C64::new(v.exp(), 0.0)),
    ));
    Operator(&vectors * exps * vectors.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma_minus() -> Operator {
        Operator::transition(2, 0, 1)
    }

    fn random_hermitian(d: usize, seed: u64) -> Operator {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = CMatrix::from_fn(d, d, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        Operator::new(&a + a.adjoint()).unwrap()
    }

    #[test]
    fn identity_trace_overlap() {
        let v = vectorize(&Operator::identity(2));
        assert_eq!(v.trace().unwrap(), C64::new(2.0, 0.0));
    }

    #[test]
    fn sigma_minus_has_single_entry() {
        let v = vectorize(&sigma_minus());
        let nonzero: Vec<_> = v.as_vector().iter().filter(|z| z.norm() > 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(nonzero[0].norm(), 1.0);
        // |0⟩⟨1| sits in column 1, row 0.
        assert_eq!(v.as_vector()[2], ONE);
    }

    #[test]
    fn round_trip_random_hermitian() {
        let op = random_hermitian(3, 7);
        assert_eq!(unvectorize(&vectorize(&op)).unwrap(), op);
    }

    #[test]
    fn unvectorize_rejects_non_square_length() {
        let v = LiouvilleVector::new(CVector::zeros(5));
        assert!(matches!(
            unvectorize(&v),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn operator_validation() {
        assert!(matches!(
            Operator::new(CMatrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
        assert!(matches!(
            Operator::new(CMatrix::zeros(1, 1)),
            Err(Error::DimensionTooSmall(1))
        ));
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = C64::new(f64::NAN, 0.0);
        assert!(matches!(Operator::new(m), Err(Error::NonFinite(_))));
    }

    #[test]
    fn sandwich_matches_direct_product() {
        let a = random_hermitian(3, 1).into_matrix();
        let b = random_hermitian(3, 2).into_matrix() * IM;
        let x = random_hermitian(3, 3);
        let direct = Operator::new(&a * x.matrix() * &b).unwrap();
        let via = unvectorize(&LiouvilleVector::new(sandwich(&a, &b) * vectorize(&x).as_vector()))
            .unwrap();
        assert!(max_abs(&(direct.matrix() - via.matrix())) < 1e-14);
    }

    #[test]
    fn dissipator_is_trace_preserving() {
        let l = Operator::new(random_hermitian(3, 4).into_matrix() * C64::new(0.3, 0.8)).unwrap();
        let s = Superoperator::dissipator(&l);
        assert!(s.trace_row().iter().all(|z| z.norm() < 1e-13));
    }

    #[test]
    fn propagate_zero_time_is_identity() {
        let l = Superoperator::dissipator(&sigma_minus());
        let rho = Operator::transition(2, 1, 1);
        let out = propagate(&l, &rho, 0.0).unwrap();
        assert!(max_abs(&(out.matrix() - rho.matrix())) < 1e-15);
        assert!(matches!(propagate(&l, &rho, -1.0), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn excited_population_decays_exponentially() {
        let l = Superoperator::dissipator(&sigma_minus());
        let out = propagate(&l, &Operator::transition(2, 1, 1), 1.0).unwrap();
        assert!((out.matrix()[(1, 1)].re - (-1.0_f64).exp()).abs() < 1e-9);
        assert!((out.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_jump_propagator_is_contractive() {
        let h = random_hermitian(3, 11).into_matrix();
        let gamma = CMatrix::from_diagonal(&CVector::from_vec(vec![
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(2.0, 0.0),
        ]));
        let h_eff = Operator::new(h - gamma * (IM * 0.5)).unwrap();
        let u = matrix_exponential(&h_eff, 0.8).unwrap();
        let psi = CVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.48), C64::new(0.64, 0.0)]);
        let out = u.matrix() * &psi;
        assert!(out.norm() <= psi.norm() + 1e-14);
    }

    #[test]
    fn log_of_maximally_mixed() {
        let rho = Operator::identity(2).scaled(0.5);
        let log = matrix_log(&rho).unwrap();
        let expected = Operator::identity(2).scaled(-(2.0_f64.ln()));
        assert!(max_abs(&(log.matrix() - expected.matrix())) < 1e-14);
    }

    #[test]
    fn log_of_diagonal_state() {
        let rho = Operator::from_real(2, &[0.75, 0.0, 0.0, 0.25]).unwrap();
        let log = matrix_log(&rho).unwrap();
        assert!((log.matrix()[(0, 0)].re - 0.75_f64.ln()).abs() < 1e-14);
        assert!((log.matrix()[(1, 1)].re - 0.25_f64.ln()).abs() < 1e-14);
        assert!(log.matrix()[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn log_rejects_singular_state() {
        let rho = Operator::transition(2, 0, 0);
        assert!(matches!(matrix_log(&rho), Err(Error::SingularState(_))));
    }

    #[test]
    fn log_exp_round_trip() {
        let a = random_hermitian(3, 5);
        let rho = hermitian_exp(&a);
        let back = hermitian_exp(&matrix_log(&rho).unwrap());
        assert!(max_abs(&(back.matrix() - rho.matrix())) < 1e-9);
    }
}
