//! Eigenvalue computations behind the boundary oracle.
//!
//! The generalized problem `A v = -λ B v` with `A ≺ 0` is reduced to a
//! standard symmetric one: factor `-A = L Lᵀ`, take the spectrum `μ` of
//! `L⁻¹ B L⁻ᵀ` (so `μ (-A) v = B v`), then `λ = 1/μ`. Values of `μ` too close
//! to zero have no finite reciprocal and become `±∞`.

use nalgebra::{Cholesky, DMatrix, Dyn, Schur, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::noise::NoiseModel;

/// `|μ|` below this maps to an infinite `λ`.
pub const RECIPROCAL_CUTOFF: f64 = 1e-14;

/// Diagonal shifts tried, in order, when `-A` fails to factor.
pub const DEFAULT_SHIFT_SCHEDULE: [f64; 8] = [0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITER: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("eigensolver did not converge on a {dim}x{dim} matrix (frobenius norm {norm:e})")]
    NoConvergence { dim: usize, norm: f64 },
    #[error("matrix is not square or has mismatched dimensions")]
    Shape,
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("-A is not positive definite after regularization (max eigenvalue of A {max_eig:e})")]
    NotRegularizable { max_eig: f64 },
    #[error("leading coefficient of the matrix polynomial is singular")]
    SingularLeading,
    #[error("matrix polynomial needs degree >= 1 and equally sized square coefficients")]
    BadPolynomial,
}

/// Spectrum plus how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    /// Ascending; infinite sentinels, if any, sit at the ends.
    pub eigenvalues: Vec<f64>,
    /// Diagonal shift `δ` subtracted from `A` before factoring.
    pub shift: f64,
    /// Noise model applied after the exact solve, if any.
    pub noise: Option<NoiseModel>,
}

impl EigenResult {
    fn exact(mut eigenvalues: Vec<f64>, shift: f64) -> Self {
        sort_ascending(&mut eigenvalues);
        Self {
            eigenvalues,
            shift,
            noise: None,
        }
    }

    pub fn finite(&self) -> impl Iterator<Item = f64> + '_ {
        self.eigenvalues.iter().copied().filter(|v| v.is_finite())
    }

    pub fn min(&self) -> Option<f64> {
        self.eigenvalues.first().copied()
    }

    pub fn max(&self) -> Option<f64> {
        self.eigenvalues.last().copied()
    }
}

fn sort_ascending(v: &mut [f64]) {
    v.sort_by(|a, b| a.total_cmp(b));
}

fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<(), EigenError> {
    if !m.is_square() {
        return Err(EigenError::Shape);
    }
    let scale = m.amax().max(1.0);
    let asym = asymmetry(m);
    if asym > 1e-10 * scale {
        return Err(EigenError::NotSymmetric(asym));
    }
    Ok(())
}

fn decompose(m: DMatrix<f64>) -> Result<SymmetricEigen<f64, Dyn>, EigenError> {
    let dim = m.nrows();
    let norm = m.norm();
    SymmetricEigen::try_new(m, EIG_EPS, EIG_MAX_ITER).ok_or(EigenError::NoConvergence { dim, norm })
}

/// Full real spectrum of a symmetric matrix, ascending.
pub fn sym_eig(m: &DMatrix<f64>) -> Result<EigenResult, EigenError> {
    check_symmetric(m)?;
    if m.nrows() == 0 {
        return Ok(EigenResult::exact(vec![], 0.0));
    }
    let eig = decompose(m.clone())?;
    Ok(EigenResult::exact(eig.eigenvalues.iter().copied().collect(), 0.0))
}

/// Eigenvalues (ascending) and the matching orthonormal eigenvectors as columns.
pub fn sym_eig_vectors(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>), EigenError> {
    check_symmetric(m)?;
    let eig = decompose(m.clone())?;
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), m.nrows(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(m: &DMatrix<f64>) -> Result<f64, EigenError> {
    Ok(sym_eig(m)?.max().unwrap_or(f64::NEG_INFINITY))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> Result<f64, EigenError> {
    Ok(sym_eig(m)?.min().unwrap_or(f64::INFINITY))
}

/// A factored `A - δI` with `-(A - δI) = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Regularized {
    pub matrix: DMatrix<f64>,
    pub shift: f64,
    pub factor: Cholesky<f64, Dyn>,
}

/// Returns `A - δI` for the first `δ` in `schedule` such that `-(A - δI)`
/// has a Cholesky factor.
pub fn regularize(a: &DMatrix<f64>, schedule: &[f64]) -> Result<Regularized, EigenError> {
    if !a.is_square() {
        return Err(EigenError::Shape);
    }
    if a.iter().all(|v| v.is_finite()) {
        for &shift in schedule {
            let mut neg = -a;
            for i in 0..neg.nrows() {
                neg[(i, i)] += shift;
            }
            if let Some(factor) = Cholesky::new(neg.clone()) {
                return Ok(Regularized {
                    matrix: -neg,
                    shift,
                    factor,
                });
            }
        }
    }
    let max_eig = if a.iter().all(|v| v.is_finite()) {
        max_eigenvalue(&((a + a.transpose()) * 0.5)).unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    Err(EigenError::NotRegularizable { max_eig })
}

/// The pencil `(A, B)` of the boundary oracle: `A ≺ 0`, `B` symmetric.
#[derive(Debug, Clone)]
pub struct GeneralizedPair {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl GeneralizedPair {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self, EigenError> {
        if !a.is_square() || a.shape() != b.shape() {
            return Err(EigenError::Shape);
        }
        Ok(Self { a, b })
    }
}

/// Solves `A v = -λ B v` through `μ (-A) v = B v`, `λ = 1/μ`.
pub fn gen_eig_pencil(pair: &GeneralizedPair) -> Result<EigenResult, EigenError> {
    gen_eig_pencil_with(&pair.a, &pair.b, &DEFAULT_SHIFT_SCHEDULE)
}

/// As [`gen_eig_pencil`] with an explicit regularization schedule.
pub fn gen_eig_pencil_with(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    schedule: &[f64],
) -> Result<EigenResult, EigenError> {
    if !a.is_square() || a.shape() != b.shape() {
        return Err(EigenError::Shape);
    }
    let reg = regularize(a, schedule)?;
    let mu = reduced_spectrum(&reg.factor, b)?;
    let lambdas = mu.into_iter().map(reciprocal).collect();
    Ok(EigenResult::exact(lambdas, reg.shift))
}

fn reciprocal(mu: f64) -> f64 {
    if mu.abs() < RECIPROCAL_CUTOFF {
        if mu.is_sign_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    } else {
        1.0 / mu
    }
}

/// Spectrum of `L⁻¹ B L⁻ᵀ` where `L` is the Cholesky factor of `-A`.
fn reduced_spectrum(factor: &Cholesky<f64, Dyn>, b: &DMatrix<f64>) -> Result<Vec<f64>, EigenError> {
    let l = factor.l_dirty();
    let dim = b.nrows();
    let left = l
        .solve_lower_triangular(b)
        .ok_or(EigenError::NoConvergence { dim, norm: b.norm() })?;
    let mut reduced = l
        .solve_lower_triangular(&left.transpose())
        .ok_or(EigenError::NoConvergence { dim, norm: b.norm() })?;
    let t = reduced.transpose();
    reduced += t;
    reduced *= 0.5;
    let eig = decompose(reduced)?;
    Ok(eig.eigenvalues.iter().copied().collect())
}

/// Applies `model` to the finite eigenvalues and re-sorts.
pub fn noisy_eig<R: Rng + ?Sized>(result: &EigenResult, model: &NoiseModel, rng: &mut R) -> EigenResult {
    if !model.is_active() {
        return result.clone();
    }
    let mut eigenvalues = result.eigenvalues.clone();
    model.apply(&mut eigenvalues, rng);
    sort_ascending(&mut eigenvalues);
    EigenResult {
        eigenvalues,
        shift: result.shift,
        noise: Some(*model),
    }
}

/// `B_d λ^d + ... + B_1 λ + B_0`, stored as `[B_0, ..., B_d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPolynomial {
    coefficients: Vec<DMatrix<f64>>,
}

impl MatrixPolynomial {
    pub fn new(coefficients: Vec<DMatrix<f64>>) -> Result<Self, EigenError> {
        if coefficients.len() < 2 {
            return Err(EigenError::BadPolynomial);
        }
        let m = coefficients[0].nrows();
        if coefficients.iter().any(|b| b.nrows() != m || b.ncols() != m) || m == 0 {
            return Err(EigenError::BadPolynomial);
        }
        Ok(Self { coefficients })
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Side length of each coefficient.
    pub fn size(&self) -> usize {
        self.coefficients[0].nrows()
    }

    pub fn coefficient(&self, k: usize) -> &DMatrix<f64> {
        &self.coefficients[k]
    }

    pub fn coefficients(&self) -> &[DMatrix<f64>] {
        &self.coefficients
    }
}

/// Block companion matrix of a matrix polynomial with invertible leading
/// coefficient.
///
/// With `Q_k = B_k B_d⁻¹` the first block row is `[-Q_{d-1}, ..., -Q_0]`
/// and the block subdiagonal is `+I`. Then
/// `det(λI - C) = det(P(λ) B_d⁻¹)`, so the spectrum of `C` is exactly the
/// set of roots of `det P(λ)`.
pub fn companion_linearize(p: &MatrixPolynomial) -> Result<DMatrix<f64>, EigenError> {
    let d = p.degree();
    let m = p.size();
    let lead = p.coefficient(d);
    let lead_inv = lead.clone().try_inverse().ok_or(EigenError::SingularLeading)?;
    if lead_inv.iter().any(|v| !v.is_finite()) {
        return Err(EigenError::SingularLeading);
    }
    let mut c = DMatrix::zeros(d * m, d * m);
    for block in 0..d {
        let q = p.coefficient(d - 1 - block) * &lead_inv;
        c.view_mut((0, block * m), (m, m)).copy_from(&(-q));
    }
    for block in 1..d {
        c.view_mut((block * m, (block - 1) * m), (m, m))
            .fill_with_identity();
    }
    Ok(c)
}

/// Eigenvalues of a polynomial eigenproblem via its companion matrix.
pub fn polynomial_eigenvalues(p: &MatrixPolynomial) -> Result<Vec<Complex64>, EigenError> {
    let c = companion_linearize(p)?;
    general_eigenvalues(&c)
}

/// Complex spectrum of a general square matrix (real Schur form).
pub fn general_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>, EigenError> {
    if !m.is_square() {
        return Err(EigenError::Shape);
    }
    let dim = m.nrows();
    let norm = m.norm();
    let schur = Schur::try_new(m.clone(), EIG_EPS, EIG_MAX_ITER)
        .ok_or(EigenError::NoConvergence { dim, norm })?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}
