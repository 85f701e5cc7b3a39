//! Synthetic LMI instances and closed-form test bodies.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

use crate::lmi::{LmiError, LmiProblem, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("matrix dimension {0} must be even")]
    OddDimension(usize),
    #[error("dimension must be at least 1")]
    Empty,
    #[error("worst-case body supports 1 ≤ n ≤ 6, got {0}")]
    WorstCaseSize(usize),
    #[error(transparent)]
    Lmi(#[from] LmiError),
}

fn uniform_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| 2.0 * rng.random::<f64>() - 1.0)
}

fn uniform_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| 2.0 * rng.random::<f64>() - 1.0)
}

/// `-M Mᵀ - I` with `M` uniform on `(-1, 1)`.
pub fn gen_f0<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<DMatrix<f64>, InstanceError> {
    if dim == 0 {
        return Err(InstanceError::Empty);
    }
    Ok(f0_from(&uniform_matrix(dim, dim, rng)))
}

pub fn f0_from(m: &DMatrix<f64>) -> DMatrix<f64> {
    -(m * m.transpose()) - DMatrix::identity(m.nrows(), m.nrows())
}

/// Recipe I block: `R + Rᵀ`.
pub fn symmetric_block(r: &DMatrix<f64>) -> DMatrix<f64> {
    r + r.transpose()
}

/// Recipe II block: the upper triangle of `R` mirrored.
pub fn upper_symmetric_block(r: &DMatrix<f64>) -> DMatrix<f64> {
    let u = r.upper_triangle();
    &u + u.transpose() - DMatrix::from_diagonal(&r.diagonal())
}

/// `blkdiag(M, -M)`.
pub fn plus_minus(m: &DMatrix<f64>) -> DMatrix<f64> {
    let k = m.nrows();
    let mut out = DMatrix::zeros(2 * k, 2 * k);
    out.view_mut((0, 0), (k, k)).copy_from(m);
    out.view_mut((k, k), (k, k)).copy_from(&(-m));
    out
}

fn recipe<R: Rng + ?Sized>(
    n: usize,
    dim: usize,
    rng: &mut R,
    block: fn(&DMatrix<f64>) -> DMatrix<f64>,
) -> Result<LmiProblem, InstanceError> {
    if dim == 0 || n == 0 {
        return Err(InstanceError::Empty);
    }
    if !dim.is_multiple_of(2) {
        return Err(InstanceError::OddDimension(dim));
    }
    let mut mats = vec![gen_f0(dim, rng)?];
    for _ in 0..n {
        mats.push(plus_minus(&block(&uniform_matrix(dim / 2, dim / 2, rng))));
    }
    let c = uniform_vector(n, rng);
    Ok(LmiProblem::new(c, mats, vec![dim as i64])?)
}

/// `F_i = blkdiag(M, -M)` with `M = R + Rᵀ`, `R` uniform; objective uniform.
pub fn gen_recipe_i<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Result<LmiProblem, InstanceError> {
    recipe(n, dim, rng, symmetric_block)
}

/// As recipe I with `M` the mirrored upper triangle of `R`.
pub fn gen_recipe_ii<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Result<LmiProblem, InstanceError> {
    recipe(n, dim, rng, upper_symmetric_block)
}

/// Polytope `{x : a_r·x < b_r}` as a diagonal LMI.
pub fn polytope_lmi(c: DVector<f64>, rows: &[(Vec<f64>, f64)]) -> Result<LmiProblem, InstanceError> {
    let n = c.len();
    let k = rows.len();
    if k == 0 || n == 0 {
        return Err(InstanceError::Empty);
    }
    let mut mats = vec![DMatrix::zeros(k, k); n + 1];
    for (r, (a, b)) in rows.iter().enumerate() {
        mats[0][(r, r)] = -b;
        for (i, ai) in a.iter().enumerate() {
            mats[i + 1][(r, r)] = *ai;
        }
    }
    Ok(LmiProblem::new(c, mats, vec![-(k as i64)])?)
}

/// `{‖x‖₁ < 1, x₁ < 0}` with `c = e₁`, using all `2ⁿ` facets of the
/// cross-polytope. Returns the interior point `(-0.5, 0, …)` alongside.
pub fn gen_worst_case(n: usize) -> Result<(LmiProblem, Point), InstanceError> {
    if n == 0 || n > 6 {
        return Err(InstanceError::WorstCaseSize(n));
    }
    let mut rows = Vec::with_capacity((1 << n) + 1);
    for mask in 0..(1usize << n) {
        let a = (0..n).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
        rows.push((a, 1.0));
    }
    let mut first = vec![0.0; n];
    first[0] = 1.0;
    rows.push((first, 0.0));
    let mut c = DVector::zeros(n);
    c[0] = 1.0;
    let mut interior = DVector::zeros(n);
    interior[0] = -0.5;
    Ok((polytope_lmi(c, &rows)?, interior))
}

/// Unit ball `‖x‖ < 1` as the arrow LMI `[[-1, xᵀ], [x, -I]] ⪯ 0`,
/// objective `e₁`.
pub fn ball_lmi(n: usize) -> Result<LmiProblem, InstanceError> {
    if n == 0 {
        return Err(InstanceError::Empty);
    }
    let mut mats = vec![-DMatrix::identity(n + 1, n + 1)];
    for i in 1..=n {
        let mut f = DMatrix::zeros(n + 1, n + 1);
        f[(0, i)] = 1.0;
        f[(i, 0)] = 1.0;
        mats.push(f);
    }
    let mut c = DVector::zeros(n);
    c[0] = 1.0;
    Ok(LmiProblem::new(c, mats, vec![(n + 1) as i64])?)
}
