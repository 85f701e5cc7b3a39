//! Linear matrix inequality bodies `F(x) = F0 + sum_i x_i F_i ⪯ 0`.
//!
//! The problem data is immutable once built. Evaluation helpers that sit on
//! the sampler's hot path write into caller-owned buffers.

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

/// A point in variable space.
pub type Point = DVector<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LmiError {
    #[error("expected {expected} coefficient matrices (F0..Fn), got {got}")]
    MatrixCount { expected: usize, got: usize },
    #[error("matrix F{index} is {rows}x{cols}, expected {dim}x{dim}")]
    MatrixShape {
        index: usize,
        rows: usize,
        cols: usize,
        dim: usize,
    },
    #[error("block sizes sum to {sum}, matrix dimension is {dim}")]
    BlockSizes { sum: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
}

/// `min c·x  s.t.  F0 + sum_i x_i F_i ⪯ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiProblem {
    c: DVector<f64>,
    f: Vec<DMatrix<f64>>,
    block_sizes: Vec<i64>,
}

impl LmiProblem {
    /// Builds a problem from the objective and the matrices `F0..Fn`.
    ///
    /// Every matrix is symmetrized as `(F + Fᵀ)/2`, so the stored data is
    /// exactly symmetric. An empty `block_sizes` means a single dense block.
    pub fn new(
        c: DVector<f64>,
        f: Vec<DMatrix<f64>>,
        block_sizes: Vec<i64>,
    ) -> Result<Self, LmiError> {
        let n = c.len();
        if f.len() != n + 1 {
            return Err(LmiError::MatrixCount {
                expected: n + 1,
                got: f.len(),
            });
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(LmiError::NonFinite("objective"));
        }
        let dim = f[0].nrows();
        let mut sym = Vec::with_capacity(f.len());
        for (index, m) in f.into_iter().enumerate() {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(LmiError::MatrixShape {
                    index,
                    rows: m.nrows(),
                    cols: m.ncols(),
                    dim,
                });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(LmiError::NonFinite("coefficient matrix"));
            }
            let t = m.transpose();
            sym.push((m + t) * 0.5);
        }
        let block_sizes = if block_sizes.is_empty() {
            vec![dim as i64]
        } else {
            block_sizes
        };
        let sum: usize = block_sizes.iter().map(|b| b.unsigned_abs() as usize).sum();
        if sum != dim {
            return Err(LmiError::BlockSizes { sum, dim });
        }
        Ok(Self {
            c,
            f: sym,
            block_sizes,
        })
    }

    /// Number of variables.
    pub fn n(&self) -> usize {
        self.c.len()
    }

    /// Side length of the matrices.
    pub fn dim(&self) -> usize {
        self.f[0].nrows()
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn f0(&self) -> &DMatrix<f64> {
        &self.f[0]
    }

    /// `F_i` for `i` in `0..=n`.
    pub fn coefficient(&self, i: usize) -> &DMatrix<f64> {
        &self.f[i]
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.f
    }

    pub fn block_sizes(&self) -> &[i64] {
        &self.block_sizes
    }

    /// Replaces the objective, keeping the body.
    pub fn with_objective(&self, c: DVector<f64>) -> Result<Self, LmiError> {
        if c.len() != self.n() {
            return Err(LmiError::Dimension {
                expected: self.n(),
                got: c.len(),
            });
        }
        Ok(Self {
            c,
            f: self.f.clone(),
            block_sizes: self.block_sizes.clone(),
        })
    }

    pub fn objective(&self, x: &Point) -> f64 {
        self.c.dot(x)
    }

    fn check_len(&self, x: &DVector<f64>) -> Result<(), LmiError> {
        if x.len() != self.n() {
            return Err(LmiError::Dimension {
                expected: self.n(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `F(x) = F0 + sum_i x_i F_i`.
    pub fn eval(&self, x: &Point) -> Result<DMatrix<f64>, LmiError> {
        self.check_len(x)?;
        let mut out = self.f[0].clone();
        self.accumulate(x, &mut out);
        Ok(out)
    }

    /// `sum_i v_i F_i`, i.e. `F(v) - F0`.
    pub fn eval_linear(&self, v: &DVector<f64>) -> Result<DMatrix<f64>, LmiError> {
        self.check_len(v)?;
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        self.accumulate(v, &mut out);
        Ok(out)
    }

    /// Writes `F(x)` into `out` without allocating. Panics on mismatched sizes.
    pub fn eval_into(&self, x: &Point, out: &mut DMatrix<f64>) {
        out.copy_from(&self.f[0]);
        self.accumulate(x, out);
    }

    /// Writes `sum_i v_i F_i` into `out` without allocating.
    pub fn eval_linear_into(&self, v: &DVector<f64>, out: &mut DMatrix<f64>) {
        out.fill(0.0);
        self.accumulate(v, out);
    }

    fn accumulate(&self, x: &DVector<f64>, out: &mut DMatrix<f64>) {
        for (xi, fi) in x.iter().zip(&self.f[1..]) {
            if *xi != 0.0 {
                out.zip_apply(fi, |o, f| *o += *xi * f);
            }
        }
    }

    /// The pencil `F(y + λv) = A + λB` along a line.
    pub fn line(&self, y: &Point, v: &DVector<f64>) -> Result<LinePencil, LmiError> {
        Ok(LinePencil {
            a: self.eval(y)?,
            b: self.eval_linear(v)?,
        })
    }
}

/// `F(y + λv)` as `A + λB` with `A = F(y)`, `B = F(v) - F0`.
#[derive(Debug, Clone)]
pub struct LinePencil {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl LinePencil {
    pub fn at(&self, lambda: f64) -> DMatrix<f64> {
        &self.a + &self.b * lambda
    }

    pub fn at_into(&self, lambda: f64, out: &mut DMatrix<f64>) {
        out.copy_from(&self.a);
        out.zip_apply(&self.b, |o, b| *o += lambda * b);
    }
}

/// True iff the symmetric matrix `m` is negative definite, tested by a
/// Cholesky factorization of `-m` with zero shift.
pub fn is_negative_definite(m: &DMatrix<f64>) -> bool {
    if m.iter().any(|v| !v.is_finite()) {
        return false;
    }
    Cholesky::new(-m).is_some()
}

/// True iff `F(x) ≺ 0`. Non-finite or wrongly sized input yields false.
pub fn is_strictly_feasible(p: &LmiProblem, x: &Point) -> bool {
    if x.len() != p.n() || x.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let mut f = p.f0().clone();
    p.accumulate(x, &mut f);
    is_negative_definite(&f)
}

/// `c·(x - z')`; a value `≤ 0` means `x` survives the cut through `z'`.
pub fn cut_value(c: &DVector<f64>, z: &Point, x: &Point) -> f64 {
    c.iter()
        .zip(x.iter().zip(z.iter()))
        .map(|(ci, (xi, zi))| ci * (xi - zi))
        .sum()
}

/// Objective cuts `c·(x - z'_k) ≤ 0`.
///
/// All cuts share the objective direction, so the stack is represented by
/// the tightest threshold `c·z'`. Thresholds only ever decrease.
#[derive(Debug, Clone, PartialEq)]
pub struct CutStack {
    c: DVector<f64>,
    threshold: Option<f64>,
    count: usize,
}

impl CutStack {
    pub fn new(c: DVector<f64>) -> Self {
        Self {
            c,
            threshold: None,
            count: 0,
        }
    }

    pub fn direction(&self) -> &DVector<f64> {
        &self.c
    }

    /// Current threshold `t` such that survivors satisfy `c·x ≤ t`.
    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Adds the cut through `z`. A looser cut leaves the threshold unchanged.
    pub fn push(&mut self, z: &Point) {
        let t = self.c.dot(z);
        self.push_threshold(t);
    }

    pub fn push_threshold(&mut self, t: f64) {
        self.threshold = Some(match self.threshold {
            Some(old) => old.min(t),
            None => t,
        });
        self.count += 1;
    }

    /// `c·x - t`, or `-∞` when no cut is active.
    pub fn value(&self, x: &Point) -> f64 {
        match self.threshold {
            Some(t) => self.c.dot(x) - t,
            None => f64::NEG_INFINITY,
        }
    }

    pub fn survives(&self, x: &Point) -> bool {
        self.value(x) <= 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn scalar(f0: f64, f1: f64) -> LmiProblem {
        LmiProblem::new(
            DVector::from_vec(vec![1.0]),
            vec![dmatrix![f0], dmatrix![f1]],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn eval_at_origin_is_f0() {
        let p = scalar(-1.0, -1.0);
        assert_eq!(p.eval(&DVector::zeros(1)).unwrap(), dmatrix![-1.0]);
        assert_eq!(p.eval(&DVector::from_vec(vec![1.0])).unwrap(), dmatrix![-2.0]);
    }

    #[test]
    fn eval_rejects_wrong_dimension() {
        let p = scalar(-1.0, -1.0);
        assert!(matches!(
            p.eval(&DVector::zeros(2)),
            Err(LmiError::Dimension { .. })
        ));
    }

    #[test]
    fn construction_symmetrizes() {
        let p = LmiProblem::new(
            DVector::from_vec(vec![1.0]),
            vec![dmatrix![-1.0, 1.0; 0.0, -1.0], dmatrix![0.0, 0.0; 0.0, 1.0]],
            vec![],
        )
        .unwrap();
        assert_eq!(p.f0(), &dmatrix![-1.0, 0.5; 0.5, -1.0]);
    }

    #[test]
    fn construction_checks_block_sizes() {
        let r = LmiProblem::new(
            DVector::from_vec(vec![1.0]),
            vec![DMatrix::zeros(3, 3), DMatrix::zeros(3, 3)],
            vec![2, -2],
        );
        assert!(matches!(r, Err(LmiError::BlockSizes { sum: 4, dim: 3 })));
        assert!(LmiProblem::new(DVector::zeros(1), vec![DMatrix::zeros(2, 2)], vec![]).is_err());
    }

    #[test]
    fn strict_feasibility_excludes_boundary() {
        let p = scalar(-1.0, 1.0);
        assert!(is_strictly_feasible(&p, &DVector::zeros(1)));
        assert!(!is_strictly_feasible(&p, &DVector::from_vec(vec![1.0])));
        assert!(!is_strictly_feasible(&p, &DVector::from_vec(vec![f64::NAN])));
    }

    #[test]
    fn cut_value_cases() {
        let c = DVector::from_vec(vec![1.0, 0.0]);
        let z = DVector::zeros(2);
        assert_eq!(cut_value(&c, &z, &z), 0.0);
        assert_eq!(cut_value(&c, &z, &DVector::from_vec(vec![2.0, 5.0])), 2.0);
    }

    #[test]
    fn cut_stack_only_tightens() {
        let mut cuts = CutStack::new(DVector::from_vec(vec![1.0]));
        assert!(cuts.survives(&DVector::from_vec(vec![1e9])));
        cuts.push(&DVector::from_vec(vec![0.5]));
        cuts.push(&DVector::from_vec(vec![0.9]));
        assert_eq!(cuts.threshold(), Some(0.5));
        assert_eq!(cuts.len(), 2);
        assert!(!cuts.survives(&DVector::from_vec(vec![0.6])));
    }

    #[test]
    fn line_pencil_matches_eval() {
        let p = LmiProblem::new(
            DVector::from_vec(vec![1.0, -1.0]),
            vec![
                dmatrix![-2.0, 0.1; 0.1, -1.0],
                dmatrix![1.0, 0.0; 0.0, -1.0],
                dmatrix![0.0, 1.0; 1.0, 0.3],
            ],
            vec![2],
        )
        .unwrap();
        let y = DVector::from_vec(vec![0.2, -0.1]);
        let v = DVector::from_vec(vec![0.6, 0.8]);
        let pencil = p.line(&y, &v).unwrap();
        let direct = p.eval(&(&y + &v * 0.37)).unwrap();
        assert!((pencil.at(0.37) - direct).norm() < 1e-14);
    }
}
