//! Boundary oracle: where does the line `y + λv` leave the (cut) body?
//!
//! With `A = F(y) ≺ 0` and `B = F(v) - F0`, the matrix `A + λB` stays
//! negative definite exactly for `λ` between the largest negative and the
//! smallest positive generalized eigenvalue of `A v = -λ B v`. Objective cuts
//! then clip that interval with one scalar solve.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::eigen::{gen_eig_pencil_with, EigenError, DEFAULT_SHIFT_SCHEDULE};
use crate::lmi::{CutStack, LmiError, LmiProblem, Point};
use crate::noise::NoiseModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("start point is not strictly feasible: {0}")]
    Infeasible(#[from] EigenError),
    #[error(transparent)]
    Lmi(#[from] LmiError),
    #[error("unbounded direction: the line never leaves the feasible body")]
    Unbounded,
    #[error("zero direction")]
    ZeroDirection,
    #[error("degenerate segment [{lo}, {hi}]")]
    ZeroWidth { lo: f64, hi: f64 },
    #[error("start point violates the cut (value {0:e})")]
    CutViolated(f64),
}

/// The chord `{y + λv : λ_lo ≤ λ ≤ λ_hi}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    origin: Point,
    direction: DVector<f64>,
}

impl Segment {
    pub fn new(origin: Point, direction: DVector<f64>, lambda_lo: f64, lambda_hi: f64) -> Result<Self, OracleError> {
        if !(lambda_lo < lambda_hi) {
            return Err(OracleError::ZeroWidth {
                lo: lambda_lo,
                hi: lambda_hi,
            });
        }
        Ok(Self {
            lambda_lo,
            lambda_hi,
            origin,
            direction,
        })
    }

    pub fn origin(&self) -> &Point {
        &self.origin
    }

    pub fn direction(&self) -> &DVector<f64> {
        &self.direction
    }

    pub fn point_at(&self, lambda: f64) -> Point {
        &self.origin + &self.direction * lambda
    }

    pub fn x_lo(&self) -> Option<Point> {
        self.lambda_lo.is_finite().then(|| self.point_at(self.lambda_lo))
    }

    pub fn x_hi(&self) -> Option<Point> {
        self.lambda_hi.is_finite().then(|| self.point_at(self.lambda_hi))
    }

    pub fn width(&self) -> f64 {
        self.lambda_hi - self.lambda_lo
    }

    pub fn is_bounded(&self) -> bool {
        self.lambda_lo.is_finite() && self.lambda_hi.is_finite()
    }
}

/// Picks `(max{λ < 0}, min{λ > 0})` with `∓∞` when a side is empty.
pub fn bracket(eigenvalues: &[f64]) -> (f64, f64) {
    let lo = eigenvalues
        .iter()
        .copied()
        .filter(|l| *l < 0.0 && l.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = eigenvalues
        .iter()
        .copied()
        .filter(|l| *l > 0.0 && l.is_finite())
        .fold(f64::INFINITY, f64::min);
    (lo, hi)
}

/// Clips `[lo, hi]` to `c·(y + λv) ≤ t`. `y` must survive the cut.
pub fn clip_to_cut(
    c: &DVector<f64>,
    threshold: f64,
    y: &Point,
    v: &DVector<f64>,
    lo: f64,
    hi: f64,
) -> Result<(f64, f64), OracleError> {
    let slack = threshold - c.dot(y);
    if slack < 0.0 {
        return Err(OracleError::CutViolated(-slack));
    }
    let cv = c.dot(v);
    if cv == 0.0 {
        return Ok((lo, hi));
    }
    let crossing = slack / cv;
    if cv > 0.0 {
        Ok((lo, hi.min(crossing)))
    } else {
        Ok((lo.max(crossing), hi))
    }
}

/// Stateful oracle over one problem: applies the noise model and counts
/// eigensolver calls.
#[derive(Debug, Clone)]
pub struct BoundaryOracle<'a> {
    problem: &'a LmiProblem,
    noise: NoiseModel,
    calls: u64,
}

impl<'a> BoundaryOracle<'a> {
    pub fn new(problem: &'a LmiProblem, noise: NoiseModel) -> Self {
        Self {
            problem,
            noise,
            calls: 0,
        }
    }

    pub fn problem(&self) -> &'a LmiProblem {
        self.problem
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    /// Generalized eigensolves performed so far.
    pub fn calls(&self) -> u64 {
        self.calls
    }

    /// `(λ_lo, λ_hi)` for the pencil `A + λB`, noise applied before the
    /// min/max selection.
    pub fn pencil_bounds<R: Rng + ?Sized>(
        &mut self,
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        rng: &mut R,
    ) -> Result<(f64, f64), OracleError> {
        self.calls += 1;
        let mut res = gen_eig_pencil_with(a, b, &DEFAULT_SHIFT_SCHEDULE)?;
        if self.noise.is_active() {
            self.noise.apply(&mut res.eigenvalues, rng);
        }
        Ok(bracket(&res.eigenvalues))
    }

    /// Segment through `y` along `v` given precomputed `A = F(y)` and
    /// `B = F(v) - F0`, clipped by `cuts`.
    pub fn segment_from_pencil<R: Rng + ?Sized>(
        &mut self,
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        y: &Point,
        v: &DVector<f64>,
        cuts: Option<&CutStack>,
        rng: &mut R,
    ) -> Result<Segment, OracleError> {
        if v.iter().all(|x| *x == 0.0) {
            return Err(OracleError::ZeroDirection);
        }
        let (mut lo, mut hi) = self.pencil_bounds(a, b, rng)?;
        if let Some(cuts) = cuts {
            if let Some(t) = cuts.threshold() {
                (lo, hi) = clip_to_cut(cuts.direction(), t, y, v, lo, hi)?;
            }
        }
        Segment::new(y.clone(), v.clone(), lo, hi)
    }

    /// Uncut chord; endpoints may be infinite.
    pub fn lmi_segment<R: Rng + ?Sized>(
        &mut self,
        y: &Point,
        v: &DVector<f64>,
        rng: &mut R,
    ) -> Result<Segment, OracleError> {
        let pencil = self.problem.line(y, v)?;
        let seg = self.segment_from_pencil(&pencil.a, &pencil.b, y, v, None, rng)?;
        if seg.lambda_lo.is_infinite() && seg.lambda_hi.is_infinite() {
            return Err(OracleError::Unbounded);
        }
        Ok(seg)
    }

    /// Chord of the cut body; both endpoints finite or an `Unbounded` error.
    pub fn cut_segment<R: Rng + ?Sized>(
        &mut self,
        y: &Point,
        v: &DVector<f64>,
        cuts: &CutStack,
        rng: &mut R,
    ) -> Result<Segment, OracleError> {
        let pencil = self.problem.line(y, v)?;
        let seg = self.segment_from_pencil(&pencil.a, &pencil.b, y, v, Some(cuts), rng)?;
        if !seg.is_bounded() {
            return Err(OracleError::Unbounded);
        }
        Ok(seg)
    }
}

/// Noise-free chord of `{F(x) ⪯ 0}` through `y` along `v`.
pub fn bo_lmi(p: &LmiProblem, y: &Point, v: &DVector<f64>) -> Result<Segment, OracleError> {
    let mut oracle = BoundaryOracle::new(p, NoiseModel::off());
    oracle.lmi_segment(y, v, &mut unused_rng())
}

/// Noise-free chord of the cut body through `y` along `v`.
pub fn bo_cut(p: &LmiProblem, y: &Point, v: &DVector<f64>, cuts: &CutStack) -> Result<Segment, OracleError> {
    let mut oracle = BoundaryOracle::new(p, NoiseModel::off());
    oracle.cut_segment(y, v, cuts, &mut unused_rng())
}

// noise is off in the free functions, so the generator is never sampled
fn unused_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}
