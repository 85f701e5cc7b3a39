//! Hit-and-run over a cut spectrahedron.
//!
//! Directions are drawn uniformly on the sphere and pushed through a
//! Cholesky factor of the endpoint scatter matrix (the isotropizer), so the
//! walk adapts to elongated bodies. Each step asks the boundary oracle for
//! the chord and draws uniformly from its margin-shrunk interior.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::lmi::{is_negative_definite, is_strictly_feasible, CutStack, Point};
use crate::oracle::{BoundaryOracle, OracleError, Segment};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("start point is not strictly feasible")]
    StartInfeasible,
    #[error("start point violates the active cut")]
    StartCut,
    #[error("segment margin {0} must lie in [0, 0.5)")]
    InvalidMargin(f64),
    #[error("segment must be finite with positive width")]
    DegenerateSegment,
    #[error("mixing steps, resample tries and attempt limit must be positive")]
    InvalidConfig,
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Affine direction transform `v = L η / ‖L η‖` with `L Lᵀ = Y + floor·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Isotropizer {
    scatter: DMatrix<f64>,
    factor: DMatrix<f64>,
    floor: f64,
}

impl Isotropizer {
    pub fn identity(n: usize) -> Self {
        Self {
            scatter: DMatrix::identity(n, n),
            factor: DMatrix::identity(n, n),
            floor: 0.0,
        }
    }

    /// Factors `Y + floor·I` with `floor = 1e-10 · trace(Y) / n`
    /// (`1e-10` when the trace vanishes).
    pub fn from_scatter(scatter: DMatrix<f64>) -> Self {
        let n = scatter.nrows();
        let trace = scatter.trace();
        let mut floor = if trace > 0.0 && trace.is_finite() {
            1e-10 * trace / n as f64
        } else {
            1e-10
        };
        loop {
            let mut shifted = scatter.clone();
            for i in 0..n {
                shifted[(i, i)] += floor;
            }
            if let Some(ch) = Cholesky::new(shifted) {
                return Self {
                    factor: ch.unpack(),
                    scatter,
                    floor,
                };
            }
            // rounding can leave a slightly negative direction in Y
            floor *= 10.0;
            if !floor.is_finite() {
                return Self::identity(n);
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.scatter.nrows()
    }

    pub fn scatter(&self) -> &DMatrix<f64> {
        &self.scatter
    }

    /// Lower-triangular `L`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// A unit-length direction `L η / ‖L η‖`, `η` uniform on the sphere.
    pub fn direction<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let n = self.dim();
        loop {
            let eta = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = eta.norm();
            if norm == 0.0 {
                continue;
            }
            let v = &self.factor * (eta / norm);
            let len = v.norm();
            if len > 0.0 && len.is_finite() {
                return v / len;
            }
        }
    }
}

/// `random_direction` for callers that hold the isotropizer separately.
pub fn random_direction<R: Rng + ?Sized>(iso: &Isotropizer, rng: &mut R) -> DVector<f64> {
    iso.direction(rng)
}

/// Scatter of all chord endpoints about their mean, then factored.
pub fn update_isotropizer(pairs: &[(Point, Point)]) -> Isotropizer {
    Isotropizer::from_scatter(endpoint_scatter(pairs))
}

/// `(1/2N) Σ [(lo - ȳ)(lo - ȳ)ᵀ + (hi - ȳ)(hi - ȳ)ᵀ]` with `ȳ` the mean of
/// all `2N` endpoints.
pub fn endpoint_scatter(pairs: &[(Point, Point)]) -> DMatrix<f64> {
    let Some((first, _)) = pairs.first() else {
        return DMatrix::zeros(0, 0);
    };
    let n = first.len();
    let count = 2 * pairs.len();
    let mut mean = DVector::zeros(n);
    for (lo, hi) in pairs {
        mean += lo;
        mean += hi;
    }
    mean /= count as f64;
    let mut centered = DMatrix::zeros(n, count);
    for (k, (lo, hi)) in pairs.iter().enumerate() {
        centered.set_column(2 * k, &(lo - &mean));
        centered.set_column(2 * k + 1, &(hi - &mean));
    }
    let mut y = &centered * centered.transpose() / count as f64;
    let t = y.transpose();
    y += t;
    y *= 0.5;
    y
}

/// Draws `λ` uniformly from `[lo + m·w, hi - m·w]` and returns it with the point.
pub fn sample_lambda<R: Rng + ?Sized>(seg: &Segment, margin: f64, rng: &mut R) -> Result<f64, SamplerError> {
    if !(0.0..0.5).contains(&margin) {
        return Err(SamplerError::InvalidMargin(margin));
    }
    let w = seg.width();
    if !seg.is_bounded() || !(w > 0.0) {
        return Err(SamplerError::DegenerateSegment);
    }
    let lo = seg.lambda_lo + margin * w;
    let hi = seg.lambda_hi - margin * w;
    let u: f64 = rng.random();
    Ok(lo + u * (hi - lo))
}

pub fn sample_on_segment<R: Rng + ?Sized>(seg: &Segment, margin: f64, rng: &mut R) -> Result<Point, SamplerError> {
    Ok(seg.point_at(sample_lambda(seg, margin, rng)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkConfig {
    /// Accepted steps per walk.
    pub mixing: usize,
    /// Fraction of the chord excluded at each end.
    pub margin: f64,
    /// Draws on one chord before a fresh direction.
    pub resample_tries: usize,
    /// Failed attempts within one step before the walk reports a stall.
    pub max_attempts: usize,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            mixing: 10,
            margin: 0.001,
            resample_tries: 5,
            max_attempts: 200,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if !(0.0..0.5).contains(&self.margin) {
            return Err(SamplerError::InvalidMargin(self.margin));
        }
        if self.mixing == 0 || self.resample_tries == 0 || self.max_attempts == 0 {
            return Err(SamplerError::InvalidConfig);
        }
        Ok(())
    }
}

/// Output of one walk: the final point and the chord it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkSample {
    pub x: Point,
    pub x_lo: Point,
    pub x_hi: Point,
    pub steps_taken: usize,
    pub resamples: usize,
    pub stalled: bool,
}

/// Runs `cfg.mixing` hit-and-run steps from `start`.
///
/// A drawn point that fails the feasibility test is redrawn on the same
/// chord up to `resample_tries` times before a new direction is drawn. Once
/// `max_attempts` failures pile up within a single step the walk stops and
/// returns its last accepted state with `stalled = true`.
pub fn hit_and_run<R: Rng + ?Sized>(
    oracle: &mut BoundaryOracle<'_>,
    cuts: &CutStack,
    iso: &Isotropizer,
    start: &Point,
    cfg: &WalkConfig,
    rng: &mut R,
) -> Result<WalkSample, SamplerError> {
    cfg.validate()?;
    let p = oracle.problem();
    if !is_strictly_feasible(p, start) {
        return Err(SamplerError::StartInfeasible);
    }
    if !cuts.survives(start) {
        return Err(SamplerError::StartCut);
    }
    let noisy = oracle.noise().is_active();
    let dim = p.dim();
    let mut y = start.clone();
    let mut fy = p.eval(&y).map_err(OracleError::from)?;
    let mut b = DMatrix::zeros(dim, dim);
    let mut cand = DMatrix::zeros(dim, dim);
    let mut exact = DMatrix::zeros(dim, dim);
    let mut x_lo = start.clone();
    let mut x_hi = start.clone();
    let mut resamples = 0;
    let mut steps_taken = 0;

    for _ in 0..cfg.mixing {
        let mut attempts = 0;
        let mut accepted = false;
        'direction: while attempts < cfg.max_attempts {
            let v = iso.direction(rng);
            p.eval_linear_into(&v, &mut b);
            let seg = match oracle.segment_from_pencil(&fy, &b, &y, &v, Some(cuts), rng) {
                Ok(seg) if seg.is_bounded() => seg,
                Ok(_) if noisy => {
                    attempts += 1;
                    continue;
                }
                Ok(_) => return Err(OracleError::Unbounded.into()),
                Err(OracleError::ZeroWidth { .. }) => {
                    attempts += 1;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            for _ in 0..cfg.resample_tries {
                let lambda = sample_lambda(&seg, cfg.margin, rng)?;
                let x = seg.point_at(lambda);
                cand.copy_from(&fy);
                cand.zip_apply(&b, |o, bv| *o += lambda * bv);
                if cuts.survives(&x) && is_negative_definite(&cand) {
                    p.eval_into(&x, &mut exact);
                    if is_negative_definite(&exact) {
                        x_lo = seg.point_at(seg.lambda_lo);
                        x_hi = seg.point_at(seg.lambda_hi);
                        y = x;
                        std::mem::swap(&mut fy, &mut exact);
                        accepted = true;
                        break 'direction;
                    }
                }
                attempts += 1;
                resamples += 1;
                if attempts >= cfg.max_attempts {
                    break 'direction;
                }
            }
        }
        if !accepted {
            return Ok(WalkSample {
                x: y,
                x_lo,
                x_hi,
                steps_taken,
                resamples,
                stalled: true,
            });
        }
        steps_taken += 1;
    }
    Ok(WalkSample {
        x: y,
        x_lo,
        x_hi,
        steps_taken,
        resamples,
        stalled: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::LmiProblem;
    use crate::noise::NoiseModel;
    use nalgebra::dmatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn interval() -> LmiProblem {
        LmiProblem::new(
            DVector::from_vec(vec![1.0]),
            vec![dmatrix![-1.0, 0.0; 0.0, -1.0], dmatrix![1.0, 0.0; 0.0, -1.0]],
            vec![-2],
        )
        .unwrap()
    }

    #[test]
    fn identity_directions_are_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let iso = Isotropizer::identity(4);
        for _ in 0..100 {
            assert!((iso.direction(&mut rng).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_dimensional_directions_are_signs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let iso = Isotropizer::identity(1);
        let mut plus = 0;
        for _ in 0..10_000 {
            let v = iso.direction(&mut rng)[0];
            assert!(v == 1.0 || v == -1.0);
            if v > 0.0 {
                plus += 1;
            }
        }
        // 3σ of a fair coin over 10^4 flips is 150
        assert!((plus as i64 - 5000).abs() < 150);
    }

    #[test]
    fn margin_bounds_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let seg = Segment::new(DVector::zeros(1), DVector::from_vec(vec![1.0]), 0.0, 1.0).unwrap();
        for _ in 0..100_000 {
            let l = sample_lambda(&seg, 0.001, &mut rng).unwrap();
            assert!((0.001..=0.999).contains(&l));
        }
        assert_eq!(sample_lambda(&seg, 0.5, &mut rng), Err(SamplerError::InvalidMargin(0.5)));
    }

    #[test]
    fn single_pair_scatter() {
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let iso = update_isotropizer(&[(-&e1, e1.clone())]);
        assert_eq!(iso.scatter(), &dmatrix![1.0, 0.0; 0.0, 0.0]);
        let l = iso.factor();
        let recon = l * l.transpose();
        let expect = dmatrix![1.0, 0.0; 0.0, 0.0] + DMatrix::identity(2, 2) * iso.floor();
        assert!((recon - expect).norm() < 1e-10);
        assert!(iso.floor() > 0.0);
    }

    #[test]
    fn degenerate_cloud_is_floor_identity() {
        let p = DVector::from_vec(vec![0.3, -0.2, 1.0]);
        let iso = update_isotropizer(&[(p.clone(), p.clone()), (p.clone(), p)]);
        assert_eq!(iso.scatter(), &DMatrix::zeros(3, 3));
        let l = iso.factor();
        assert!((l * l.transpose() - DMatrix::identity(3, 3) * iso.floor()).norm() < 1e-20);
    }

    #[test]
    fn interval_walk_noiseless() {
        let p = interval();
        let mut oracle = BoundaryOracle::new(&p, NoiseModel::off());
        let cuts = CutStack::new(p.c().clone());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = hit_and_run(
            &mut oracle,
            &cuts,
            &Isotropizer::identity(1),
            &DVector::zeros(1),
            &WalkConfig::default(),
            &mut rng,
        )
        .unwrap();
        assert!(s.x[0] > -1.0 && s.x[0] < 1.0);
        assert_eq!(s.steps_taken, 10);
        assert_eq!(s.resamples, 0);
        assert!(!s.stalled);
        assert_eq!(oracle.calls(), 10);
    }

    #[test]
    fn infeasible_start_rejected() {
        let p = interval();
        let mut oracle = BoundaryOracle::new(&p, NoiseModel::off());
        let cuts = CutStack::new(p.c().clone());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = hit_and_run(
            &mut oracle,
            &cuts,
            &Isotropizer::identity(1),
            &DVector::from_vec(vec![1.0]),
            &WalkConfig::default(),
            &mut rng,
        );
        assert_eq!(r, Err(SamplerError::StartInfeasible));
    }

    #[test]
    fn noisy_walk_stays_feasible() {
        let p = interval();
        let mut oracle = BoundaryOracle::new(&p, NoiseModel::multiplicative(2.0).unwrap());
        let mut cuts = CutStack::new(p.c().clone());
        cuts.push(&DVector::from_vec(vec![0.5]));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let iso = Isotropizer::identity(1);
        let mut x = DVector::zeros(1);
        let mut resamples = 0;
        for _ in 0..2000 {
            let s = hit_and_run(&mut oracle, &cuts, &iso, &x, &WalkConfig::default(), &mut rng).unwrap();
            assert!(is_strictly_feasible(&p, &s.x));
            assert!(cuts.survives(&s.x));
            resamples += s.resamples;
            x = s.x;
        }
        assert!(resamples > 0, "SNR 2 dB should force some redraws");
    }
}
