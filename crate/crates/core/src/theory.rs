//! Monte-Carlo checks of the order-statistic bounds, the Grünbaum cut
//! fraction and the expected convergence rate.

use nalgebra::DVector;
use rand::Rng;
use statrs::function::beta::ln_beta;

use crate::instances::polytope_lmi;
use crate::lmi::{is_strictly_feasible, CutStack, LmiProblem, Point};
use crate::noise::NoiseModel;
use crate::oracle::BoundaryOracle;
use crate::sampler::{hit_and_run, Isotropizer, SamplerError, WalkConfig};
use crate::solver::{solve, RcpConfig, SolveError};

/// `1 - 1/e`.
pub const GRUNBAUM_BOUND: f64 = 1.0 - 1.0 / std::f64::consts::E;

/// h-normalized bounds on `E[f_[1] - f*]` for `N` uniform samples in `n`
/// dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaBounds {
    /// `1 / (nN + 1)`
    pub lower: f64,
    /// `(1/n) B(N + 1, 1/n)`
    pub upper_beta: f64,
    /// `(1 / (N + 1))^(1/n)`
    pub upper_simple: f64,
}

pub fn beta_bounds(n: usize, samples: usize) -> BetaBounds {
    let nf = n as f64;
    let nn = samples as f64;
    BetaBounds {
        lower: 1.0 / (nf * nn + 1.0),
        upper_beta: ln_beta(nn + 1.0, 1.0 / nf).exp() / nf,
        upper_simple: (1.0 / (nn + 1.0)).powf(1.0 / nf),
    }
}

/// Second-moment counterpart: `(2/n) B(N + 1, 2/n)`, bounding
/// `E[(f_[1] - f*)²] / h²`.
pub fn second_moment_bound(n: usize, samples: usize) -> f64 {
    let nf = n as f64;
    2.0 / nf * ln_beta(samples as f64 + 1.0, 2.0 / nf).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub mean_sq: f64,
    pub se_sq: f64,
    pub trials: usize,
}

impl Estimate {
    fn from_values(v: &[f64]) -> Self {
        let k = v.len() as f64;
        let (mean, se) = mean_se(v.iter().copied(), k);
        let (mean_sq, se_sq) = mean_se(v.iter().map(|x| x * x), k);
        Self {
            mean,
            se,
            mean_sq,
            se_sq,
            trials: v.len(),
        }
    }
}

fn mean_se(it: impl Iterator<Item = f64> + Clone, k: f64) -> (f64, f64) {
    let mean = it.clone().sum::<f64>() / k;
    let var = it.map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
    (mean, (var / k).sqrt())
}

/// Settings for drawing approximately uniform points by hit-and-run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformWalk {
    pub mixing: usize,
    pub margin: f64,
}

impl Default for UniformWalk {
    fn default() -> Self {
        Self {
            mixing: 30,
            margin: 1e-9,
        }
    }
}

/// Mean of `(min_{j≤N} c·x_j - f*) / h` over `trials` batches of `N`
/// hit-and-run points on `body`, with its standard error.
#[allow(clippy::too_many_arguments)]
pub fn empirical_min_experiment<R: Rng + ?Sized>(
    body: &LmiProblem,
    start: &Point,
    f_star: f64,
    h: f64,
    samples: usize,
    trials: usize,
    walk: UniformWalk,
    rng: &mut R,
) -> Result<Estimate, SamplerError> {
    let mut oracle = BoundaryOracle::new(body, NoiseModel::off());
    let cuts = CutStack::new(body.c().clone());
    let iso = Isotropizer::identity(body.n());
    let cfg = WalkConfig {
        mixing: walk.mixing,
        margin: walk.margin,
        ..WalkConfig::default()
    };
    let mut y = start.clone();
    let mut values = Vec::with_capacity(trials);
    for _ in 0..trials {
        let mut best = f64::INFINITY;
        for _ in 0..samples {
            y = hit_and_run(&mut oracle, &cuts, &iso, &y, &cfg, rng)?.x;
            best = best.min(body.objective(&y));
        }
        values.push((best - f_star) / h);
    }
    Ok(Estimate::from_values(&values))
}

/// A body with a bounding box for rejection sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxedBody {
    pub name: &'static str,
    pub problem: LmiProblem,
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
}

pub fn interval_body() -> BoxedBody {
    BoxedBody {
        name: "interval",
        problem: polytope_lmi(DVector::from_vec(vec![1.0]), &[(vec![1.0], 1.0), (vec![-1.0], 1.0)]).unwrap(),
        lo: DVector::from_vec(vec![-1.0]),
        hi: DVector::from_vec(vec![1.0]),
    }
}

pub fn diamond_body() -> BoxedBody {
    let rows: Vec<(Vec<f64>, f64)> = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
        .iter()
        .map(|&(a, b)| (vec![a, b], 1.0))
        .collect();
    BoxedBody {
        name: "diamond",
        problem: polytope_lmi(DVector::from_vec(vec![1.0, 0.0]), &rows).unwrap(),
        lo: DVector::from_vec(vec![-1.0, -1.0]),
        hi: DVector::from_vec(vec![1.0, 1.0]),
    }
}

/// Triangle with vertices `(0,0)`, `(1,0)`, `(0,1)`.
pub fn triangle_body() -> BoxedBody {
    let rows = vec![(vec![-1.0, 0.0], 0.0), (vec![0.0, -1.0], 0.0), (vec![1.0, 1.0], 1.0)];
    BoxedBody {
        name: "triangle",
        problem: polytope_lmi(DVector::from_vec(vec![1.0, 0.0]), &rows).unwrap(),
        lo: DVector::from_vec(vec![0.0, 0.0]),
        hi: DVector::from_vec(vec![1.0, 1.0]),
    }
}

/// `count` uniform points of the body together with the number of box draws
/// spent on them.
pub fn rejection_samples<R: Rng + ?Sized>(body: &BoxedBody, count: usize, rng: &mut R) -> (Vec<Point>, usize) {
    let n = body.lo.len();
    let mut out = Vec::with_capacity(count);
    let mut draws = 0;
    while out.len() < count {
        let x = DVector::from_fn(n, |i, _| body.lo[i] + rng.random::<f64>() * (body.hi[i] - body.lo[i]));
        draws += 1;
        if is_strictly_feasible(&body.problem, &x) {
            out.push(x);
        }
    }
    (out, draws)
}

/// Volume estimate from `draws` box draws of which `hits` landed inside.
pub fn rejection_volume(body: &BoxedBody, hits: usize, draws: usize) -> f64 {
    let box_vol: f64 = (&body.hi - &body.lo).iter().product();
    box_vol * hits as f64 / draws as f64
}

/// Fraction of `points` with `u·(x - cg) ≤ 0`.
pub fn side_fraction(points: &[Point], cg: &Point, u: &DVector<f64>) -> f64 {
    let k = points.iter().filter(|x| u.dot(&(*x - cg)) <= 0.0).count();
    k as f64 / points.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrunbaumReport {
    pub centroid: Point,
    /// Larger side fraction for each cut direction.
    pub fractions: Vec<f64>,
    pub worst_fraction: f64,
}

/// Cuts the body through a sample-mean centroid in `directions` random
/// directions and measures both sides on an independent sample.
pub fn grunbaum_check<R: Rng + ?Sized>(
    body: &BoxedBody,
    directions: usize,
    samples: usize,
    rng: &mut R,
) -> GrunbaumReport {
    let n = body.lo.len();
    let (cloud, _) = rejection_samples(body, samples, rng);
    let mut centroid = DVector::zeros(n);
    for x in &cloud {
        centroid += x;
    }
    centroid /= cloud.len() as f64;
    let (volume, _) = rejection_samples(body, samples, rng);
    let iso = Isotropizer::identity(n);
    let fractions: Vec<f64> = (0..directions)
        .map(|_| {
            let u = iso.direction(rng);
            let f = side_fraction(&volume, &centroid, &u);
            f.max(1.0 - f)
        })
        .collect();
    let worst_fraction = fractions.iter().copied().fold(0.0, f64::max);
    GrunbaumReport {
        centroid,
        fractions,
        worst_fraction,
    }
}

/// `(1 / (N + 1))^(k / n)`.
pub fn rate_bound(k: usize, n: usize, samples: usize) -> f64 {
    (1.0 / (samples as f64 + 1.0)).powf(k as f64 / n as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// Seed-averaged `f_k - f*`, `k = 0` being the first outer iteration.
    pub mean_gap: Vec<f64>,
    /// `mean_gap[k] / mean_gap[0]`.
    pub normalized: Vec<f64>,
    pub bound: Vec<f64>,
    pub slack: f64,
    pub holds: bool,
}

/// Solves `p` once per seed and compares the averaged gap curve against
/// `rate_bound` plus an additive `slack` (relative to the first gap).
/// Runs shorter than `k_max + 1` records are padded with their final value.
pub fn convergence_rate_experiment(
    p: &LmiProblem,
    cfg: &RcpConfig,
    seeds: &[u64],
    f_star: f64,
    k_max: usize,
    slack: f64,
) -> Result<RateReport, SolveError> {
    let curves = run_seeds(p, cfg, seeds)?;
    let mut mean_gap = vec![0.0; k_max + 1];
    for curve in &curves {
        let last = *curve.last().unwrap_or(&f64::NAN);
        for (k, g) in mean_gap.iter_mut().enumerate() {
            *g += curve.get(k).copied().unwrap_or(last) - f_star;
        }
    }
    for g in &mut mean_gap {
        *g /= curves.len() as f64;
    }
    let samples = cfg.samples_per_variable * p.n();
    let normalized: Vec<f64> = mean_gap.iter().map(|g| g / mean_gap[0]).collect();
    let bound: Vec<f64> = (0..=k_max).map(|k| rate_bound(k, p.n(), samples)).collect();
    let holds = normalized.iter().zip(&bound).all(|(e, b)| *e <= b + slack);
    Ok(RateReport {
        mean_gap,
        normalized,
        bound,
        slack,
        holds,
    })
}

fn run_seeds(p: &LmiProblem, cfg: &RcpConfig, seeds: &[u64]) -> Result<Vec<Vec<f64>>, SolveError> {
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(seeds.len().max(1));
    let chunk = seeds.len().div_ceil(workers).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|group| {
                s.spawn(move || {
                    group
                        .iter()
                        .map(|&seed| {
                            let run = solve(p, &RcpConfig { seed, ..*cfg })?;
                            Ok(run.records.iter().map(|r| r.best_objective).collect())
                        })
                        .collect::<Result<Vec<Vec<f64>>, SolveError>>()
                })
            })
            .collect();
        let mut out = Vec::with_capacity(seeds.len());
        for h in handles {
            out.extend(h.join().expect("solver thread panicked")?);
        }
        Ok(out)
    })
}
