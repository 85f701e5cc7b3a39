//! Randomized cutting-plane outer loop.
//!
//! Every outer iteration collects `N = samples_per_variable · n` chained
//! hit-and-run samples from the current body, cuts through the second-best
//! sample and restarts from the best one. Phase 1 runs the same loop on an
//! augmented problem when the origin is not strictly feasible.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigen::{max_eigenvalue, sym_eig, EigenError};
use crate::lmi::{is_strictly_feasible, CutStack, LmiError, LmiProblem, Point};
use crate::noise::NoiseModel;
use crate::oracle::BoundaryOracle;
use crate::sampler::{hit_and_run, update_isotropizer, Isotropizer, SamplerError, WalkConfig};

/// Half-width of the per-variable box that bounds the phase-1 body.
pub const PHASE1_BOX: f64 = 1e6;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("problem is infeasible (best phase-1 gamma {gamma})")]
    Infeasible { gamma: f64 },
    #[error("non-finite objective encountered")]
    NonFinite,
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Lmi(#[from] LmiError),
}

/// How `seconds` in the convergence log and the timeout are measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClockKind {
    Wall,
    /// Elapsed time is `eigensolver calls · seconds_per_call`, which makes
    /// the whole log a function of the seed.
    Virtual { seconds_per_call: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct Clock {
    kind: ClockKind,
    start: Instant,
}

impl Clock {
    pub fn start(kind: ClockKind) -> Self {
        Self {
            kind,
            start: Instant::now(),
        }
    }

    pub fn elapsed(&self, eig_calls: u64) -> f64 {
        match self.kind {
            ClockKind::Wall => self.start.elapsed().as_secs_f64(),
            ClockKind::Virtual { seconds_per_call } => eig_calls as f64 * seconds_per_call,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcpConfig {
    pub mixing: usize,
    pub samples_per_variable: usize,
    pub segment_margin: f64,
    pub resample_tries: usize,
    pub max_attempts: usize,
    pub timeout_seconds: f64,
    pub max_outer_iters: usize,
    pub improvement_tol: f64,
    pub improvement_window: usize,
    pub seed: u64,
    pub noise: NoiseModel,
    pub clock: ClockKind,
}

impl Default for RcpConfig {
    fn default() -> Self {
        Self {
            mixing: 10,
            samples_per_variable: 100,
            segment_margin: 0.001,
            resample_tries: 5,
            max_attempts: 200,
            timeout_seconds: 86400.0,
            max_outer_iters: 10_000,
            improvement_tol: 1e-4,
            improvement_window: 20,
            seed: 0,
            noise: NoiseModel::off(),
            clock: ClockKind::Wall,
        }
    }
}

impl RcpConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |m: &str| Err(SolveError::Config(m.to_string()));
        if self.mixing == 0 || self.samples_per_variable == 0 || self.resample_tries == 0 || self.max_attempts == 0 {
            return bad("counts must be positive");
        }
        if self.max_outer_iters == 0 || self.improvement_window == 0 {
            return bad("iteration limits must be positive");
        }
        if !(0.0..0.5).contains(&self.segment_margin) {
            return bad("segment margin must lie in [0, 0.5)");
        }
        if !(self.timeout_seconds > 0.0) {
            return bad("timeout must be positive");
        }
        if !(self.improvement_tol >= 0.0) {
            return bad("improvement tolerance must be non-negative");
        }
        if self.noise.kind != crate::noise::NoiseKind::Off && self.noise.snr_db.is_nan() {
            return bad("SNR must not be NaN");
        }
        if let ClockKind::Virtual { seconds_per_call } = self.clock {
            if !(seconds_per_call > 0.0 && seconds_per_call.is_finite()) {
                return bad("virtual clock needs a positive cost per call");
            }
        }
        Ok(())
    }

    pub fn walk(&self) -> WalkConfig {
        WalkConfig {
            mixing: self.mixing,
            margin: self.segment_margin,
            resample_tries: self.resample_tries,
            max_attempts: self.max_attempts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub iter: usize,
    pub seconds: f64,
    pub best_objective: f64,
    pub second_objective: f64,
    pub cov_eig_min: f64,
    pub cov_eig_mean: f64,
    pub cov_eig_max: f64,
    pub eigensolver_calls: u64,
    pub stalled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Timeout,
    MaxIters,
    Converged,
    Stalled,
    Infeasible,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Timeout => "timeout",
            Termination::MaxIters => "max_iters",
            Termination::Converged => "converged",
            Termination::Stalled => "stalled",
            Termination::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub x_best: Point,
    pub objective: f64,
    pub records: Vec<ConvergenceRecord>,
    pub termination: Termination,
    pub eigensolver_calls: u64,
    pub phase1_ran: bool,
}

/// First rule that fires, checked in the order stalled, timeout, iteration
/// cap, stagnation.
pub fn stopping_rule(records: &[ConvergenceRecord], cfg: &RcpConfig, elapsed: f64) -> Option<Termination> {
    let last = records.last()?;
    if last.stalled {
        return Some(Termination::Stalled);
    }
    if elapsed >= cfg.timeout_seconds {
        return Some(Termination::Timeout);
    }
    if records.len() >= cfg.max_outer_iters {
        return Some(Termination::MaxIters);
    }
    let w = cfg.improvement_window;
    if records.len() > w {
        let old = records[records.len() - 1 - w].best_objective;
        let now = last.best_objective;
        if old - now <= cfg.improvement_tol * now.abs().max(1.0) {
            return Some(Termination::Converged);
        }
    }
    None
}

/// Strictly feasible starting point: the origin when `F(0) ≺ 0`, otherwise
/// the `x` part of the first phase-1 sample with `γ < 0`.
pub fn phase1_initialize(p: &LmiProblem, cfg: &RcpConfig) -> Result<Point, SolveError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let clock = Clock::start(cfg.clock);
    phase1(p, cfg, &mut rng, &clock).map(|(x, _, _)| x)
}

/// Builds the phase-1 body in `(x, γ)`:
/// `blkdiag(F(x) - γI, ±x_i - R, γ - γ_max) ⪯ 0`, objective `γ`.
pub fn phase1_problem(p: &LmiProblem, gamma_max: f64) -> Result<LmiProblem, SolveError> {
    let n = p.n();
    let dim = p.dim();
    let big = dim + 2 * n + 1;
    let mut mats = Vec::with_capacity(n + 2);
    let mut f0 = DMatrix::zeros(big, big);
    f0.view_mut((0, 0), (dim, dim)).copy_from(p.f0());
    for r in 0..2 * n {
        f0[(dim + r, dim + r)] = -PHASE1_BOX;
    }
    f0[(big - 1, big - 1)] = -gamma_max;
    mats.push(f0);
    for i in 0..n {
        let mut fi = DMatrix::zeros(big, big);
        fi.view_mut((0, 0), (dim, dim)).copy_from(p.coefficient(i + 1));
        fi[(dim + 2 * i, dim + 2 * i)] = 1.0;
        fi[(dim + 2 * i + 1, dim + 2 * i + 1)] = -1.0;
        mats.push(fi);
    }
    let mut fg = DMatrix::zeros(big, big);
    for r in 0..dim {
        fg[(r, r)] = -1.0;
    }
    fg[(big - 1, big - 1)] = 1.0;
    mats.push(fg);
    let mut c = DVector::zeros(n + 1);
    c[n] = 1.0;
    let mut blocks = p.block_sizes().to_vec();
    blocks.push(-(2 * n as i64 + 1));
    Ok(LmiProblem::new(c, mats, blocks)?)
}

fn phase1(
    p: &LmiProblem,
    cfg: &RcpConfig,
    rng: &mut ChaCha8Rng,
    clock: &Clock,
) -> Result<(Point, u64, bool), SolveError> {
    let origin = DVector::zeros(p.n());
    if is_strictly_feasible(p, &origin) {
        return Ok((origin, 0, false));
    }
    let gamma0 = max_eigenvalue(p.f0())?;
    let aug = phase1_problem(p, gamma0 + 2.0)?;
    let mut start = DVector::zeros(p.n() + 1);
    start[p.n()] = gamma0 + 1.0;
    let n = p.n();
    let mut hit = None;
    let out = rcp_loop(
        &aug,
        start,
        cfg,
        rng,
        clock,
        0,
        &mut |_| {},
        &mut |z: &Point| {
            if z[n] < 0.0 {
                let x = z.rows(0, n).into_owned();
                if is_strictly_feasible(p, &x) {
                    hit = Some(x);
                    return true;
                }
            }
            false
        },
    )?;
    match hit {
        Some(x) => Ok((x, out.calls, true)),
        None => Err(SolveError::Infeasible { gamma: out.best_obj }),
    }
}

pub fn solve(p: &LmiProblem, cfg: &RcpConfig) -> Result<SolveResult, SolveError> {
    solve_with_observer(p, cfg, |_| {})
}

/// `solve`, calling `observer` on every hit-and-run sample of the main phase.
pub fn solve_with_observer<F: FnMut(&Point)>(
    p: &LmiProblem,
    cfg: &RcpConfig,
    mut observer: F,
) -> Result<SolveResult, SolveError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let clock = Clock::start(cfg.clock);
    let (x0, calls0, phase1_ran) = phase1(p, cfg, &mut rng, &clock)?;
    let out = rcp_loop(p, x0, cfg, &mut rng, &clock, calls0, &mut observer, &mut |_| false)?;
    Ok(SolveResult {
        objective: out.best_obj,
        x_best: out.best_x,
        records: out.records,
        termination: out.termination,
        eigensolver_calls: out.calls,
        phase1_ran,
    })
}

struct LoopOutcome {
    best_x: Point,
    best_obj: f64,
    records: Vec<ConvergenceRecord>,
    termination: Termination,
    calls: u64,
}

#[allow(clippy::too_many_arguments)]
fn rcp_loop(
    p: &LmiProblem,
    start: Point,
    cfg: &RcpConfig,
    rng: &mut ChaCha8Rng,
    clock: &Clock,
    calls_offset: u64,
    observer: &mut dyn FnMut(&Point),
    early_exit: &mut dyn FnMut(&Point) -> bool,
) -> Result<LoopOutcome, SolveError> {
    let n = p.n();
    let walk = cfg.walk();
    let per_iter = cfg.samples_per_variable * n;
    let mut oracle = BoundaryOracle::new(p, cfg.noise);
    let mut cuts = CutStack::new(p.c().clone());
    let mut iso = Isotropizer::identity(n);
    let mut y = start.clone();
    let mut best_x = start.clone();
    let mut best_obj = p.objective(&start);
    let mut have_sample = false;
    let mut records: Vec<ConvergenceRecord> = Vec::new();

    loop {
        let mut samples: Vec<(f64, Point)> = Vec::with_capacity(per_iter);
        let mut pairs = Vec::with_capacity(per_iter);
        let mut stalled = false;
        let mut timed_out = false;
        let mut exit = false;
        for _ in 0..per_iter {
            if clock.elapsed(calls_offset + oracle.calls()) >= cfg.timeout_seconds {
                timed_out = true;
                break;
            }
            let s = hit_and_run(&mut oracle, &cuts, &iso, &y, &walk, rng)?;
            let f = p.objective(&s.x);
            if !f.is_finite() {
                return Err(SolveError::NonFinite);
            }
            observer(&s.x);
            y = s.x.clone();
            if s.steps_taken > 0 {
                pairs.push((s.x_lo, s.x_hi));
            }
            samples.push((f, s.x));
            if early_exit(&y) {
                exit = true;
                break;
            }
            if s.stalled {
                stalled = true;
                break;
            }
        }
        let calls = calls_offset + oracle.calls();

        if samples.is_empty() {
            let termination = if timed_out { Termination::Timeout } else { Termination::Stalled };
            return Ok(LoopOutcome {
                best_x,
                best_obj,
                records,
                termination,
                calls,
            });
        }

        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (f_best, z) = samples[0].clone();
        let (f_second, z2) = samples.get(1).cloned().unwrap_or_else(|| samples[0].clone());
        if !have_sample || f_best < best_obj {
            best_obj = f_best;
            best_x = z.clone();
            have_sample = true;
        }
        cuts.push(&z2);
        y = z;
        if !pairs.is_empty() {
            iso = update_isotropizer(&pairs);
        }
        let (cov_min, cov_mean, cov_max) = spectrum_summary(iso.scatter())?;
        records.push(ConvergenceRecord {
            iter: records.len(),
            seconds: clock.elapsed(calls),
            best_objective: best_obj,
            second_objective: f_second,
            cov_eig_min: cov_min,
            cov_eig_mean: cov_mean,
            cov_eig_max: cov_max,
            eigensolver_calls: calls,
            stalled,
        });

        let termination = if exit {
            Some(Termination::Converged)
        } else if timed_out {
            Some(Termination::Timeout)
        } else {
            stopping_rule(&records, cfg, clock.elapsed(calls))
        };
        if let Some(termination) = termination {
            return Ok(LoopOutcome {
                best_x,
                best_obj,
                records,
                termination,
                calls,
            });
        }
    }
}

fn spectrum_summary(m: &DMatrix<f64>) -> Result<(f64, f64, f64), SolveError> {
    if m.nrows() == 0 {
        return Ok((0.0, 0.0, 0.0));
    }
    let eig = sym_eig(m)?;
    let vals: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let max = vals.iter().copied().fold(0.0, f64::max);
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    Ok((min, mean, max))
}
