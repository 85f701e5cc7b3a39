//! Eigenvalue noise models simulating an imprecise eigensolver.
//!
//! Both models are parameterized by a signal-to-noise ratio in dB. The
//! multiplicative model scales by an amplitude ratio (`10^(SNR/20)`), the
//! additive one by a power ratio (`10^(SNR/10)`) applied to the mean square.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("additive noise needs at least one finite eigenvalue")]
    Empty,
    #[error("SNR must not be NaN")]
    InvalidSnr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Off,
    Multiplicative,
    Additive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// Signal-to-noise ratio in dB. `+∞` disables the model.
    pub snr_db: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::off()
    }
}

impl NoiseModel {
    pub fn off() -> Self {
        Self {
            kind: NoiseKind::Off,
            snr_db: f64::INFINITY,
        }
    }

    pub fn multiplicative(snr_db: f64) -> Result<Self, NoiseError> {
        Self::with_kind(NoiseKind::Multiplicative, snr_db)
    }

    pub fn additive(snr_db: f64) -> Result<Self, NoiseError> {
        Self::with_kind(NoiseKind::Additive, snr_db)
    }

    fn with_kind(kind: NoiseKind, snr_db: f64) -> Result<Self, NoiseError> {
        if snr_db.is_nan() {
            return Err(NoiseError::InvalidSnr);
        }
        Ok(Self { kind, snr_db })
    }

    /// False for `Off` and for an infinite SNR.
    pub fn is_active(&self) -> bool {
        self.kind != NoiseKind::Off && self.snr_db.is_finite()
    }

    /// Perturbs the finite entries of `lams` in place. Infinite entries pass
    /// through untouched and draw no random numbers.
    pub fn apply<R: Rng + ?Sized>(&self, lams: &mut [f64], rng: &mut R) {
        if !self.is_active() {
            return;
        }
        match self.kind {
            NoiseKind::Off => {}
            NoiseKind::Multiplicative => multiplicative_in_place(lams, self.snr_db, rng),
            NoiseKind::Additive => {
                // all-infinite input: nothing to disturb
                let _ = additive_in_place(lams, self.snr_db, rng);
            }
        }
    }
}

/// Relative disturbance scale of the multiplicative model, `10^(-SNR/20)`.
pub fn multiplicative_scale(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 20.0)
}

/// Absolute disturbance scale of the additive model,
/// `sqrt(mean(λ²) / 10^(SNR/10))` over the finite entries.
pub fn additive_scale(lams: &[f64], snr_db: f64) -> Result<f64, NoiseError> {
    let (sum, count) = lams
        .iter()
        .filter(|l| l.is_finite())
        .fold((0.0, 0usize), |(s, k), l| (s + l * l, k + 1));
    if count == 0 {
        return Err(NoiseError::Empty);
    }
    Ok((sum / count as f64 / 10f64.powf(snr_db / 10.0)).sqrt())
}

/// `λ_i (1 + ε_i 10^(-SNR/20))` with independent `ε_i ~ N(0, 1)`.
pub fn apply_multiplicative<R: Rng + ?Sized>(lams: &[f64], snr_db: f64, rng: &mut R) -> Vec<f64> {
    let mut out = lams.to_vec();
    multiplicative_in_place(&mut out, snr_db, rng);
    out
}

/// `λ_i + ε_i · scale` where the scale is shared by all entries.
pub fn apply_additive<R: Rng + ?Sized>(
    lams: &[f64],
    snr_db: f64,
    rng: &mut R,
) -> Result<Vec<f64>, NoiseError> {
    let mut out = lams.to_vec();
    additive_in_place(&mut out, snr_db, rng)?;
    Ok(out)
}

/// Multiplicative model with caller-supplied standard-normal draws, consumed
/// in index order over the finite entries.
pub fn multiplicative_with_draws(lams: &mut [f64], snr_db: f64, draws: &mut impl Iterator<Item = f64>) {
    let scale = multiplicative_scale(snr_db);
    if scale == 0.0 {
        return;
    }
    for l in lams.iter_mut().filter(|l| l.is_finite()) {
        let eps = draws.next().unwrap_or(0.0);
        *l *= 1.0 + eps * scale;
    }
}

/// Additive model with caller-supplied standard-normal draws.
pub fn additive_with_draws(
    lams: &mut [f64],
    snr_db: f64,
    draws: &mut impl Iterator<Item = f64>,
) -> Result<(), NoiseError> {
    let scale = additive_scale(lams, snr_db)?;
    if snr_db == f64::INFINITY {
        return Ok(());
    }
    for l in lams.iter_mut().filter(|l| l.is_finite()) {
        let eps = draws.next().unwrap_or(0.0);
        *l += eps * scale;
    }
    Ok(())
}

fn multiplicative_in_place<R: Rng + ?Sized>(lams: &mut [f64], snr_db: f64, rng: &mut R) {
    let mut draws = std::iter::repeat_with(|| rng.sample::<f64, _>(StandardNormal));
    multiplicative_with_draws(lams, snr_db, &mut draws);
}

fn additive_in_place<R: Rng + ?Sized>(
    lams: &mut [f64],
    snr_db: f64,
    rng: &mut R,
) -> Result<(), NoiseError> {
    let mut draws = std::iter::repeat_with(|| rng.sample::<f64, _>(StandardNormal));
    additive_with_draws(lams, snr_db, &mut draws)
}
