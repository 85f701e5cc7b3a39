//! DIMACS-style solution quality for a dual point of an SDPA instance.
//!
//! With slack `S = Σ x_i A_i - A_0` there is no equality residual, so the
//! two reported measures are both cone violations of `S`:
//! `err1 = ‖S - Π₊(S)‖_F / (1 + ‖c‖_∞)` and
//! `err2 = max(0, -λ_min(S)) / (1 + ‖c‖_∞)`.

use nalgebra::DMatrix;

use crate::eigen::{sym_eig, EigenError};
use crate::lmi::Point;
use crate::sdpa::SdpaInstance;

pub fn slack_matrix(inst: &SdpaInstance, x: &Point) -> DMatrix<f64> {
    let mats = inst.matrices();
    let mut s = -&mats[0];
    for (xi, a) in x.iter().zip(&mats[1..]) {
        s += a * *xi;
    }
    s
}

/// True iff the slack is positive definite.
pub fn sdpa_feasible(inst: &SdpaInstance, x: &Point) -> bool {
    nalgebra::Cholesky::new(slack_matrix(inst, x)).is_some()
}

pub fn dimacs_errors(inst: &SdpaInstance, x: &Point) -> Result<(f64, f64), EigenError> {
    let s = slack_matrix(inst, x);
    let eig = sym_eig(&s)?;
    let norm = 1.0 + inst.cost.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let neg: f64 = eig.eigenvalues.iter().filter(|l| **l < 0.0).fold(0.0, |acc, l| acc + l * l);
    let min = eig.min().unwrap_or(0.0);
    Ok((neg.sqrt() / norm, (-min).max(0.0) / norm))
}
