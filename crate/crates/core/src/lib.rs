//! Randomized cutting-plane solver for linear matrix inequalities.

// `!(a < b)` is deliberate: NaN has to fail these checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigen;
pub mod lmi;
pub mod noise;
pub mod oracle;
pub mod sampler;
pub mod solver;
pub mod dimacs;
pub mod sdpa;
pub mod instances;
pub mod report;
pub mod theory;
