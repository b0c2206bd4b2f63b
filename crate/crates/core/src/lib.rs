//! Lagrangian simulator for the axisymmetric incompressible free-boundary
//! plasma-vacuum problem.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diagnostics;
pub mod error;
pub mod evolve;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod magnetics;
pub mod pressure;
