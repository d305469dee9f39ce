//! Simulation and convergence-rate experiments for sampled-data linear
//! systems perturbed by small Brownian and compensated-Poisson noise.

// `!(x > 0.0)` guards are written that way so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod matcore;
pub mod noisegen;

pub use error::{Error, Result};
