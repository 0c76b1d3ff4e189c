//! Two-parameter rough integration on sampled paths.
//!
//! The crate lifts piecewise-linear samples to rough paths, integrates
//! controlled paths by sewing, and evaluates joint integrals of jointly
//! controlled two-parameter paths together with their maximal-inequality
//! quantities. The signature kernel is provided as a concrete jointly
//! controlled path, with an independent Goursat PDE solver for comparison.

#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod controlled;
pub mod controls;
pub mod error;
pub mod joint;
pub mod rng;
pub mod roughpath;
pub mod sewing;
pub mod sigkernel;
pub mod special;
pub mod tensor;

pub use error::{Error, Result};
