//! Slow invariant manifolds of fast-slow evolution equations on the circle.
//!
//! Two constructions are provided and compared: a Lyapunov-Perron fixed point on
//! an exponentially weighted history space, and the spectral Galerkin truncation.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod spectral;
pub mod lyapunov_perron;
pub mod manifolds;
pub mod system;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;
