//! Off-grid aware sparse channel and spatial covariance estimation for
//! hybrid analog/digital mmWave MIMO links.
//!
//! The crate is organised bottom-up:
//!
//! - [`channel_model`]: ULA responses, geometric multipath channels and the
//!   reference spatial covariance.
//! - [`dictionary`]: angle grids (uniform in θ or in cos θ), the virtual
//!   channel dictionary and per-cell perturbation bounds.
//! - [`sensing`]: time-varying analog precoders/combiners, aggregated
//!   sensing matrices and noisy measurements.
//! - [`estimators`]: DSOMP/PPSOMP channel estimators and DCOMP/PPCOMP
//!   covariance estimators with bounded gradient angle refinement.
//! - [`metrics`]: NMSE-H, NMSE-C and relative efficiency.
//! - [`harness`]: scenario files, Monte Carlo runner and CSV output.

pub mod channel_model;
pub mod dictionary;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod sensing;

pub use error::{Error, Result};

/// Complex double used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
/// Dense complex matrix (column-major, so `as_slice()` is `vec(·)`).
pub type CMatrix = nalgebra::DMatrix<C64>;
