#![no_std]
//! Minimum-time qubit control with sampled, piecewise-constant pulses.
//!
//! Exact per-interval propagation, discrete maximum-principle extremals, a shooting
//! solver, continuous-limit references and exact-gradient GRAPE.

extern crate alloc;

pub mod analytic;
pub mod dynamics;
pub mod geometry;
pub mod grape;
pub mod linalg;
pub mod pmp;
pub mod quadrature;
pub mod shooting;

pub use geometry::{AdjointVector, BlochVector, Mat3, Vec3};
pub use num_complex::Complex64;

/// Crate version, echoed into run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
