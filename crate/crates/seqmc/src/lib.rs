//! Sequential Monte Carlo building blocks.
//!
//! The crate provides:
//!
//! * weighted particle ensembles with log-domain weight arithmetic
//!   ([`ensemble`]),
//! * a seedable random source and classic density evaluators ([`rv`]),
//! * multinomial, residual, stratified, and systematic resampling
//!   ([`resample`]),
//! * bootstrap, sequential importance sampling with resampling (SISR), and
//!   auxiliary particle filters ([`filter`]),
//! * exact Kalman and discrete-state forward filters used as references
//!   ([`exact`]),
//! * bundled state-space models and a simulator ([`models`]),
//! * plain CSV input/output for observation sequences ([`io`]).
//!
//! All weights are carried as natural logarithms end to end; nothing in the
//! crate ever exponentiates an unnormalized weight without first subtracting
//! the running maximum. Every filter takes an explicit [`rv::Prng`], so two
//! runs from the same seed and the same call sequence produce bit-identical
//! results within one build.
//!
//! State and observation dimensions are compile-time constants (`const`
//! generic parameters on [`ensemble::StateVec`] and [`ensemble::ObsVec`]);
//! the particle count is fixed when a filter is constructed.

pub mod ensemble;
pub mod error;
pub mod exact;
pub mod filter;
pub mod io;
pub mod model;
pub mod models;
pub mod resample;
pub mod rv;

pub use error::{Error, Result};

/// Re-export of the linear algebra crate used in public signatures.
pub use nalgebra;

/// Floating point type used throughout the crate.
///
/// Double precision by default; enabling the `f32` feature rebuilds the whole
/// library in single precision. The choice is global so that every buffer,
/// density, and accumulator agrees.
#[cfg(not(feature = "f32"))]
pub type Scalar = f64;

/// Floating point type used throughout the crate (single precision build).
#[cfg(feature = "f32")]
pub type Scalar = f32;

/// ln(2*pi) at `Scalar` precision, used by the Gaussian density evaluators.
pub(crate) const LN_2PI: Scalar = 1.837_877_066_409_345_5_f64 as Scalar;
