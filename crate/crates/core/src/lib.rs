//! Single-layer unsupervised feature learning for event-camera data.
//!
//! The crate is `no_std` (with `alloc`) and holds the numerical pipeline:
//!
//! * [`events`]: the 5-byte event record codec and a brightness-change event
//!   synthesizer.
//! * [`volumes`]: per-interval polarity accumulation and local volume
//!   extraction, sampling and normalization.
//! * [`whitening`]: ZCA whitening fitted over a population of volumes.
//! * [`inverse`]: dictionary learning (LASSO coding + K-SVD updates).
//! * [`direct`]: sparsifying transform learning (soft-threshold coding +
//!   closed-form transform updates).
//! * [`features`]: triangle encoding and quadrant pooling.
//! * [`classifier`]: one-vs-rest squared-hinge linear SVM.
//!
//! IO, configuration and the command line live in the `eventfeat` crate.
//! Enabling the `parallel` feature (which implies `std`) spreads per-column
//! coding and covariance accumulation over a rayon pool; results are
//! bit-identical to the sequential path.
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod classifier;
pub mod direct;
pub mod error;
pub mod events;
pub mod features;
pub mod inverse;
pub mod math;
pub mod omega;
pub mod rng;
pub mod trace;
pub mod volumes;
pub mod whitening;

pub use error::{Error, Result};

/// Dense matrices are nalgebra's column-major `DMatrix<f64>`.
pub type Matrix = nalgebra::DMatrix<f64>;
