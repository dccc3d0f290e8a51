//! Deterministic tourist walk (DTW) texture analysis.
//!
//! A tourist walk treats every image pixel as a city: from its current pixel
//! the walker moves to the admissible 8-connected neighbor with extremal
//! intensity difference (`min` or `max` rule), never revisiting the pixels
//! held in a sliding memory window of size `mu`. Each trajectory splits into
//! a transient of `tau` steps followed by an attractor cycle of period `rho`,
//! and the joint distribution of `(tau, rho)` over many starting points is a
//! texture signature.
//!
//! Starting a walk from every pixel dominates the runtime of the method.
//! This crate also implements a deterministic start-point subsampler: each
//! pixel gets the row-major code `c = W*x + y`, and a divisor set `k` keeps
//! only pixels whose code is not divisible by any of its members. The kept
//! set is homogeneous across the image and its density is controlled by `k`.
//!
//! Modules:
//! - [`image`]: grayscale rasters, dataset ingestion, codes, neighborhoods.
//! - [`sampling`]: divisor-based start-point selection and selection masks.
//! - [`walk`]: the walker itself and transient/attractor decomposition.
//! - [`features`]: trajectory-length histograms and feature vectors.
//! - [`classify`]: LDA with stratified k-fold cross-validation.
//! - [`bench`]: wall-clock measurement of the walk stage per start density.

pub mod bench;
pub mod classify;
mod error;
pub mod features;
pub mod image;
mod ratio;
pub mod sampling;
pub mod walk;

pub use error::{Error, Result};
pub use ratio::Rational;
