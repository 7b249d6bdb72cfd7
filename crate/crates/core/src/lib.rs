//! Frame-level video anomaly detection on high-level features.
//!
//! This crate holds the pure-computation half of the engine: scene feature
//! types, contextual feature mining (spatial / temporal / group), a small
//! denoising autoencoder trained from scratch with batch normalization and
//! Adam, reconstruction-error scoring, and ROC/AUC/EER metrics.
//!
//! Everything here is deterministic under a seed and `no_std`-compatible
//! (`alloc` required; enable the `libm` feature when building without `std`).
//! File formats, dataset loading, and the CLI live in the companion
//! `vad-pipeline` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod context;
pub mod dae;
pub mod detect;
pub mod eval;
pub mod feature;
pub mod linalg;
mod math;
pub mod scene;
mod stats;
