//! Kolmogorov-Arnold network classification heads with hand-derived
//! gradients, plus the surrounding text-classification pipeline: embedding
//! construction, AdamW training with cosine annealing, weighted-F1
//! evaluation, and parameter/latency benchmarking.
//!
//! Four head families share one layer contract:
//!
//! - `mlp`: 1- or 2-layer affine baseline
//! - `fourierkan`: truncated Fourier series per edge
//! - `efficientkan`: B-spline bases applied first, then a linear map
//! - `fasterkan`: RSWAF bases with learnable centers and inverse denominator
//!
//! Everything is f64, single-threaded, and deterministic under a seed.

pub mod config;
pub mod dataset;
pub mod embeddings;
pub mod error;
pub mod evalbench;
pub mod heads;
pub mod matrix;
pub mod rng;
pub mod training;

pub mod cli;

pub use error::{Error, Result};
pub use matrix::{Activation, Matrix};
pub use rng::Rng;
