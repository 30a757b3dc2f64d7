//! Noisy-label training with probability-difference sample selection.
//!
//! A classifier is trained on a dataset whose labels were deliberately
//! corrupted. For every sample the selector measures `delta = p_y - max_{m != y} p_m`
//! from the softmax output, keeps a histogram of recent deltas over a sliding
//! window of mini-batches, and zero-weights samples that fall in the low tail
//! of that histogram. The tail size either ramps to a known noise rate or, when
//! the rate is unknown, is estimated once the histogram has polarized.
//!
//! Modules:
//!
//! - [`data`]: IDX/CSV loaders, synthetic blobs, splitting and mini-batching.
//! - [`noise`]: symmetry / pair label flipping and drop-set scoring.
//! - [`nn`]: dense classifier, weighted cross-entropy, SGD with momentum.
//! - [`selector`]: the delta histogram window, thresholds and noise-rate estimation.
//! - [`runner`]: configs, the training engine, metrics and reports.

pub mod data;
pub mod error;
pub mod nn;
pub mod noise;
mod rng;
pub mod runner;
pub mod selector;

pub use error::{Error, Result};
