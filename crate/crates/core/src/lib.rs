//! Quality assessment for exposure-corrected video.
//!
//! A video is split into eight clips. Each clip gets a spatial vector
//! (semantic features plus prompt-matched brightness/noise probabilities)
//! and a temporal vector (motion features plus multi-level brightness
//! consistency). The two are fused with cross-attention, regressed to a
//! per-clip score, and the eight scores are combined with trainable
//! weights into one quality score.
//!
//! Pretrained backbones sit behind the traits in [`encoders`]; the bundled
//! mocks make every stage runnable without model weights.

// `!(x > y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod encoders;
pub mod eval;
pub mod error;
pub mod features;
pub mod frame;
pub mod ingest;
pub mod model;
pub mod sampling;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use frame::RgbFrame;
