//! Dataset curation and evaluation primitives for multi-label capsule-endoscopy
//! frame classification.
//!
//! Everything here is pure computation over in-memory data and builds without
//! `std` (an allocator is required). File formats, parallel aggregation and the
//! command-line pipeline live in the `capsule` crate.
//!
//! - [`taxonomy`]: the 17 labels and [`LabelSet`] bit sets.
//! - [`manifest`]: frame records and dataset statistics.
//! - [`sampler`]: cardinality-ordered under-sampling and the train/validation split.
//! - [`metrics`]: score-thresholded average precision and per-video mAP.
//! - [`vit`]: a small Vision Transformer with hand-written backward pass.
//! - [`trainer`]: Adam training loop and prediction.
//! - [`synth`]: synthetic manifests and label-keyed images.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod manifest;
pub mod metrics;
pub mod rng;
pub mod sampler;
pub mod synth;
pub mod taxonomy;
pub mod trainer;
pub mod vit;

pub use error::{Error, Result};
pub use manifest::{DatasetStats, FrameRecord, Manifest};
pub use metrics::{EvalReport, PredictionRow, PredictionSet};
pub use sampler::{SamplingConfig, SelectionPlan};
pub use taxonomy::{Category, LabelId, LabelSet, NUM_LABELS};
pub use vit::{ModelParams, Tensor, ViTConfig};
