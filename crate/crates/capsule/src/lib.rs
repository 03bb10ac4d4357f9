//! File formats and the command-line pipeline around `capsule-core`:
//! manifest CSV, stats/plan/report JSON, prediction CSV, model checkpoints and
//! the training config.

pub mod checkpoint;
pub mod cli;
pub mod error;
mod json;
pub mod manifest_io;
pub mod plan_io;
pub mod predictions;
pub mod report_io;
pub mod stats_io;
pub mod train_config;

pub use error::{Error, Result};
