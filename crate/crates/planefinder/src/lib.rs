//! File formats, dataset manifests, model bundles, the parallel training and
//! evaluation pipeline, and the `planefinder` command line.
//!
//! The numerical work lives in `planefinder-core`; this crate moves data between disk
//! and those functions and times the result.

pub mod bundle;
pub mod config;
mod error;
pub mod image_io;
pub mod manifest;
pub mod matrix_io;
pub mod pipeline;
pub mod report;
pub mod synth;
pub mod volume_io;

pub use error::{Error, Result};
pub use planefinder_core as core;
