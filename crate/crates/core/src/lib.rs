//! Algorithms for locating standard view planes in 4D (3D + time) volumes.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure function of its
//! inputs: reslicing candidate planes out of a volume, L0 gradient-minimization
//! smoothing, static and spatio-temporal interest points, bag-of-words coding, the
//! supervised two-view embedding and histogram-intersection SVMs. File formats, the
//! model bundle, the parallel pipeline and the CLI live in the `planefinder` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod classifier;
pub mod codebook;
pub mod embedding;
mod error;
pub mod features;
pub mod fft;
pub mod image;
pub mod linalg;
pub mod metrics;
pub mod phantom;
pub mod smoothing;
pub mod volume;

pub use error::{Error, Result};
pub use image::GrayImage;
pub use nalgebra::{DMatrix, DVector};
