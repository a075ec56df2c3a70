//! Static (difference-of-Gaussians) and spatio-temporal (Harris3D) interest points with
//! gradient-histogram descriptors.

mod gaussian;
mod spacetime;
mod static_points;

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

pub use gaussian::{blur_image, gaussian_kernel};
pub use spacetime::{
    describe_spacetime, detect_spacetime_points, harris3d_response, zero_elevation_mass, ResponseField, SpaceTimeConfig,
    SpaceTimePoint,
    SPACETIME_DESCRIPTOR_LEN,
};
pub use static_points::{
    describe_static, detect_static_keypoints, extract_static, KeyPoint2D, StaticConfig, STATIC_DESCRIPTOR_LEN,
};

/// Gradient energy below which a descriptor window counts as uniform.
pub const DEGENERATE_ENERGY: f64 = 1e-9;

/// Which detector a descriptor came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DescriptorKind {
    Static,
    Spacetime,
}

impl DescriptorKind {
    pub fn len(self) -> usize {
        match self {
            DescriptorKind::Static => STATIC_DESCRIPTOR_LEN,
            DescriptorKind::Spacetime => SPACETIME_DESCRIPTOR_LEN,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DescriptorKind::Static => "static",
            DescriptorKind::Spacetime => "spacetime",
        }
    }
}

/// Unit-L2 descriptor, or the zero vector flagged `degenerate` for uniform windows.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub values: Vec<f64>,
    pub degenerate: bool,
}

impl Descriptor {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, degenerate: false }
    }

    pub fn degenerate(len: usize) -> Self {
        Self { values: alloc::vec![0.0; len], degenerate: true }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Normalizes a raw histogram to unit length, optionally clamping entries and renormalizing.
pub(crate) fn finish_descriptor(mut hist: Vec<f64>, energy: f64, clamp: Option<f64>) -> Descriptor {
    let n = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
    if energy < DEGENERATE_ENERGY || n <= 0.0 || !n.is_finite() {
        return Descriptor::degenerate(hist.len());
    }
    hist.iter_mut().for_each(|v| *v /= n);
    if let Some(limit) = clamp {
        hist.iter_mut().for_each(|v| *v = v.min(limit));
        let n = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
        hist.iter_mut().for_each(|v| *v /= n);
    }
    Descriptor::new(hist)
}

/// Wraps an angle into `[0, period)`.
pub(crate) fn wrap(angle: f64, period: f64) -> f64 {
    let r = angle - period * (angle / period).floor();
    if r >= period { 0.0 } else { r }
}
