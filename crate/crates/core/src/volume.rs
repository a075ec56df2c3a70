//! 4D volumes, candidate planes and trilinear reslicing.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, GrayImage, Result};

pub type Vec3 = [f64; 3];

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn normalize(a: Vec3) -> Vec3 {
    scale(a, 1.0 / norm(a))
}

/// A time series of 3D scalar grids. Voxels are stored frame-major, then z, y, x.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume4D {
    dims: [usize; 3],
    spacing: Vec3,
    n_frames: usize,
    voxels: Vec<f64>,
}

impl Volume4D {
    pub fn new(dims: [usize; 3], spacing: Vec3, n_frames: usize, voxels: Vec<f64>) -> Result<Self> {
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidVolume(format!("every dimension must be >= 2, got {dims:?}")));
        }
        if n_frames == 0 {
            return Err(Error::InvalidVolume("volume needs at least one frame".into()));
        }
        let expected = n_frames * dims[0] * dims[1] * dims[2];
        if voxels.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: voxels.len() });
        }
        if let Some(v) = voxels.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::InvalidVolume(format!("intensity {v} outside [0, 1]")));
        }
        if spacing.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::InvalidVolume(format!("spacing must be positive, got {spacing:?}")));
        }
        Ok(Self { dims, spacing, n_frames, voxels })
    }

    /// Builds a volume by evaluating `f(t, x, y, z)` on every voxel; values are clamped to [0, 1].
    pub fn from_fn(
        dims: [usize; 3],
        n_frames: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let [nx, ny, nz] = dims;
        let mut voxels = Vec::with_capacity(n_frames * nx * ny * nz);
        for t in 0..n_frames {
            for z in 0..nz {
                for y in 0..ny {
                    for x in 0..nx {
                        voxels.push(f(t, x, y, z).clamp(0.0, 1.0));
                    }
                }
            }
        }
        Self::new(dims, [1.0; 3], n_frames, voxels)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> Vec3 {
        self.spacing
    }

    pub fn with_spacing(mut self, spacing: Vec3) -> Result<Self> {
        if spacing.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::InvalidVolume(format!("spacing must be positive, got {spacing:?}")));
        }
        self.spacing = spacing;
        Ok(self)
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn voxels(&self) -> &[f64] {
        &self.voxels
    }

    pub fn frame_len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn index(&self, t: usize, x: usize, y: usize, z: usize) -> usize {
        let [nx, ny, nz] = self.dims;
        ((t * nz + z) * ny + y) * nx + x
    }

    #[inline]
    pub fn get(&self, t: usize, x: usize, y: usize, z: usize) -> f64 {
        self.voxels[self.index(t, x, y, z)]
    }

    /// Trilinear interpolation in frame `t`; grid points outside the volume contribute 0.
    pub fn interpolate(&self, t: usize, p: Vec3) -> f64 {
        let [nx, ny, nz] = self.dims;
        let (fx, fy, fz) = (p[0].floor(), p[1].floor(), p[2].floor());
        let (ax, ay, az) = (p[0] - fx, p[1] - fy, p[2] - fz);
        let (x0, y0, z0) = (fx as i64, fy as i64, fz as i64);
        if x0 < -1 || y0 < -1 || z0 < -1 || x0 >= nx as i64 || y0 >= ny as i64 || z0 >= nz as i64 {
            return 0.0;
        }
        let base = t * self.frame_len();
        let mut acc = 0.0;
        for (dz, wz) in [(0, 1.0 - az), (1, az)] {
            let z = z0 + dz;
            if wz == 0.0 || z < 0 || z >= nz as i64 {
                continue;
            }
            for (dy, wy) in [(0, 1.0 - ay), (1, ay)] {
                let y = y0 + dy;
                if wy == 0.0 || y < 0 || y >= ny as i64 {
                    continue;
                }
                let row = base + (z as usize * ny + y as usize) * nx;
                for (dx, wx) in [(0, 1.0 - ax), (1, ax)] {
                    let x = x0 + dx;
                    if wx == 0.0 || x < 0 || x >= nx as i64 {
                        continue;
                    }
                    acc += wz * wy * wx * self.voxels[row + x as usize];
                }
            }
        }
        acc
    }

    /// Center of the voxel grid in voxel coordinates.
    pub fn center(&self) -> Vec3 {
        box_center(self.dims)
    }
}

pub fn box_center(dims: [usize; 3]) -> Vec3 {
    [(dims[0] - 1) as f64 / 2.0, (dims[1] - 1) as f64 / 2.0, (dims[2] - 1) as f64 / 2.0]
}

fn inside_box(dims: [usize; 3], p: Vec3) -> bool {
    (0..3).all(|i| p[i] >= 0.0 && p[i] <= (dims[i] - 1) as f64)
}

/// A planar pixel grid embedded in voxel space.
///
/// Pixel `(r, c)` sits at `origin + c * pixel_step * axis_u + r * pixel_step * axis_v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneParams {
    pub origin: Vec3,
    pub axis_u: Vec3,
    pub axis_v: Vec3,
    pub width: usize,
    pub height: usize,
    pub pixel_step: f64,
}

impl PlaneParams {
    /// Plane of the given size centered on `center`, with the default in-plane basis for `normal`.
    pub fn centered(center: Vec3, normal: Vec3, width: usize, height: usize, pixel_step: f64) -> Self {
        let (axis_u, axis_v) = in_plane_basis(normal);
        let half_u = (width as f64 - 1.0) / 2.0 * pixel_step;
        let half_v = (height as f64 - 1.0) / 2.0 * pixel_step;
        let origin = sub(sub(center, scale(axis_u, half_u)), scale(axis_v, half_v));
        Self { origin, axis_u, axis_v, width, height, pixel_step }
    }

    pub fn validate(&self) -> Result<()> {
        let tol = 1e-9;
        if (norm(self.axis_u) - 1.0).abs() > tol || (norm(self.axis_v) - 1.0).abs() > tol {
            return Err(Error::InvalidPlane("in-plane axes must be unit length".into()));
        }
        if dot(self.axis_u, self.axis_v).abs() > tol {
            return Err(Error::InvalidPlane("in-plane axes must be orthogonal".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidPlane("plane needs a positive pixel extent".into()));
        }
        if !(self.pixel_step.is_finite() && self.pixel_step > 0.0) || self.origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPlane("origin and pixel step must be finite, step > 0".into()));
        }
        Ok(())
    }

    pub fn normal(&self) -> Vec3 {
        cross(self.axis_u, self.axis_v)
    }

    /// Voxel position of the (possibly fractional) pixel `(row, col)`.
    pub fn point(&self, row: f64, col: f64) -> Vec3 {
        add(
            self.origin,
            add(scale(self.axis_u, col * self.pixel_step), scale(self.axis_v, row * self.pixel_step)),
        )
    }

    pub fn center(&self) -> Vec3 {
        self.point((self.height as f64 - 1.0) / 2.0, (self.width as f64 - 1.0) / 2.0)
    }

    pub fn corners(&self) -> [Vec3; 4] {
        let (r, c) = ((self.height - 1) as f64, (self.width - 1) as f64);
        [self.point(0.0, 0.0), self.point(0.0, c), self.point(r, 0.0), self.point(r, c)]
    }

    /// Signed distance of the plane from `p` along the unit normal.
    pub fn offset_from(&self, p: Vec3) -> f64 {
        dot(sub(self.center(), p), self.normal())
    }

    /// Angle between the two planes' normals, folded into [0, pi/2].
    pub fn angle_to(&self, other: &PlaneParams) -> f64 {
        let c = dot(self.normal(), other.normal()).abs().min(1.0);
        c.acos()
    }
}

/// Deterministic orthonormal in-plane basis `(u, v)` with `u x v = normal`.
pub fn in_plane_basis(normal: Vec3) -> (Vec3, Vec3) {
    let n = normalize(normal);
    // reference axis: the coordinate axis least aligned with the normal
    let abs = [n[0].abs(), n[1].abs(), n[2].abs()];
    let mut k = 0;
    for i in 1..3 {
        if abs[i] < abs[k] {
            k = i;
        }
    }
    let mut reference = [0.0; 3];
    reference[k] = 1.0;
    let u = normalize(cross(reference, n));
    let v = cross(n, u);
    (u, v)
}

/// The per-frame image stack of one plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneSequence {
    pub params: PlaneParams,
    pub frames: Vec<GrayImage>,
}

impl PlaneSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.params.width
    }

    pub fn height(&self) -> usize {
        self.params.height
    }
}

/// Resamples one frame of `vol` on the plane's pixel grid.
pub fn sample_plane(vol: &Volume4D, params: &PlaneParams, frame: usize) -> Result<GrayImage> {
    if frame >= vol.n_frames() {
        return Err(Error::FrameOutOfRange { index: frame, frames: vol.n_frames() });
    }
    params.validate()?;
    Ok(GrayImage::from_fn(params.width, params.height, |c, r| {
        vol.interpolate(frame, params.point(r as f64, c as f64))
    }))
}

pub fn extract_plane_sequence(vol: &Volume4D, params: &PlaneParams) -> Result<PlaneSequence> {
    let frames = (0..vol.n_frames()).map(|t| sample_plane(vol, params, t)).collect::<Result<Vec<_>>>()?;
    Ok(PlaneSequence { params: *params, frames })
}

/// Upper bound on distinct lattice orientations.
pub const MAX_ORIENTATIONS: usize = 4096;

/// How candidate planes are laid out: orientations on a hemisphere lattice crossed
/// with evenly spaced offsets along each normal through the volume center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateConfig {
    pub count: usize,
    pub seed: u64,
    pub offsets: usize,
    pub offset_step: f64,
    pub width: usize,
    pub height: usize,
    pub pixel_step: f64,
}

impl Default for CandidateConfig {
    fn default() -> Self {
        Self { count: 400, seed: 0, offsets: 10, offset_step: 4.0, width: 128, height: 128, pixel_step: 1.0 }
    }
}

impl CandidateConfig {
    pub fn orientation_count(&self) -> usize {
        self.count.div_ceil(self.offsets.max(1))
    }

    pub fn offset_values(&self) -> Vec<f64> {
        let mid = (self.offsets as f64 - 1.0) / 2.0;
        (0..self.offsets).map(|j| (j as f64 - mid) * self.offset_step).collect()
    }
}

/// Unit normals on the upper hemisphere: equal-area z strata with golden-angle azimuths,
/// rotated about the pole by a seed-dependent phase.
pub fn hemisphere_lattice(count: usize, seed: u64) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5.0f64.sqrt());
    let phase = ChaCha8Rng::seed_from_u64(seed).random::<f64>() * 2.0 * PI;
    (0..count)
        .map(|i| {
            let z = 1.0 - (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = phase + golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Candidate planes for a volume with the given dimensions, orientation-major.
pub fn generate_candidates(dims: [usize; 3], config: &CandidateConfig) -> Result<Vec<PlaneParams>> {
    if config.count == 0 {
        return Err(Error::InvalidArgument("candidate count must be >= 1".into()));
    }
    if config.offsets == 0 || !(config.offset_step > 0.0) || config.width == 0 || config.height == 0 {
        return Err(Error::InvalidArgument("candidate grid needs offsets >= 1, step > 0 and a pixel extent".into()));
    }
    let max = MAX_ORIENTATIONS * config.offsets;
    if config.count > max {
        return Err(Error::TooManyCandidates { requested: config.count, max });
    }
    let center = box_center(dims);
    let offsets = config.offset_values();
    let normals = hemisphere_lattice(config.orientation_count(), config.seed);
    let mut planes = Vec::with_capacity(config.count);
    'outer: for n in &normals {
        for &off in &offsets {
            if planes.len() == config.count {
                break 'outer;
            }
            let c = add(center, scale(*n, off));
            if !inside_box(dims, c) {
                return Err(Error::InvalidArgument(format!(
                    "offset {off} along the normal leaves the volume; reduce offsets or offset_step"
                )));
            }
            planes.push(PlaneParams::centered(c, *n, config.width, config.height, config.pixel_step));
        }
    }
    Ok(planes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn linear_volume(dims: [usize; 3], frames: usize, a: f64, b: Vec3) -> Volume4D {
        Volume4D::from_fn(dims, frames, |_, x, y, z| a + b[0] * x as f64 + b[1] * y as f64 + b[2] * z as f64)
            .unwrap()
    }

    #[test]
    fn rejects_bad_volumes() {
        assert!(Volume4D::new([1, 4, 4], [1.0; 3], 1, alloc::vec![0.0; 16]).is_err());
        assert!(Volume4D::new([4, 4, 4], [1.0; 3], 1, alloc::vec![0.0; 63]).is_err());
        assert!(Volume4D::new([2, 2, 2], [1.0; 3], 1, alloc::vec![f64::NAN; 8]).is_err());
        assert!(Volume4D::new([2, 2, 2], [1.0; 3], 0, alloc::vec![]).is_err());
    }

    #[test]
    fn constant_volume_samples_constant() {
        let vol = Volume4D::from_fn([8, 8, 8], 2, |_, _, _, _| 0.7).unwrap();
        let plane = PlaneParams::centered(vol.center(), normalize([0.3, 0.2, 1.0]), 5, 5, 1.0);
        let img = sample_plane(&vol, &plane, 1).unwrap();
        assert!(img.data().iter().all(|v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn linear_ramp_along_u_is_exact() {
        let dims = [9, 6, 6];
        let vol = linear_volume(dims, 1, 0.0, [1.0 / 8.0, 0.0, 0.0]);
        let plane = PlaneParams {
            origin: [0.0, 2.0, 2.0],
            axis_u: [1.0, 0.0, 0.0],
            axis_v: [0.0, 1.0, 0.0],
            width: 9,
            height: 4,
            pixel_step: 1.0,
        };
        let img = sample_plane(&vol, &plane, 0).unwrap();
        for r in 0..4 {
            for c in 0..9 {
                assert!((img.get(c, r) - c as f64 / 8.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sample_at_voxel_center_returns_voxel() {
        let vol = Volume4D::from_fn([5, 5, 5], 1, |_, x, y, z| ((x * 7 + y * 3 + z) % 11) as f64 / 10.0).unwrap();
        let plane = PlaneParams {
            origin: [1.0, 2.0, 3.0],
            axis_u: [1.0, 0.0, 0.0],
            axis_v: [0.0, 0.0, 1.0],
            width: 1,
            height: 1,
            pixel_step: 1.0,
        };
        let img = sample_plane(&vol, &plane, 0).unwrap();
        assert_eq!(img.get(0, 0), vol.get(0, 1, 2, 3));
    }

    #[test]
    fn outside_samples_are_zero_and_frame_checked() {
        let vol = Volume4D::from_fn([4, 4, 4], 1, |_, _, _, _| 1.0).unwrap();
        assert_eq!(vol.interpolate(0, [-3.0, 1.0, 1.0]), 0.0);
        assert!((vol.interpolate(0, [3.5, 1.0, 1.0]) - 0.5).abs() < 1e-15);
        let plane = PlaneParams::centered(vol.center(), [0.0, 0.0, 1.0], 3, 3, 1.0);
        assert!(matches!(sample_plane(&vol, &plane, 1), Err(Error::FrameOutOfRange { .. })));
    }

    #[test]
    fn sequence_has_one_frame_per_volume_frame() {
        let vol = Volume4D::from_fn([6, 6, 6], 1, |_, x, _, _| x as f64 / 5.0).unwrap();
        let plane = PlaneParams::centered(vol.center(), [0.0, 0.0, 1.0], 4, 4, 1.0);
        assert_eq!(extract_plane_sequence(&vol, &plane).unwrap().len(), 1);
        let vol = Volume4D::from_fn([6, 6, 6], 3, |_, x, _, _| x as f64 / 5.0).unwrap();
        let seq = extract_plane_sequence(&vol, &plane).unwrap();
        assert!(seq.frames.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn candidates_are_deterministic_and_inside() {
        let dims = [64, 64, 64];
        let cfg = CandidateConfig::default();
        let a = generate_candidates(dims, &cfg).unwrap();
        let b = generate_candidates(dims, &cfg).unwrap();
        assert_eq!(a.len(), 400);
        assert_eq!(a, b);
        assert!(a.iter().all(|p| inside_box(dims, p.center()) && p.validate().is_ok()));
        // distinct orientations
        let normals = hemisphere_lattice(cfg.orientation_count(), cfg.seed);
        let mut min_angle = f64::INFINITY;
        for i in 0..normals.len() {
            for j in i + 1..normals.len() {
                min_angle = min_angle.min(dot(normals[i], normals[j]).abs().min(1.0).acos());
            }
        }
        assert!(min_angle > 0.0);
    }

    #[test]
    fn candidate_capacity_error_states_maximum() {
        let cfg = CandidateConfig { count: MAX_ORIENTATIONS * 10 + 1, ..Default::default() };
        match generate_candidates([64, 64, 64], &cfg) {
            Err(Error::TooManyCandidates { max, .. }) => assert_eq!(max, MAX_ORIENTATIONS * 10),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn trilinear_exact_on_affine_fields(
            a in 0.0f64..0.2, bx in 0.0f64..0.02, by in 0.0f64..0.02, bz in 0.0f64..0.02,
            px in 0.0f64..9.0, py in 0.0f64..9.0, pz in 0.0f64..9.0,
        ) {
            let vol = linear_volume([10, 10, 10], 1, a, [bx, by, bz]);
            let want = a + bx * px + by * py + bz * pz;
            prop_assert!((vol.interpolate(0, [px, py, pz]) - want).abs() <= 1e-12);
        }

        #[test]
        fn sampling_is_linear_in_the_volume(seed in 0u64..1000, nx in -1.0f64..1.0, ny in -1.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dims = [7, 7, 7];
            let v1: Vec<f64> = (0..343).map(|_| rng.random::<f64>() * 0.5).collect();
            let v2: Vec<f64> = (0..343).map(|_| rng.random::<f64>() * 0.5).collect();
            let sum: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| a + b).collect();
            let mk = |v: Vec<f64>| Volume4D::new(dims, [1.0; 3], 1, v).unwrap();
            let (a, b, s) = (mk(v1), mk(v2), mk(sum));
            let plane = PlaneParams::centered(a.center(), normalize([nx, ny, 1.0]), 9, 9, 0.8);
            let (ia, ib, is) = (
                sample_plane(&a, &plane, 0).unwrap(),
                sample_plane(&b, &plane, 0).unwrap(),
                sample_plane(&s, &plane, 0).unwrap(),
            );
            for i in 0..81 {
                prop_assert!((ia.data()[i] + ib.data()[i] - is.data()[i]).abs() <= 1e-12);
            }
        }

        #[test]
        fn basis_is_orthonormal(nx in -1.0f64..1.0, ny in -1.0f64..1.0, nz in 0.01f64..1.0) {
            let n = normalize([nx, ny, nz]);
            let (u, v) = in_plane_basis(n);
            prop_assert!((norm(u) - 1.0).abs() < 1e-12 && (norm(v) - 1.0).abs() < 1e-12);
            prop_assert!(dot(u, v).abs() < 1e-12);
            let w = cross(u, v);
            prop_assert!((dot(w, n) - 1.0).abs() < 1e-12);
        }
    }
}
