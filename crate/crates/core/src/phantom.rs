//! Synthetic 4D phantoms with known standard planes.
//!
//! Each class gets a flat, pulsating pattern (four blobs, three blobs of increasing size,
//! or a ring around a small dot) extruded a few voxels along the normal of one lattice
//! orientation, so every candidate plane of that orientation within the ground-truth
//! offset tolerance sees the same cross-section. Static-ish clutter spheres with a small
//! periodic drift fill the rest of the volume.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::volume::{
    add, box_center, dot, generate_candidates, hemisphere_lattice, norm, scale, sub, CandidateConfig,
    PlaneParams, Vec3, Volume4D,
};
use crate::{Error, Result};

/// Number of available pattern templates.
pub const TEMPLATE_COUNT: usize = 3;

const BACKGROUND: f64 = 0.1;
const PATTERN_LEVEL: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub n_frames: usize,
    pub class_count: usize,
    pub abnormal: bool,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Number of clutter spheres.
    pub clutter: usize,
    /// Half thickness of each extruded pattern along its plane normal, in voxels.
    pub pattern_half_thickness: f64,
    /// Candidate layout the ground-truth planes are drawn from.
    pub candidates: CandidateConfig,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            dims: [64, 64, 64],
            n_frames: 8,
            class_count: 3,
            abnormal: false,
            noise_sigma: 0.05,
            seed: 0,
            clutter: 12,
            pattern_half_thickness: 6.0,
            candidates: CandidateConfig {
                count: 60,
                seed: 0,
                offsets: 3,
                offset_step: 4.0,
                width: 64,
                height: 64,
                pixel_step: 1.0,
            },
        }
    }
}

/// Axis-aligned box in voxel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: [self.min[0].min(o.min[0]), self.min[1].min(o.min[1]), self.min[2].min(o.min[2])],
            max: [self.max[0].max(o.max[0]), self.max[1].max(o.max[1]), self.max[2].max(o.max[2])],
        }
    }
}

/// Ground truth for one class of a generated phantom.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTruth {
    pub class_id: usize,
    pub plane: PlaneParams,
    /// Index into the candidate list generated from `PhantomSpec::candidates`.
    pub candidate_index: usize,
    /// Disk centers at rest, in `(col, row)` pixel coordinates of `plane`.
    pub blob_centers: Vec<(f64, f64)>,
    /// Region containing every voxel touched by the abnormal perturbation, when present.
    pub perturbed_region: Option<Aabb>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub volume: Volume4D,
    pub truth: Vec<ClassTruth>,
}

#[derive(Debug, Clone, Copy)]
enum Primitive {
    Disk { center: (f64, f64), radius: f64 },
    Ring { center: (f64, f64), radius: f64, half_width: f64 },
}

impl Primitive {
    fn center(&self) -> (f64, f64) {
        match *self {
            Primitive::Disk { center, .. } | Primitive::Ring { center, .. } => center,
        }
    }

    /// Soft membership in [0, 1] with a one-voxel edge ramp; `pulse` scales the size.
    fn membership(&self, a: f64, b: f64, pulse: f64) -> f64 {
        match *self {
            Primitive::Disk { center, radius } => {
                let d = ((a - center.0).powi(2) + (b - center.1).powi(2)).sqrt();
                (radius * pulse + 0.5 - d).clamp(0.0, 1.0)
            }
            Primitive::Ring { center, radius, half_width } => {
                let d = ((a - center.0).powi(2) + (b - center.1).powi(2)).sqrt();
                (half_width * pulse + 0.5 - (d - radius).abs()).clamp(0.0, 1.0)
            }
        }
    }

    fn extent(&self, max_pulse: f64) -> f64 {
        match *self {
            Primitive::Disk { radius, .. } => radius * max_pulse + 0.5,
            Primitive::Ring { radius, half_width, .. } => radius + half_width * max_pulse + 0.5,
        }
    }

    fn perturbed(&self) -> Primitive {
        match *self {
            Primitive::Disk { center, radius } => {
                Primitive::Disk { center: (center.0 + 2.0, center.1 + 1.5), radius: radius * 1.6 }
            }
            Primitive::Ring { center, radius, half_width } => {
                Primitive::Ring { center: (center.0 + 2.0, center.1 + 1.5), radius, half_width: half_width * 1.6 }
            }
        }
    }
}

fn template(class: usize) -> Vec<Primitive> {
    match class {
        0 => [(-6.0, -6.0), (6.0, -6.0), (-6.0, 6.0), (6.0, 6.0)]
            .iter()
            .map(|&center| Primitive::Disk { center, radius: 3.0 })
            .collect(),
        1 => vec![
            Primitive::Disk { center: (-10.0, 0.0), radius: 2.5 },
            Primitive::Disk { center: (0.0, 0.0), radius: 3.5 },
            Primitive::Disk { center: (10.5, 0.0), radius: 4.5 },
        ],
        _ => vec![
            Primitive::Disk { center: (3.0, -2.0), radius: 2.5 },
            Primitive::Ring { center: (0.0, 0.0), radius: 9.0, half_width: 1.5 },
        ],
    }
}

const PULSE_AMPLITUDE: f64 = 0.25;

fn pulse(class: usize, t: usize, n_frames: usize) -> f64 {
    let freq = 1.0 + (class % 2) as f64;
    let phase = 2.0 * PI * class as f64 / TEMPLATE_COUNT as f64;
    1.0 + PULSE_AMPLITUDE * (2.0 * PI * freq * t as f64 / n_frames as f64 + phase).sin()
}

struct PlacedPattern {
    class: usize,
    center: Vec3,
    u: Vec3,
    v: Vec3,
    n: Vec3,
    primitives: Vec<Primitive>,
}

impl PlacedPattern {
    fn value(&self, p: Vec3, t: usize, n_frames: usize, half_thickness: f64) -> f64 {
        let rel = sub(p, self.center);
        let d = dot(rel, self.n).abs();
        let across = (half_thickness + 0.5 - d).clamp(0.0, 1.0);
        if across == 0.0 {
            return 0.0;
        }
        let (a, b) = (dot(rel, self.u), dot(rel, self.v));
        let k = pulse(self.class, t, n_frames);
        let inplane = self.primitives.iter().map(|prim| prim.membership(a, b, k)).fold(0.0, f64::max);
        across.min(inplane)
    }

    fn primitive_box(&self, prim: &Primitive, half_thickness: f64) -> Aabb {
        let r = prim.extent(1.0 + PULSE_AMPLITUDE) + 1.0;
        let (a, b) = prim.center();
        let c = add(self.center, add(scale(self.u, a), scale(self.v, b)));
        let mut min = [0.0; 3];
        let mut max = [0.0; 3];
        for i in 0..3 {
            let half = r * (self.u[i] * self.u[i] + self.v[i] * self.v[i]).sqrt() + (half_thickness + 1.0) * self.n[i].abs();
            min[i] = c[i] - half;
            max[i] = c[i] + half;
        }
        Aabb { min, max }
    }
}

struct Clutter {
    center: Vec3,
    drift: Vec3,
    phase: f64,
    radius: f64,
    level: f64,
}

/// Picks `count` lattice orientations, greedily maximizing the smallest pairwise plane angle.
fn pick_orientations(normals: &[Vec3], count: usize, start: usize) -> Vec<usize> {
    let mut chosen = vec![start];
    while chosen.len() < count {
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, n) in normals.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let score = chosen.iter().map(|&c| dot(*n, normals[c]).abs().min(1.0).acos()).fold(f64::INFINITY, f64::min);
            if score > best.0 {
                best = (score, i);
            }
        }
        chosen.push(best.1);
    }
    chosen
}

/// Generates a phantom volume and the ground-truth plane of each class.
pub fn synth_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    if spec.class_count == 0 {
        return Err(Error::InvalidArgument("class_count must be >= 1".into()));
    }
    if spec.class_count > TEMPLATE_COUNT {
        return Err(Error::TooManyClasses { requested: spec.class_count, available: TEMPLATE_COUNT });
    }
    if !(spec.noise_sigma >= 0.0) || spec.n_frames == 0 {
        return Err(Error::InvalidArgument("noise_sigma must be >= 0 and n_frames >= 1".into()));
    }
    let orientations = spec.candidates.orientation_count();
    if orientations < spec.class_count {
        return Err(Error::InvalidArgument("candidate grid has fewer orientations than classes".into()));
    }
    let candidates = generate_candidates(spec.dims, &spec.candidates)?;
    let normals = hemisphere_lattice(orientations, spec.candidates.seed);
    let center = box_center(spec.dims);
    let offsets = spec.candidates.offset_values();
    let gt_offset_index = (0..offsets.len())
        .min_by(|&a, &b| offsets[a].abs().total_cmp(&offsets[b].abs()))
        .unwrap_or(0);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let start = rng.random_range(0..orientations);
    let chosen = pick_orientations(&normals, spec.class_count, start);

    let min_dim = spec.dims.iter().copied().min().unwrap_or(2) as f64;
    let radius = 0.25 * min_dim;
    let mut patterns: Vec<PlacedPattern> = Vec::new();
    let mut truth = Vec::new();
    for (class, &orient) in chosen.iter().enumerate() {
        let candidate_index = orient * spec.candidates.offsets + gt_offset_index;
        let plane = *candidates.get(candidate_index).ok_or_else(|| {
            Error::InvalidArgument("candidate count too small to hold every ground-truth orientation".into())
        })?;
        let n = plane.normal();
        let plane_center = plane.center();
        // in-plane placement away from the other ground-truth planes and patterns
        let mut best = (f64::NEG_INFINITY, plane_center);
        for step in 0..72 {
            let theta = 2.0 * PI * step as f64 / 72.0;
            let dir = add(scale(plane.axis_u, theta.cos()), scale(plane.axis_v, theta.sin()));
            let cand = add(plane_center, scale(dir, radius));
            let mut score = f64::INFINITY;
            for &other in chosen.iter().filter(|&&o| o != orient) {
                score = score.min(dot(sub(cand, center), normals[other]).abs());
            }
            for p in &patterns {
                score = score.min(norm(sub(cand, p.center)) / 2.0);
            }
            if score > best.0 {
                best = (score, cand);
            }
        }
        let pattern_center = best.1;
        let mut primitives = template(class);
        let base_primitives = primitives.clone();
        let placed_plain = PlacedPattern {
            class,
            center: pattern_center,
            u: plane.axis_u,
            v: plane.axis_v,
            n,
            primitives: base_primitives.clone(),
        };
        let perturbed_region = if spec.abnormal {
            let before = placed_plain.primitive_box(&primitives[0], spec.pattern_half_thickness);
            primitives[0] = primitives[0].perturbed();
            let after = placed_plain.primitive_box(&primitives[0], spec.pattern_half_thickness);
            Some(before.union(&after))
        } else {
            None
        };
        let rel = sub(pattern_center, plane.origin);
        let (pc, pr) = (dot(rel, plane.axis_u) / plane.pixel_step, dot(rel, plane.axis_v) / plane.pixel_step);
        let blob_centers = base_primitives
            .iter()
            .filter(|prim| matches!(prim, Primitive::Disk { .. }))
            .map(|prim| {
                let (a, b) = prim.center();
                (pc + a / plane.pixel_step, pr + b / plane.pixel_step)
            })
            .collect();
        truth.push(ClassTruth { class_id: class, plane, candidate_index, blob_centers, perturbed_region });
        patterns.push(PlacedPattern { primitives, ..placed_plain });
    }

    let clutter: Vec<Clutter> = (0..spec.clutter)
        .map(|_| {
            let c = [
                rng.random_range(0.0..(spec.dims[0] - 1) as f64),
                rng.random_range(0.0..(spec.dims[1] - 1) as f64),
                rng.random_range(0.0..(spec.dims[2] - 1) as f64),
            ];
            let d = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            Clutter {
                center: c,
                drift: d,
                phase: rng.random_range(0.0..2.0 * PI),
                radius: rng.random_range(2.0..5.0),
                level: rng.random_range(0.3..0.6),
            }
        })
        .collect();

    let normal = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|_| Error::InvalidArgument("noise_sigma".into()))?;
    let [nx, ny, nz] = spec.dims;
    let mut voxels = Vec::with_capacity(spec.n_frames * nx * ny * nz);
    for t in 0..spec.n_frames {
        let swing = (2.0 * PI * t as f64 / spec.n_frames as f64).sin();
        let centers: Vec<Vec3> =
            clutter.iter().map(|c| add(c.center, scale(c.drift, (swing + c.phase.sin()) * 0.5))).collect();
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let p = [x as f64, y as f64, z as f64];
                    let mut v = BACKGROUND;
                    for (c, cc) in clutter.iter().zip(&centers) {
                        let m = (c.radius + 0.5 - norm(sub(p, *cc))).clamp(0.0, 1.0);
                        if m > 0.0 {
                            v = v.max(BACKGROUND + (c.level - BACKGROUND) * m);
                        }
                    }
                    for pat in &patterns {
                        let m = pat.value(p, t, spec.n_frames, spec.pattern_half_thickness);
                        if m > 0.0 {
                            v = v.max(BACKGROUND + (PATTERN_LEVEL - BACKGROUND) * m);
                        }
                    }
                    if spec.noise_sigma > 0.0 {
                        v += normal.sample(&mut rng);
                    }
                    voxels.push(v.clamp(0.0, 1.0));
                }
            }
        }
    }
    let volume = Volume4D::new(spec.dims, [1.0; 3], spec.n_frames, voxels)?;
    Ok(Phantom { volume, truth })
}

/// Candidates whose normal lies within `max_angle` radians of `truth` and whose center lies
/// within `max_offset` voxels of the ground-truth plane.
pub fn matching_candidates(candidates: &[PlaneParams], truth: &PlaneParams, max_angle: f64, max_offset: f64) -> Vec<usize> {
    candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            c.angle_to(truth) <= max_angle && dot(sub(c.center(), truth.center()), truth.normal()).abs() <= max_offset
        })
        .map(|(i, _)| i)
        .collect()
}
