//! Difference-of-Gaussians keypoints with a 4x4x8 gradient-orientation descriptor.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
#[allow(unused_imports)]
use num_traits::Float;

use super::gaussian::blur_image;
use super::{finish_descriptor, Descriptor};
use crate::{Error, GrayImage, Result};

pub const STATIC_DESCRIPTOR_LEN: usize = 128;
const ORIENTATION_BINS: usize = 36;
const DESCRIPTOR_CELLS: usize = 4;
const DESCRIPTOR_BINS: usize = 8;
const DESCRIPTOR_CLAMP: f64 = 0.2;
const REFINE_STEPS: usize = 5;
const MIN_OCTAVE_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticConfig {
    pub sigma0: f64,
    pub scales_per_octave: usize,
    pub octaves: usize,
    pub contrast_threshold: f64,
    /// Maximum principal-curvature ratio accepted by the edge test.
    pub edge_ratio: f64,
    /// Blur already present in the input image.
    pub input_sigma: f64,
    pub min_size: usize,
}

impl Default for StaticConfig {
    fn default() -> Self {
        Self {
            sigma0: 1.6,
            scales_per_octave: 3,
            octaves: 3,
            contrast_threshold: 0.03,
            edge_ratio: 10.0,
            input_sigma: 0.5,
            min_size: 32,
        }
    }
}

/// A static interest point in image pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyPoint2D {
    pub x: f64,
    pub y: f64,
    /// Detection sigma in input-image pixels.
    pub scale: f64,
    /// Dominant gradient orientation in `[0, 2 pi)`.
    pub orientation: f64,
    /// Interpolated DoG value at the extremum.
    pub response: f64,
    pub octave: usize,
}

struct Octave {
    gaussians: Vec<GrayImage>,
    dogs: Vec<GrayImage>,
}

struct Pyramid {
    octaves: Vec<Octave>,
}

fn downsample(img: &GrayImage) -> GrayImage {
    let (w, h) = (img.width() / 2, img.height() / 2);
    GrayImage::from_fn(w, h, |x, y| {
        0.25 * (img.get(2 * x, 2 * y) + img.get(2 * x + 1, 2 * y) + img.get(2 * x, 2 * y + 1) + img.get(2 * x + 1, 2 * y + 1))
    })
}

fn subtract(a: &GrayImage, b: &GrayImage) -> GrayImage {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect();
    GrayImage::from_vec(a.width(), a.height(), data).expect("equal sizes")
}

fn build_pyramid(image: &GrayImage, cfg: &StaticConfig) -> Result<Pyramid> {
    if image.width() < cfg.min_size || image.height() < cfg.min_size {
        return Err(Error::ImageTooSmall { width: image.width(), height: image.height(), min: cfg.min_size });
    }
    if !image.is_finite() {
        return Err(Error::NonFinite("image"));
    }
    let s = cfg.scales_per_octave;
    let k = 2f64.powf(1.0 / s as f64);
    let initial = (cfg.sigma0 * cfg.sigma0 - cfg.input_sigma * cfg.input_sigma).max(0.0).sqrt();
    let mut base = blur_image(image, initial);
    let mut octaves = Vec::new();
    for o in 0..cfg.octaves {
        if o > 0 && (base.width() < MIN_OCTAVE_SIZE || base.height() < MIN_OCTAVE_SIZE) {
            break;
        }
        let mut gaussians = vec![base.clone()];
        for i in 1..s + 3 {
            let prev = cfg.sigma0 * k.powi(i as i32 - 1);
            let cur = prev * k;
            let step = (cur * cur - prev * prev).sqrt();
            let next = blur_image(&gaussians[i - 1], step);
            gaussians.push(next);
        }
        let dogs = gaussians.windows(2).map(|w| subtract(&w[1], &w[0])).collect();
        base = downsample(&gaussians[s]);
        octaves.push(Octave { gaussians, dogs });
    }
    Ok(Pyramid { octaves })
}

fn is_extremum(dogs: &[GrayImage], layer: usize, x: usize, y: usize) -> bool {
    let v = dogs[layer].get(x, y);
    let is_max = v > 0.0;
    for l in layer - 1..=layer + 1 {
        for yy in y - 1..=y + 1 {
            for xx in x - 1..=x + 1 {
                if l == layer && xx == x && yy == y {
                    continue;
                }
                let n = dogs[l].get(xx, yy);
                if (is_max && n >= v) || (!is_max && n <= v) {
                    return false;
                }
            }
        }
    }
    true
}

struct Refined {
    x: f64,
    y: f64,
    layer: usize,
    layer_offset: f64,
    value: f64,
}

fn refine(dogs: &[GrayImage], s: usize, mut x: usize, mut y: usize, mut layer: usize, cfg: &StaticConfig) -> Option<Refined> {
    let (w, h) = (dogs[0].width(), dogs[0].height());
    for _ in 0..REFINE_STEPS {
        let d = |l: usize, xx: usize, yy: usize| dogs[l].get(xx, yy);
        let v = d(layer, x, y);
        let g = Vector3::new(
            0.5 * (d(layer, x + 1, y) - d(layer, x - 1, y)),
            0.5 * (d(layer, x, y + 1) - d(layer, x, y - 1)),
            0.5 * (d(layer + 1, x, y) - d(layer - 1, x, y)),
        );
        let dxx = d(layer, x + 1, y) + d(layer, x - 1, y) - 2.0 * v;
        let dyy = d(layer, x, y + 1) + d(layer, x, y - 1) - 2.0 * v;
        let dss = d(layer + 1, x, y) + d(layer - 1, x, y) - 2.0 * v;
        let dxy = 0.25 * (d(layer, x + 1, y + 1) - d(layer, x - 1, y + 1) - d(layer, x + 1, y - 1) + d(layer, x - 1, y - 1));
        let dxs = 0.25 * (d(layer + 1, x + 1, y) - d(layer + 1, x - 1, y) - d(layer - 1, x + 1, y) + d(layer - 1, x - 1, y));
        let dys = 0.25 * (d(layer + 1, x, y + 1) - d(layer + 1, x, y - 1) - d(layer - 1, x, y + 1) + d(layer - 1, x, y - 1));
        let hess = Matrix3::new(dxx, dxy, dxs, dxy, dyy, dys, dxs, dys, dss);
        let delta = hess.lu().solve(&(-g))?;
        if delta.iter().all(|c| c.abs() < 0.5) {
            let value = v + 0.5 * g.dot(&delta);
            if value.abs() < cfg.contrast_threshold {
                return None;
            }
            let tr = dxx + dyy;
            let det = dxx * dyy - dxy * dxy;
            let r = cfg.edge_ratio;
            if det <= 0.0 || tr * tr * r >= (r + 1.0) * (r + 1.0) * det {
                return None;
            }
            return Some(Refined { x: x as f64 + delta[0], y: y as f64 + delta[1], layer, layer_offset: delta[2], value });
        }
        if !delta.iter().all(|c| c.is_finite()) || delta.iter().any(|c| c.abs() > 3.0) {
            return None;
        }
        let nx = x as f64 + delta[0].round();
        let ny = y as f64 + delta[1].round();
        let nl = layer as f64 + delta[2].round();
        if nx < 1.0 || ny < 1.0 || nx > (w - 2) as f64 || ny > (h - 2) as f64 || nl < 1.0 || nl > s as f64 {
            return None;
        }
        x = nx as usize;
        y = ny as usize;
        layer = nl as usize;
    }
    None
}

fn dominant_orientation(img: &GrayImage, x: f64, y: f64, sigma: f64) -> f64 {
    let weight_sigma = 1.5 * sigma;
    let radius = 3.0 * weight_sigma;
    let (w, h) = (img.width() as isize, img.height() as isize);
    let mut hist = [0.0; ORIENTATION_BINS];
    let (x0, x1) = (((x - radius).floor() as isize).max(1), ((x + radius).ceil() as isize).min(w - 2));
    let (y0, y1) = (((y - radius).floor() as isize).max(1), ((y + radius).ceil() as isize).min(h - 2));
    for py in y0..=y1 {
        for px in x0..=x1 {
            let (dx, dy) = (px as f64 - x, py as f64 - y);
            let r2 = dx * dx + dy * dy;
            if r2 > radius * radius {
                continue;
            }
            let (ux, uy) = (px as usize, py as usize);
            let gx = img.get(ux + 1, uy) - img.get(ux - 1, uy);
            let gy = img.get(ux, uy + 1) - img.get(ux, uy - 1);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let ang = super::wrap(gy.atan2(gx), 2.0 * PI);
            let bin = ((ang * ORIENTATION_BINS as f64 / (2.0 * PI)) as usize).min(ORIENTATION_BINS - 1);
            hist[bin] += mag * (-r2 / (2.0 * weight_sigma * weight_sigma)).exp();
        }
    }
    for _ in 0..2 {
        let prev = hist;
        for i in 0..ORIENTATION_BINS {
            let l = prev[(i + ORIENTATION_BINS - 1) % ORIENTATION_BINS];
            let r = prev[(i + 1) % ORIENTATION_BINS];
            hist[i] = 0.25 * l + 0.5 * prev[i] + 0.25 * r;
        }
    }
    let mut peak = 0;
    for i in 1..ORIENTATION_BINS {
        if hist[i] > hist[peak] {
            peak = i;
        }
    }
    let l = hist[(peak + ORIENTATION_BINS - 1) % ORIENTATION_BINS];
    let r = hist[(peak + 1) % ORIENTATION_BINS];
    let denom = l - 2.0 * hist[peak] + r;
    let offset = if denom.abs() > 0.0 { 0.5 * (l - r) / denom } else { 0.0 };
    super::wrap((peak as f64 + 0.5 + offset) * 2.0 * PI / ORIENTATION_BINS as f64, 2.0 * PI)
}

fn detect_in_pyramid(pyr: &Pyramid, cfg: &StaticConfig) -> Vec<KeyPoint2D> {
    let s = cfg.scales_per_octave;
    let mut out = Vec::new();
    for (o, oct) in pyr.octaves.iter().enumerate() {
        let (w, h) = (oct.dogs[0].width(), oct.dogs[0].height());
        if w < 3 || h < 3 {
            continue;
        }
        let factor = (1usize << o) as f64;
        for layer in 1..=s {
            for y in 1..h - 1 {
                for x in 1..w - 1 {
                    let v = oct.dogs[layer].get(x, y);
                    if v.abs() < 0.5 * cfg.contrast_threshold || !is_extremum(&oct.dogs, layer, x, y) {
                        continue;
                    }
                    let Some(r) = refine(&oct.dogs, s, x, y, layer, cfg) else { continue };
                    let sigma_oct = cfg.sigma0 * 2f64.powf((r.layer as f64 + r.layer_offset) / s as f64);
                    let orientation = dominant_orientation(&oct.gaussians[r.layer], r.x, r.y, sigma_oct);
                    out.push(KeyPoint2D {
                        x: (r.x + 0.5) * factor - 0.5,
                        y: (r.y + 0.5) * factor - 0.5,
                        scale: sigma_oct * factor,
                        orientation,
                        response: r.value,
                        octave: o,
                    });
                }
            }
        }
    }
    out
}

pub fn detect_static_keypoints(image: &GrayImage, cfg: &StaticConfig) -> Result<Vec<KeyPoint2D>> {
    let pyr = build_pyramid(image, cfg)?;
    Ok(detect_in_pyramid(&pyr, cfg))
}

fn describe_one(pyr: &Pyramid, kp: &KeyPoint2D, cfg: &StaticConfig) -> Result<Descriptor> {
    let s = cfg.scales_per_octave;
    let o = kp.octave.min(pyr.octaves.len() - 1);
    let oct = &pyr.octaves[o];
    let factor = (1usize << o) as f64;
    let sigma = kp.scale / factor;
    let layer = ((s as f64 * (sigma / cfg.sigma0).log2()).round().max(0.0) as usize).min(s + 2);
    let img = &oct.gaussians[layer];
    let (x, y) = ((kp.x + 0.5) / factor - 0.5, (kp.y + 0.5) / factor - 0.5);
    let cell = 4.0 * sigma;
    let radius = (cell * 2.0f64.sqrt() * (DESCRIPTOR_CELLS as f64 + 1.0) * 0.5).ceil();
    let (w, h) = (img.width() as isize, img.height() as isize);
    let (x0, x1) = (((x - radius).floor() as isize).max(1), ((x + radius).ceil() as isize).min(w - 2));
    let (y0, y1) = (((y - radius).floor() as isize).max(1), ((y + radius).ceil() as isize).min(h - 2));
    if x0 > x1 || y0 > y1 {
        return Err(Error::WindowOutside);
    }
    let (sin, cos) = kp.orientation.sin_cos();
    let half = DESCRIPTOR_CELLS as f64 / 2.0;
    let weight_sigma = half;
    let mut hist = vec![0.0; STATIC_DESCRIPTOR_LEN];
    let mut energy = 0.0;
    for py in y0..=y1 {
        for px in x0..=x1 {
            let (dx, dy) = (px as f64 - x, py as f64 - y);
            let rx = (cos * dx + sin * dy) / cell;
            let ry = (-sin * dx + cos * dy) / cell;
            let rbin = ry + half - 0.5;
            let cbin = rx + half - 0.5;
            if rbin <= -1.0 || rbin >= DESCRIPTOR_CELLS as f64 || cbin <= -1.0 || cbin >= DESCRIPTOR_CELLS as f64 {
                continue;
            }
            let (ux, uy) = (px as usize, py as usize);
            let gx = img.get(ux + 1, uy) - img.get(ux - 1, uy);
            let gy = img.get(ux, uy + 1) - img.get(ux, uy - 1);
            let mag2 = gx * gx + gy * gy;
            if mag2 == 0.0 {
                continue;
            }
            energy += mag2;
            let mag = mag2.sqrt() * (-(rx * rx + ry * ry) / (2.0 * weight_sigma * weight_sigma)).exp();
            let obin = super::wrap(gy.atan2(gx) - kp.orientation, 2.0 * PI) * DESCRIPTOR_BINS as f64 / (2.0 * PI);
            let (r0, c0, o0) = (rbin.floor(), cbin.floor(), obin.floor());
            let (fr, fc, fo) = (rbin - r0, cbin - c0, obin - o0);
            for (dr, wr) in [(0, 1.0 - fr), (1, fr)] {
                let r = r0 as isize + dr;
                if r < 0 || r >= DESCRIPTOR_CELLS as isize {
                    continue;
                }
                for (dc, wc) in [(0, 1.0 - fc), (1, fc)] {
                    let c = c0 as isize + dc;
                    if c < 0 || c >= DESCRIPTOR_CELLS as isize {
                        continue;
                    }
                    for (dob, wo) in [(0, 1.0 - fo), (1, fo)] {
                        let ob = (o0 as usize + dob) % DESCRIPTOR_BINS;
                        hist[(r as usize * DESCRIPTOR_CELLS + c as usize) * DESCRIPTOR_BINS + ob] += mag * wr * wc * wo;
                    }
                }
            }
        }
    }
    Ok(finish_descriptor(hist, energy, Some(DESCRIPTOR_CLAMP)))
}

/// 128-D descriptors for keypoints previously detected on `image`.
pub fn describe_static(image: &GrayImage, kps: &[KeyPoint2D], cfg: &StaticConfig) -> Result<Vec<Descriptor>> {
    let pyr = build_pyramid(image, cfg)?;
    kps.iter().map(|kp| describe_one(&pyr, kp, cfg)).collect()
}

/// Detection and description sharing one pyramid.
pub fn extract_static(image: &GrayImage, cfg: &StaticConfig) -> Result<(Vec<KeyPoint2D>, Vec<Descriptor>)> {
    let pyr = build_pyramid(image, cfg)?;
    let kps = detect_in_pyramid(&pyr, cfg);
    let desc = kps.iter().map(|kp| describe_one(&pyr, kp, cfg)).collect::<Result<Vec<_>>>()?;
    Ok((kps, desc))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(size: usize, cx: f64, cy: f64, sigma: f64) -> GrayImage {
        GrayImage::from_fn(size, size, |x, y| {
            let r2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            0.05 + 0.8 * (-r2 / (2.0 * sigma * sigma)).exp()
        })
    }

    #[test]
    fn constant_image_has_no_keypoints() {
        let img = GrayImage::filled(64, 64, 0.5);
        assert!(detect_static_keypoints(&img, &StaticConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn too_small_image_is_rejected() {
        let img = GrayImage::filled(20, 40, 0.5);
        assert!(matches!(detect_static_keypoints(&img, &StaticConfig::default()), Err(Error::ImageTooSmall { .. })));
    }

    #[test]
    fn single_blob_is_found_at_its_scale() {
        let img = blob(128, 64.0, 64.0, 4.0);
        let kps = detect_static_keypoints(&img, &StaticConfig::default()).unwrap();
        let hit = kps.iter().find(|k| (k.x - 64.0).hypot(k.y - 64.0) <= 2.0 && (2.8..=8.0).contains(&k.scale));
        assert!(hit.is_some(), "{kps:?}");
    }

    #[test]
    fn mirrored_blob_mirrors_keypoint() {
        let img = blob(128, 64.0, 64.0, 4.0);
        let cfg = StaticConfig::default();
        let a = detect_static_keypoints(&img, &cfg).unwrap();
        let b = detect_static_keypoints(&img.mirrored(), &cfg).unwrap();
        let ka = a.iter().find(|k| (k.x - 64.0).hypot(k.y - 64.0) <= 2.0).unwrap();
        let kb = b.iter().find(|k| (k.x - 63.0).hypot(k.y - 64.0) <= 2.0).unwrap();
        assert!((kb.x - (127.0 - ka.x)).abs() < 1e-6);
        assert!((kb.y - ka.y).abs() < 1e-6);
        assert!((kb.scale - ka.scale).abs() < 1e-3);
    }

    #[test]
    fn uniform_patch_gives_degenerate_descriptor() {
        let img = GrayImage::filled(64, 64, 0.3);
        let kp = KeyPoint2D { x: 32.0, y: 32.0, scale: 2.0, orientation: 0.0, response: 0.1, octave: 0 };
        let d = describe_static(&img, &[kp], &StaticConfig::default()).unwrap();
        assert!(d[0].degenerate && d[0].values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn patch_outside_image_is_an_error() {
        let img = blob(64, 32.0, 32.0, 3.0);
        let kp = KeyPoint2D { x: 500.0, y: 500.0, scale: 1.6, orientation: 0.0, response: 0.1, octave: 0 };
        assert_eq!(describe_static(&img, &[kp], &StaticConfig::default()), Err(Error::WindowOutside));
    }

    #[test]
    fn descriptors_have_unit_norm() {
        let img = GrayImage::from_fn(64, 64, |x, y| {
            let a = blob(64, 20.0, 24.0, 3.0).get(x, y);
            let b = if x > 40 && y > 30 { 0.5 } else { 0.0 };
            (a + b).min(1.0)
        });
        let (kps, desc) = extract_static(&img, &StaticConfig::default()).unwrap();
        assert!(!kps.is_empty());
        for d in desc.iter().filter(|d| !d.degenerate) {
            assert_eq!(d.len(), 128);
            assert!((d.norm() - 1.0).abs() < 1e-6);
        }
    }
}
