//! Harris3D space-time interest points and a 3D gradient-orientation descriptor.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use super::gaussian::blur_stack;
use super::{finish_descriptor, Descriptor};
use crate::volume::PlaneSequence;
use crate::{Error, Result};

pub const SPACETIME_DESCRIPTOR_LEN: usize = 192;
const AZIMUTH_BINS: usize = 8;
const ELEVATION_BINS: usize = 3;
const CELL_BINS: usize = AZIMUTH_BINS * ELEVATION_BINS;

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeConfig {
    pub spatial_scales: Vec<f64>,
    pub temporal_scales: Vec<f64>,
    /// Integration scale = sqrt(factor) times the local scale.
    pub integration_factor: f64,
    pub k: f64,
    /// Responses must reach `mean + threshold_std * std` over the sequence.
    pub threshold_std: f64,
    pub min_frames: usize,
    /// Points closer than this many pixels to the frame edge are dropped.
    pub border: usize,
}

impl Default for SpaceTimeConfig {
    fn default() -> Self {
        Self {
            spatial_scales: vec![2.0, 4.0],
            temporal_scales: vec![2.0, 4.0],
            integration_factor: 2.0,
            k: 0.005,
            threshold_std: 3.0,
            min_frames: 5,
            border: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimePoint {
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub sigma_s: f64,
    pub sigma_t: f64,
    pub response: f64,
}

/// Harris3D response `det(mu) - k trace(mu)^3` over a `frames x height x width` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseField {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub sigma_s: f64,
    pub sigma_t: f64,
    pub values: Vec<f64>,
}

impl ResponseField {
    #[inline]
    pub fn get(&self, x: usize, y: usize, t: usize) -> f64 {
        self.values[(t * self.height + y) * self.width + x]
    }
}

fn stack(seq: &PlaneSequence) -> Vec<f64> {
    seq.frames.iter().flat_map(|f| f.data().iter().copied()).collect()
}

/// Central differences along x, y and t with one-sided differences at the ends.
fn gradients(l: &[f64], w: usize, h: usize, t: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let idx = |x: usize, y: usize, f: usize| (f * h + y) * w + x;
    let diff = |a: f64, b: f64, span: usize| if span == 0 { 0.0 } else { (a - b) / span as f64 };
    let n = w * h * t;
    let (mut gx, mut gy, mut gt) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for f in 0..t {
        let (fa, fb) = (f.saturating_sub(1), (f + 1).min(t - 1));
        for y in 0..h {
            let (ya, yb) = (y.saturating_sub(1), (y + 1).min(h - 1));
            for x in 0..w {
                let (xa, xb) = (x.saturating_sub(1), (x + 1).min(w - 1));
                let i = idx(x, y, f);
                gx[i] = diff(l[idx(xb, y, f)], l[idx(xa, y, f)], xb - xa);
                gy[i] = diff(l[idx(x, yb, f)], l[idx(x, ya, f)], yb - ya);
                gt[i] = diff(l[idx(x, y, fb)], l[idx(x, y, fa)], fb - fa);
            }
        }
    }
    (gx, gy, gt)
}

fn check_sequence(seq: &PlaneSequence, cfg: &SpaceTimeConfig) -> Result<()> {
    if seq.len() < cfg.min_frames {
        return Err(Error::SequenceTooShort { frames: seq.len(), min: cfg.min_frames });
    }
    if seq.frames.iter().any(|f| !f.is_finite()) {
        return Err(Error::NonFinite("sequence"));
    }
    Ok(())
}

/// Response field at one local scale pair.
pub fn harris3d_response(seq: &PlaneSequence, sigma_s: f64, sigma_t: f64, cfg: &SpaceTimeConfig) -> Result<ResponseField> {
    check_sequence(seq, cfg)?;
    let (w, h, t) = (seq.width(), seq.height(), seq.len());
    let l = blur_stack(&stack(seq), w, h, t, sigma_s, sigma_t);
    let (mut gx, mut gy, mut gt) = gradients(&l, w, h, t);
    gx.iter_mut().chain(gy.iter_mut()).for_each(|v| *v *= sigma_s);
    gt.iter_mut().for_each(|v| *v *= sigma_t);
    let is = cfg.integration_factor.sqrt();
    let smooth = |a: &[f64], b: &[f64]| {
        let prod: Vec<f64> = a.iter().zip(b).map(|(p, q)| p * q).collect();
        blur_stack(&prod, w, h, t, is * sigma_s, is * sigma_t)
    };
    let (xx, yy, tt) = (smooth(&gx, &gx), smooth(&gy, &gy), smooth(&gt, &gt));
    let (xy, xt, yt) = (smooth(&gx, &gy), smooth(&gx, &gt), smooth(&gy, &gt));
    let values = (0..w * h * t)
        .map(|i| {
            let (a, b, c, d, e, f) = (xx[i], xy[i], xt[i], yy[i], yt[i], tt[i]);
            let det = a * (d * f - e * e) - b * (b * f - e * c) + c * (b * e - d * c);
            let tr = a + d + f;
            det - cfg.k * tr * tr * tr
        })
        .collect();
    Ok(ResponseField { width: w, height: h, frames: t, sigma_s, sigma_t, values })
}

fn is_local_max(field: &ResponseField, x: usize, y: usize, t: usize) -> bool {
    let v = field.get(x, y, t);
    for f in t.saturating_sub(1)..=(t + 1).min(field.frames - 1) {
        for yy in y - 1..=y + 1 {
            for xx in x - 1..=x + 1 {
                if (xx, yy, f) != (x, y, t) && field.get(xx, yy, f) >= v {
                    return false;
                }
            }
        }
    }
    true
}

/// Local maxima of the Harris3D response over `(x, y, t)` at every configured scale pair.
pub fn detect_spacetime_points(seq: &PlaneSequence, cfg: &SpaceTimeConfig) -> Result<Vec<SpaceTimePoint>> {
    check_sequence(seq, cfg)?;
    let mut fields = Vec::new();
    for &ss in &cfg.spatial_scales {
        for &st in &cfg.temporal_scales {
            fields.push(harris3d_response(seq, ss, st, cfg)?);
        }
    }
    let count = fields.iter().map(|f| f.values.len()).sum::<usize>() as f64;
    let mean = fields.iter().flat_map(|f| f.values.iter()).sum::<f64>() / count;
    let var = fields.iter().flat_map(|f| f.values.iter()).map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
    let threshold = mean + cfg.threshold_std * var.sqrt();
    let b = cfg.border.max(1);
    let mut points = Vec::new();
    for field in &fields {
        if field.width <= 2 * b || field.height <= 2 * b {
            continue;
        }
        for t in 0..field.frames {
            for y in b..field.height - b {
                for x in b..field.width - b {
                    let v = field.get(x, y, t);
                    if v > 0.0 && v >= threshold && is_local_max(field, x, y, t) {
                        points.push(SpaceTimePoint {
                            x: x as f64,
                            y: y as f64,
                            t: t as f64,
                            sigma_s: field.sigma_s,
                            sigma_t: field.sigma_t,
                            response: v,
                        });
                    }
                }
            }
        }
    }
    Ok(points)
}

fn axis_range(center: f64, half: f64, len: usize) -> Option<(usize, usize)> {
    let lo = (center - half).ceil().max(0.0);
    let hi = (center + half).floor().min(len as f64 - 1.0);
    (lo <= hi).then_some((lo as usize, hi as usize))
}

/// 192-D descriptors: a 2x2x2 grid of 24-bin (8 azimuth x 3 elevation) histograms of
/// 3D gradient orientations over a `6 sigma_s x 6 sigma_s x 6 sigma_t` window.
pub fn describe_spacetime(seq: &PlaneSequence, pts: &[SpaceTimePoint], cfg: &SpaceTimeConfig) -> Result<Vec<Descriptor>> {
    if seq.is_empty() {
        return Err(Error::SequenceTooShort { frames: 0, min: 1 });
    }
    let _ = cfg;
    let (w, h, t) = (seq.width(), seq.height(), seq.len());
    let raw = stack(seq);
    let mut cache: Vec<((u64, u64), (Vec<f64>, Vec<f64>, Vec<f64>))> = Vec::new();
    let mut out = Vec::with_capacity(pts.len());
    for p in pts {
        let key = (p.sigma_s.to_bits(), p.sigma_t.to_bits());
        let slot = match cache.iter().position(|(k, _)| *k == key) {
            Some(i) => i,
            None => {
                let l = blur_stack(&raw, w, h, t, p.sigma_s, p.sigma_t);
                cache.push((key, gradients(&l, w, h, t)));
                cache.len() - 1
            }
        };
        let (gx, gy, gt) = &cache[slot].1;
        let (Some((x0, x1)), Some((y0, y1)), Some((t0, t1))) = (
            axis_range(p.x, 3.0 * p.sigma_s, w),
            axis_range(p.y, 3.0 * p.sigma_s, h),
            axis_range(p.t, 3.0 * p.sigma_t, t),
        ) else {
            return Err(Error::WindowOutside);
        };
        let mut hist = vec![0.0; SPACETIME_DESCRIPTOR_LEN];
        let mut energy = 0.0;
        for f in t0..=t1 {
            let ct = usize::from(f as f64 >= p.t);
            for y in y0..=y1 {
                let cy = usize::from(y as f64 >= p.y);
                for x in x0..=x1 {
                    let cx = usize::from(x as f64 >= p.x);
                    let i = (f * h + y) * w + x;
                    let (a, b, c) = (gx[i], gy[i], gt[i]);
                    let planar = (a * a + b * b).sqrt();
                    let mag2 = a * a + b * b + c * c;
                    if mag2 == 0.0 {
                        continue;
                    }
                    energy += mag2;
                    let azimuth = super::wrap(b.atan2(a), 2.0 * PI);
                    let az = ((azimuth * AZIMUTH_BINS as f64 / (2.0 * PI)) as usize).min(AZIMUTH_BINS - 1);
                    let elevation = c.atan2(planar);
                    let el = (((elevation + PI / 2.0) / (PI / ELEVATION_BINS as f64)) as usize).min(ELEVATION_BINS - 1);
                    let cell = (ct * 2 + cy) * 2 + cx;
                    hist[cell * CELL_BINS + el * AZIMUTH_BINS + az] += mag2.sqrt();
                }
            }
        }
        out.push(finish_descriptor(hist, energy, None));
    }
    Ok(out)
}

/// Index of the elevation bin containing zero elevation (no temporal gradient).
pub const ZERO_ELEVATION_BIN: usize = ELEVATION_BINS / 2;

/// Total descriptor mass in the zero-elevation bins.
pub fn zero_elevation_mass(d: &Descriptor) -> f64 {
    d.values
        .chunks_exact(CELL_BINS)
        .map(|cell| cell[ZERO_ELEVATION_BIN * AZIMUTH_BINS..(ZERO_ELEVATION_BIN + 1) * AZIMUTH_BINS].iter().sum::<f64>())
        .sum()
}
