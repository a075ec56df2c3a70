//! 8-bit binary PGM (P5) frames and PPM (P6) keypoint overlays.

use std::fs;
use std::path::Path;

use planefinder_core::GrayImage;

use crate::{Error, Result};

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|&v| to_byte(v)));
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Next whitespace-separated header token, skipping `#` comments.
fn token(bytes: &[u8], pos: &mut usize) -> Option<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

/// Reads a binary PGM with `maxval <= 255`, scaling samples to `[0, 1]`.
pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut pos = 0;
    let bad = |m: &str| Error::format(path, m.to_string());
    if token(&bytes, &mut pos).as_deref() != Some("P5") {
        return Err(bad("not a binary PGM (P5)"));
    }
    let mut num = || token(&bytes, &mut pos).and_then(|t| t.parse::<usize>().ok());
    let (w, h, maxval) = (num(), num(), num());
    let (Some(w), Some(h), Some(maxval)) = (w, h, maxval) else {
        return Err(bad("malformed PGM header"));
    };
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit PGM is supported"));
    }
    pos += 1;
    let data = bytes.get(pos..pos + w * h).ok_or_else(|| bad("PGM pixel data is truncated"))?;
    GrayImage::from_vec(w, h, data.iter().map(|&b| b as f64 / maxval as f64).collect()).map_err(Error::Core)
}

/// Writes the frame in gray with a yellow cross at every point.
pub fn write_overlay(path: &Path, img: &GrayImage, points: &[(f64, f64)]) -> Result<()> {
    let (w, h) = (img.width(), img.height());
    let mut rgb: Vec<[u8; 3]> = img.data().iter().map(|&v| [to_byte(v); 3]).collect();
    for &(x, y) in points {
        let (cx, cy) = (x.round() as isize, y.round() as isize);
        for d in -2isize..=2 {
            for (px, py) in [(cx + d, cy), (cx, cy + d)] {
                if px >= 0 && py >= 0 && (px as usize) < w && (py as usize) < h {
                    rgb[py as usize * w + px as usize] = [255, 255, 0];
                }
            }
        }
    }
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.extend(rgb.iter().flatten());
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
