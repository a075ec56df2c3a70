//! `.vol4` volume containers and `.planes` ground-truth sidecars.
//!
//! A `.vol4` file is a short text header:
//!
//! ```text
//! dims=64 64 64
//! spacing=1 1 1
//! frames=8
//! dtype=u8
//! data=case01.raw
//! ```
//!
//! The raw file holds little-endian samples, frame-major, then z, y, x. `u8` samples are
//! divided by 255; `f32` samples are read as-is and must already lie in `[0, 1]`.

use std::fs;
use std::path::{Path, PathBuf};

use planefinder_core::volume::{PlaneParams, Vec3, Volume4D};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    U8,
    F32,
}

impl DType {
    pub fn name(self) -> &'static str {
        match self {
            DType::U8 => "u8",
            DType::F32 => "f32",
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::F32 => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vol4Header {
    pub dims: [usize; 3],
    pub spacing: Vec3,
    pub frames: usize,
    pub dtype: DType,
    pub data: PathBuf,
}

fn parse_list<T: std::str::FromStr, const N: usize>(path: &Path, key: &str, value: &str) -> Result<[T; N]> {
    let parts: Vec<T> = value
        .split_whitespace()
        .map(|p| p.parse::<T>().map_err(|_| Error::format(path, format!("bad {key} value `{p}`"))))
        .collect::<Result<_>>()?;
    parts
        .try_into()
        .map_err(|_| Error::format(path, format!("{key} needs {N} values, got `{value}`")))
}

pub fn read_header(path: &Path) -> Result<Vol4Header> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (mut dims, mut spacing, mut frames, mut dtype, mut data) = (None, None, None, None, None);
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (key, value) = line.split_once('=').ok_or_else(|| Error::format(path, format!("expected key=value, got `{line}`")))?;
        let value = value.trim();
        match key.trim() {
            "dims" => dims = Some(parse_list::<usize, 3>(path, "dims", value)?),
            "spacing" => spacing = Some(parse_list::<f64, 3>(path, "spacing", value)?),
            "frames" => {
                frames = Some(value.parse::<usize>().map_err(|_| Error::format(path, format!("bad frames `{value}`")))?)
            }
            "dtype" => {
                dtype = Some(match value {
                    "u8" => DType::U8,
                    "f32" => DType::F32,
                    other => return Err(Error::format(path, format!("unsupported dtype `{other}` (u8|f32)"))),
                })
            }
            "data" => data = Some(PathBuf::from(value)),
            other => return Err(Error::format(path, format!("unknown header key `{other}`"))),
        }
    }
    let missing = |k: &str| Error::format(path, format!("header lacks `{k}`"));
    Ok(Vol4Header {
        dims: dims.ok_or_else(|| missing("dims"))?,
        spacing: spacing.ok_or_else(|| missing("spacing"))?,
        frames: frames.ok_or_else(|| missing("frames"))?,
        dtype: dtype.ok_or_else(|| missing("dtype"))?,
        data: data.ok_or_else(|| missing("data"))?,
    })
}

fn data_path(header_path: &Path, data: &Path) -> PathBuf {
    match header_path.parent() {
        Some(dir) if data.is_relative() => dir.join(data),
        _ => data.to_path_buf(),
    }
}

pub fn load_volume(path: &Path) -> Result<Volume4D> {
    let header = read_header(path)?;
    let raw_path = data_path(path, &header.data);
    let bytes = fs::read(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
    let count = header.frames * header.dims.iter().product::<usize>();
    let expected = (count * header.dtype.size()) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch { path: raw_path, expected, got: bytes.len() as u64 });
    }
    let voxels: Vec<f64> = match header.dtype {
        DType::U8 => bytes.iter().map(|&b| b as f64 / 255.0).collect(),
        DType::F32 => bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect(),
    };
    if voxels.iter().any(|v| v.is_nan()) {
        return Err(Error::format(&raw_path, "data contains NaN"));
    }
    Volume4D::new(header.dims, header.spacing, header.frames, voxels).map_err(Error::Core)
}

/// Writes `<path>` and its raw data next to it as `<stem>.raw`.
pub fn save_volume(vol: &Volume4D, path: &Path, dtype: DType) -> Result<()> {
    let stem = path
        .file_stem()
        .ok_or_else(|| Error::format(path, "volume path has no file name"))?
        .to_string_lossy()
        .into_owned();
    let raw_name = format!("{stem}.raw");
    let raw_path = data_path(path, Path::new(&raw_name));
    let bytes: Vec<u8> = match dtype {
        DType::U8 => vol.voxels().iter().map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8).collect(),
        DType::F32 => vol.voxels().iter().flat_map(|&v| (v as f32).to_le_bytes()).collect(),
    };
    fs::write(&raw_path, bytes).map_err(|e| Error::io(&raw_path, e))?;
    let [nx, ny, nz] = vol.dims();
    let [sx, sy, sz] = vol.spacing();
    let header = format!(
        "dims={nx} {ny} {nz}\nspacing={sx} {sy} {sz}\nframes={}\ndtype={}\ndata={raw_name}\n",
        vol.n_frames(),
        dtype.name()
    );
    fs::write(path, header).map_err(|e| Error::io(path, e))
}

/// One ground-truth plane per class: `<class_id> <ox> <oy> <oz> <ux> <uy> <uz> <vx> <vy> <vz>`.
pub fn save_planes(path: &Path, planes: &[(usize, PlaneParams)]) -> Result<()> {
    let mut text = String::new();
    for (class, p) in planes {
        let nums: Vec<String> = p.origin.iter().chain(&p.axis_u).chain(&p.axis_v).map(|v| format!("{v:?}")).collect();
        text.push_str(&format!("{class} {}\n", nums.join(" ")));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a sidecar; plane extent and pixel step are not stored and come from the caller.
pub fn load_planes(path: &Path, width: usize, height: usize, pixel_step: f64) -> Result<Vec<(usize, PlaneParams)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 10 {
            return Err(Error::format(path, format!("line {}: expected 10 fields, got {}", i + 1, parts.len())));
        }
        let class = parts[0].parse::<usize>().map_err(|_| Error::format(path, format!("line {}: bad class id", i + 1)))?;
        let v: Vec<f64> = parts[1..]
            .iter()
            .map(|p| p.parse::<f64>().map_err(|_| Error::format(path, format!("line {}: bad number `{p}`", i + 1))))
            .collect::<Result<_>>()?;
        let params = PlaneParams {
            origin: [v[0], v[1], v[2]],
            axis_u: [v[3], v[4], v[5]],
            axis_v: [v[6], v[7], v[8]],
            width,
            height,
            pixel_step,
        };
        params.validate().map_err(Error::Core)?;
        out.push((class, params));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, header: &str, raw: &[u8]) -> PathBuf {
        fs::write(dir.join("v.raw"), raw).unwrap();
        let p = dir.join(name);
        fs::write(&p, header).unwrap();
        p
    }

    #[test]
    fn loads_u8_and_checks_sizes() {
        let dir = tempfile::tempdir().unwrap();
        let head = "dims=4 4 4\nspacing=1 1 1\nframes=2\ndtype=u8\ndata=v.raw\n";
        let p = write(dir.path(), "v.vol4", head, &[0u8; 128]);
        let v = load_volume(&p).unwrap();
        assert_eq!(v.voxels().len(), 128);
        assert!(v.voxels().iter().all(|&x| x == 0.0));
        let p = write(dir.path(), "v.vol4", head, &[0u8; 127]);
        assert!(matches!(load_volume(&p), Err(Error::SizeMismatch { expected: 128, got: 127, .. })));
    }

    #[test]
    fn rejects_bad_dtype_and_nan() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.vol4", "dims=2 2 2\nspacing=1 1 1\nframes=1\ndtype=u16\ndata=v.raw\n", &[0; 16]);
        assert!(matches!(load_volume(&p), Err(Error::Format { .. })));
        let raw: Vec<u8> = (0..8).flat_map(|i| if i == 3 { f32::NAN } else { 0.5f32 }.to_le_bytes()).collect();
        let p = write(dir.path(), "b.vol4", "dims=2 2 2\nspacing=1 1 1\nframes=1\ndtype=f32\ndata=v.raw\n", &raw);
        assert!(matches!(load_volume(&p), Err(Error::Format { .. })));
        assert!(matches!(load_volume(&dir.path().join("missing.vol4")), Err(Error::Io { .. })));
    }
}
