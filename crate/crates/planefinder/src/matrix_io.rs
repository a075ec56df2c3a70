//! Binary matrix files: the 8-byte magic `PFMAT001`, `u32` rows, `u32` cols, then
//! row-major little-endian `f64`.

use std::fs;
use std::path::Path;

use planefinder_core::DMatrix;

use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PFMAT001";

pub fn encode(rows: usize, cols: usize, row_major: &[f64]) -> Vec<u8> {
    assert_eq!(row_major.len(), rows * cols, "matrix data does not match its shape");
    let mut out = Vec::with_capacity(16 + 8 * row_major.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for v in row_major {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(path: &Path, bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::format(path, "missing PFMAT001 magic"));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() != rows * cols * 8 {
        return Err(Error::SizeMismatch { path: path.to_path_buf(), expected: (rows * cols * 8) as u64, got: body.len() as u64 });
    }
    let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((rows, cols, data))
}

pub fn write_rows(path: &Path, rows: usize, cols: usize, row_major: &[f64]) -> Result<()> {
    fs::write(path, encode(rows, cols, row_major)).map_err(|e| Error::io(path, e))
}

pub fn read_rows(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(path, &bytes)
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let data: Vec<f64> = m.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect();
    write_rows(path, m.nrows(), m.ncols(), &data)
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let (r, c, data) = read_rows(path)?;
    Ok(DMatrix::from_row_slice(r, c, &data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_fixed() {
        let bytes = encode(1, 2, &[1.0, -2.5]);
        assert_eq!(&bytes[..8], b"PFMAT001");
        assert_eq!(&bytes[8..16], &[1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&bytes[16..24], &1.0f64.to_le_bytes());
        assert_eq!(decode(Path::new("x"), &bytes).unwrap(), (1, 2, vec![1.0, -2.5]));
    }

    #[test]
    fn matrix_round_trip_is_row_major() {
        let dir = tempfile::tempdir().unwrap();
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, f64::MIN_POSITIVE]);
        let p = dir.path().join("m.pfmat");
        write_matrix(&p, &m).unwrap();
        assert_eq!(read_rows(&p).unwrap().2[..3], [1.0, 2.0, 3.0]);
        assert_eq!(read_matrix(&p).unwrap(), m);
        assert!(decode(&p, &encode(2, 2, &[0.0; 4])[..30]).is_err());
    }
}
