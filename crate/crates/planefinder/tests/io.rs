use planefinder::image_io::{read_pgm, write_overlay, write_pgm};
use planefinder::matrix_io::{read_matrix, write_matrix, MAGIC};
use planefinder::volume_io::{load_planes, load_volume, save_planes, save_volume, DType};
use planefinder::Error;
use planefinder_core::volume::{PlaneParams, Volume4D};
use planefinder_core::{DMatrix, GrayImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn volume_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 5 * 4 * 3 * 2;
    // f32 storage keeps every f32-representable value; u8 keeps multiples of 1/255
    let as_f32: Vec<f64> = (0..n).map(|_| rng.random::<f32>() as f64).collect();
    let as_u8: Vec<f64> = (0..n).map(|_| rng.random::<u8>() as f64 / 255.0).collect();
    for (voxels, dtype) in [(as_f32, DType::F32), (as_u8, DType::U8)] {
        let vol = Volume4D::new([5, 4, 3], [1.0, 0.5, 2.0], 2, voxels).unwrap();
        let path = dir.path().join(format!("v_{}.vol4", dtype.name()));
        save_volume(&vol, &path, dtype).unwrap();
        let back = load_volume(&path).unwrap();
        assert_eq!(back.dims(), vol.dims());
        assert_eq!(back.spacing(), vol.spacing());
        assert_eq!(back.n_frames(), 2);
        assert!(back.voxels().iter().zip(vol.voxels()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn truncated_raw_is_a_size_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let vol = Volume4D::new([4, 4, 4], [1.0; 3], 1, vec![0.5; 64]).unwrap();
    let path = dir.path().join("t.vol4");
    save_volume(&vol, &path, DType::U8).unwrap();
    let raw = dir.path().join("t.raw");
    let bytes = std::fs::read(&raw).unwrap();
    std::fs::write(&raw, &bytes[..bytes.len() - 1]).unwrap();
    assert!(matches!(load_volume(&path), Err(Error::SizeMismatch { expected: 64, got: 63, .. })));
}

#[test]
fn planes_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let planes = vec![
        (0, PlaneParams::centered([10.0, 12.0, 9.5], [0.0, 0.0, 1.0], 16, 16, 1.0)),
        (2, PlaneParams::centered([5.0, 5.0, 5.0], [0.6, 0.0, 0.8], 16, 16, 1.0)),
    ];
    let path = dir.path().join("p.planes");
    save_planes(&path, &planes).unwrap();
    let back = load_planes(&path, 16, 16, 1.0).unwrap();
    assert_eq!(back.len(), 2);
    for ((ka, a), (kb, b)) in planes.iter().zip(&back) {
        assert_eq!(ka, kb);
        assert!(a.angle_to(b) < 1e-9);
        let (ca, cb) = (a.center(), b.center());
        assert!((0..3).all(|i| (ca[i] - cb[i]).abs() < 1e-9));
    }
}

#[test]
fn matrix_files_start_with_magic_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = DMatrix::from_fn(3, 5, |i, j| i as f64 * 0.1 - j as f64 * 1e-7);
    let path = dir.path().join("m.bin");
    write_matrix(&path, &m).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..8], MAGIC);
    assert_eq!(bytes.len(), 8 + 8 + 15 * 8);
    assert_eq!(read_matrix(&path).unwrap(), m);
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(read_matrix(&path).is_err());
}

#[test]
fn images_round_trip_at_eight_bits() {
    let dir = tempfile::tempdir().unwrap();
    let img = GrayImage::from_fn(7, 5, |x, y| ((x * 5 + y) * 7 % 256) as f64 / 255.0);
    let path = dir.path().join("i.pgm");
    write_pgm(&path, &img).unwrap();
    assert_eq!(read_pgm(&path).unwrap(), img);
    let overlay = dir.path().join("o.ppm");
    write_overlay(&overlay, &img, &[(3.0, 2.0)]).unwrap();
    let bytes = std::fs::read(&overlay).unwrap();
    assert!(bytes.starts_with(b"P6"));
    // the marker is drawn in yellow
    assert!(bytes.windows(3).any(|w| w == [255, 255, 0]));
}
