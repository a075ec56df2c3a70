use std::path::Path;
use std::process::{Command, Output};

use planefinder::image_io::write_pgm;
use planefinder_core::GrayImage;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_planefinder")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_manifest_is_reported_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.tsv");
    let o = run(&["train", "--manifest", s(&missing), "--out", s(&dir.path().join("b"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.tsv"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.txt");
    std::fs::write(&cfg, "svm.c = 2\nsvm.gamma = 1\n").unwrap();
    let manifest = dir.path().join("m.tsv");
    std::fs::write(&manifest, "").unwrap();
    let o = run(&["train", "--manifest", s(&manifest), "--config", s(&cfg), "--out", s(&dir.path().join("b"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("svm.gamma"), "{}", stderr(&o));
}

#[test]
fn malformed_manifest_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["synth", "--out", s(dir.path()), "--volumes", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let train = dir.path().join("train.tsv");
    let mut text = std::fs::read_to_string(&train).unwrap();
    text.push_str("vol00.vol4\t3\t1,0\n");
    std::fs::write(&train, &text).unwrap();
    let lines = text.lines().count();
    let o = run(&["train", "--manifest", s(&train), "--out", s(&dir.path().join("b"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(&format!("line {lines}")), "{}", stderr(&o));
}

#[test]
fn locate_needs_a_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["locate", "--bundle", s(dir.path()), "--volume", "v.vol4", "--class", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bundle.manifest"), "{}", stderr(&o));
}

#[test]
fn constant_frames_give_unmarked_overlays() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    std::fs::create_dir(&frames).unwrap();
    for t in 0..3 {
        write_pgm(&frames.join(format!("f{t}.pgm")), &GrayImage::filled(64, 64, 0.4)).unwrap();
    }
    let out = dir.path().join("overlay");
    let o = run(&["keypoints", "--in", s(&frames), "--overlay", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("wrote 6 images; keypoints original=0 smoothed=0"), "{}", stdout(&o));
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), 6);
}

#[test]
fn smoothing_a_noisy_phantom_plane_removes_keypoints() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["synth", "--out", s(dir.path()), "--volumes", "2", "--noise", "0.1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("overlay");
    let o = run(&[
        "keypoints",
        "--volume",
        s(&dir.path().join("vol00.vol4")),
        "--config",
        s(&dir.path().join("config.txt")),
        "--candidate",
        "0",
        "--overlay",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let count = |key: &str| -> usize {
        let rest = &text[text.find(key).unwrap() + key.len()..];
        rest.split_whitespace().next().unwrap().parse().unwrap()
    };
    assert!(text.contains("wrote 16 images"), "{text}");
    assert!(count("smoothed=") <= count("original="), "{text}");
}

#[test]
fn smooth_writes_an_image_of_the_same_size() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.pgm");
    write_pgm(&input, &GrayImage::from_fn(20, 12, |x, _| if x < 10 { 0.2 } else { 0.8 })).unwrap();
    let out = dir.path().join("out.pgm");
    let o = run(&["smooth", "--in", s(&input), "--out", s(&out), "--lambda", "0.02"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let img = planefinder::image_io::read_pgm(&out).unwrap();
    assert_eq!((img.width(), img.height()), (20, 12));
}
