//! Writes a labeled phantom dataset: volumes, ground-truth sidecars, train/test manifests
//! and a matching desk-scale configuration.

use std::fs;
use std::path::{Path, PathBuf};

use planefinder_core::embedding::SemanticLabels;
use planefinder_core::phantom::{matching_candidates, synth_phantom, Phantom, PhantomSpec};
use planefinder_core::volume::generate_candidates;

use crate::config::PipelineConfig;
use crate::manifest::Condition;
use crate::volume_io::{save_planes, save_volume, DType};
use crate::{Error, Result};

/// A candidate counts as ground truth within this angle of the true plane normal.
pub const MATCH_ANGLE_DEG: f64 = 10.0;
/// and within this distance of the true plane, in voxels.
pub const MATCH_OFFSET: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub volumes: usize,
    pub seed: u64,
    /// Template for every volume; `seed` and `abnormal` are set per volume.
    pub spec: PhantomSpec,
    /// Volumes used for training; the rest form the test set.
    pub train_volumes: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self { volumes: 16, seed: 0, spec: PhantomSpec::default(), train_volumes: 8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub volumes: Vec<PathBuf>,
    pub train_manifest: PathBuf,
    pub test_manifest: PathBuf,
    pub config: PathBuf,
}

/// Desk-scale settings matched to a phantom layout: 64/32 words, 8-D codes.
pub fn desk_config(spec: &PhantomSpec) -> PipelineConfig {
    let mut cfg = PipelineConfig { candidates: spec.candidates, ..PipelineConfig::default() };
    cfg.codebook.k_static = 64;
    cfg.codebook.k_spacetime = 32;
    cfg.codebook.pool_cap = 20_000;
    cfg.embedding.c = 8;
    cfg
}

/// Phantom spec of volume `i`: alternating normal and abnormal, seeds counting up.
pub fn volume_spec(opts: &SynthOptions, i: usize) -> PhantomSpec {
    PhantomSpec { abnormal: i % 2 == 1, seed: opts.seed.wrapping_add(i as u64), ..opts.spec }
}

/// Labels of every candidate: the matched class, or the non-standard slot.
pub fn candidate_labels(phantom: &Phantom, spec: &PhantomSpec) -> Result<Vec<SemanticLabels>> {
    let candidates = generate_candidates(spec.dims, &spec.candidates)?;
    let slots = spec.class_count + 1;
    let mut plane = vec![spec.class_count; candidates.len()];
    for t in phantom.truth.iter().rev() {
        for i in matching_candidates(&candidates, &t.plane, MATCH_ANGLE_DEG.to_radians(), MATCH_OFFSET) {
            plane[i] = t.class_id;
        }
    }
    let diagnosis = if spec.abnormal { 0 } else { 1 };
    Ok(plane.into_iter().map(|p| SemanticLabels::one_hot(p, slots, diagnosis, 2)).collect::<planefinder_core::Result<_>>()?)
}

fn manifest_lines(name: &str, labels: &[SemanticLabels], condition: Condition) -> String {
    let join = |v: &[u8]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    labels
        .iter()
        .enumerate()
        .map(|(i, l)| format!("{name}\t{i}\t{}\t{}\t{condition}\n", join(l.plane()), join(l.diagnosis())))
        .collect()
}

pub fn write_dataset(out: &Path, opts: &SynthOptions) -> Result<SynthOutput> {
    if opts.volumes < 2 || opts.train_volumes == 0 || opts.train_volumes >= opts.volumes {
        return Err(Error::Config("need at least one training and one test volume".into()));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let (mut train, mut test) = (String::new(), String::new());
    let mut volumes = Vec::new();
    for i in 0..opts.volumes {
        let spec = volume_spec(opts, i);
        let phantom = synth_phantom(&spec)?;
        let name = format!("vol{i:02}.vol4");
        let path = out.join(&name);
        save_volume(&phantom.volume, &path, DType::U8)?;
        let planes: Vec<_> = phantom.truth.iter().map(|t| (t.class_id, t.plane)).collect();
        save_planes(&out.join(format!("vol{i:02}.planes")), &planes)?;
        let condition = if spec.abnormal { Condition::Abnormal } else { Condition::Normal };
        let lines = manifest_lines(&name, &candidate_labels(&phantom, &spec)?, condition);
        if i < opts.train_volumes { &mut train } else { &mut test }.push_str(&lines);
        volumes.push(path);
    }
    let write = |name: &str, text: &str| -> Result<PathBuf> {
        let p = out.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    };
    Ok(SynthOutput {
        volumes,
        train_manifest: write("train.tsv", &train)?,
        test_manifest: write("test.tsv", &test)?,
        config: write("config.txt", &desk_config(&opts.spec).to_text())?,
    })
}
