use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use planefinder::bundle::ModelBundle;
use planefinder::config::PipelineConfig;
use planefinder::core::classifier::KernelKind;
use planefinder::core::embedding::View;
use planefinder::core::smoothing::{l0_smooth, SmoothingConfig};
use planefinder::image_io;
use planefinder::manifest::DatasetManifest;
use planefinder::pipeline::{self, DatasetFeatures, EvalMode};
use planefinder::report;
use planefinder::synth::{self, SynthOptions};
use planefinder::volume_io::load_volume;

#[derive(Parser)]
#[command(name = "planefinder", version, about = "Locate standard planes in 4D volumes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Hik,
    Linear,
}

#[derive(Clone, Copy, ValueEnum)]
enum ViewArg {
    Static,
    Spacetime,
    Fused,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Synthetic,
    Volume,
}

#[derive(Subcommand)]
enum Command {
    /// Write a labeled phantom dataset with train/test manifests and a desk-scale config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 16)]
        volumes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
    },
    /// Train codebooks, embedding and classifiers and write a model bundle.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svm_c: Option<f64>,
        #[arg(long, value_enum)]
        kernel: Option<KernelArg>,
        #[arg(long, value_enum)]
        view: Option<ViewArg>,
    },
    /// Rank the candidate planes of a volume for one standard-plane class.
    Locate {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        volume: PathBuf,
        #[arg(long = "class")]
        class: usize,
        #[arg(long, default_value_t = 3)]
        top_k: usize,
    },
    /// Evaluate a bundle on a labeled manifest.
    Eval {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "synthetic")]
        mode: ModeArg,
        /// Also train and evaluate the baselines on this training manifest.
        #[arg(long)]
        baselines: Option<PathBuf>,
        #[arg(long)]
        report_out: Option<PathBuf>,
    },
    /// Time training and classification for each feature representation.
    Bench {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        report_out: Option<PathBuf>,
    },
    /// Write original and smoothed frames with static keypoints marked.
    Keypoints {
        /// Directory of PGM frames, read in name order.
        #[arg(long = "in", conflicts_with = "volume")]
        input: Option<PathBuf>,
        #[arg(long)]
        volume: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        candidate: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        overlay: PathBuf,
    },
    /// L0-smooth one PGM image.
    Smooth {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.02)]
        lambda: f64,
    },
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    Ok(match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    })
}

fn read_frames(dir: &Path) -> Result<Vec<planefinder::core::GrayImage>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pgm"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .pgm frames in {}", dir.display());
    }
    paths.iter().map(|p| Ok(image_io::read_pgm(p)?)).collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { out, volumes, seed, noise } => {
            let mut opts = SynthOptions { volumes, seed, train_volumes: volumes / 2, ..SynthOptions::default() };
            opts.spec.noise_sigma = noise;
            let o = synth::write_dataset(&out, &opts)?;
            println!("wrote {} volumes", o.volumes.len());
            println!("train manifest: {}", o.train_manifest.display());
            println!("test manifest:  {}", o.test_manifest.display());
            println!("config:         {}", o.config.display());
        }
        Command::Train { manifest, config, out, svm_c, kernel, view } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(c) = svm_c {
                cfg.svm.c = c;
            }
            if let Some(k) = kernel {
                cfg.svm.kernel = match k {
                    KernelArg::Hik => KernelKind::Hik,
                    KernelArg::Linear => KernelKind::Linear,
                };
            }
            if let Some(v) = view {
                cfg.embedding.view = match v {
                    ViewArg::Static => View::Static,
                    ViewArg::Spacetime => View::Spacetime,
                    ViewArg::Fused => View::Fused,
                };
            }
            cfg.validate()?;
            let m = DatasetManifest::load(&manifest)?;
            let bundle = pipeline::train_pipeline(&m, &cfg)?;
            let hash = bundle.save(&out)?;
            println!("bundle {} ({} classes, code length {})", out.display(), bundle.classes, bundle.embedding.c);
            println!("hash={hash}");
        }
        Command::Locate { bundle, volume, class, top_k } => {
            let b = ModelBundle::load(&bundle)?;
            let vol = load_volume(&volume)?;
            let name = volume.display().to_string();
            let located = pipeline::locate_standard_planes(&vol, &b, class, top_k, &name)?;
            print!("{}", report::located_text(&located));
        }
        Command::Eval { bundle, manifest, mode, baselines, report_out } => {
            let b = ModelBundle::load(&bundle)?;
            let test = DatasetManifest::load(&manifest)?;
            let mode = match mode {
                ModeArg::Synthetic => EvalMode::Synthetic,
                ModeArg::Volume => EvalMode::Volume,
            };
            let feats = DatasetFeatures::compute(&test, &b.config, mode.scope())?;
            let reports = match baselines {
                Some(train_path) => {
                    let train = DatasetManifest::load(&train_path)?;
                    let train_feats = DatasetFeatures::compute(&train, &b.config, pipeline::Scope::Labeled)?;
                    let trained = pipeline::train_from_features(&train, &train_feats, &b.config)?;
                    if trained.bundle.content_hash() != b.content_hash() {
                        bail!("bundle was not trained on {} with its own configuration", train_path.display());
                    }
                    pipeline::run_baselines(&trained, &test, &feats, &[mode])?
                }
                None => vec![pipeline::evaluate_with(&test, &feats, &b, &b.method_model(), &[mode], 0.0)?],
            };
            print!("{}", report::evaluation_text(&reports));
            println!("\nfeature extraction: {:.2}s", feats.extraction_secs);
            if let Some(p) = report_out {
                report::write_text(&p, &report::evaluation_tsv(&reports))?;
            }
        }
        Command::Bench { bundle, manifest, report_out } => {
            let b = ModelBundle::load(&bundle)?;
            let m = DatasetManifest::load(&manifest)?;
            let (rows, extraction) = pipeline::benchmark(&b, &m)?;
            print!("{}", report::timing_text(&rows));
            println!("\nfeature extraction (excluded above): {extraction:.2}s");
            if let Some(p) = report_out {
                report::write_text(&p, &report::timing_tsv(&rows))?;
            }
        }
        Command::Keypoints { input, volume, candidate, config, overlay } => {
            let cfg = load_config(config.as_deref())?;
            let frames = match (input, volume) {
                (Some(dir), None) => read_frames(&dir)?,
                (None, Some(v)) => pipeline::candidate_frames(&load_volume(&v)?, &cfg, candidate)?,
                _ => bail!("give either --in <frame dir> or --volume <file>"),
            };
            let s = pipeline::dump_keypoint_overlays(&frames, &cfg, &overlay)?;
            println!(
                "wrote {} images; keypoints original={} smoothed={}",
                s.files.len(),
                s.original_points,
                s.smoothed_points
            );
        }
        Command::Smooth { input, out, lambda } => {
            let img = image_io::read_pgm(&input)?;
            let smoothed = l0_smooth(&img, &SmoothingConfig::with_lambda(lambda))?;
            image_io::write_pgm(&out, &smoothed)?;
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
