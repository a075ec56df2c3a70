//! Training, localization, evaluation and timing.
//!
//! Candidate planes are processed in parallel with rayon; results are always collected in
//! candidate order, so every output is independent of scheduling.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use planefinder_core::classifier::{train_multiclass, Classification, KernelKind, MulticlassModel, SvmConfig};
use planefinder_core::codebook::{quantize, train_codebook, Codebook};
use planefinder_core::embedding::{build_similarity_matrix, fit_embedding, EmbeddingModel, SemanticLabels, SimilarityMatrix, View};
use planefinder_core::features::{
    describe_spacetime, detect_spacetime_points, extract_static, Descriptor, DescriptorKind, KeyPoint2D,
};
use planefinder_core::metrics::{mean, retrieval_score, Confusion};
use planefinder_core::smoothing::{l0_smooth, smooth_sequence};
use planefinder_core::volume::{extract_plane_sequence, generate_candidates, PlaneParams, Volume4D};
use planefinder_core::{DMatrix, GrayImage};

use crate::bundle::ModelBundle;
use crate::config::PipelineConfig;
use crate::image_io;
use crate::manifest::{Condition, DatasetManifest};
use crate::volume_io::load_volume;
use crate::{Error, Result};

/// Label used in stage errors that concern the pooled training set rather than one volume.
const TRAINING_SET: &str = "training set";

fn stage<T>(stage: &'static str, volume: &str, r: planefinder_core::Result<T>) -> Result<T> {
    r.map_err(|source| Error::Stage { stage, volume: volume.to_string(), source })
}

/// Descriptors of one candidate plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFeatures {
    pub static_descriptors: Vec<Descriptor>,
    pub spacetime_descriptors: Vec<Descriptor>,
}

/// Extract, smooth (when enabled), then detect and describe both feature kinds.
pub fn plane_features(vol: &Volume4D, params: &PlaneParams, cfg: &PipelineConfig, volume: &str) -> Result<PlaneFeatures> {
    let seq = stage("extract", volume, extract_plane_sequence(vol, params))?;
    let seq = if cfg.smoothing_enabled { stage("smooth", volume, smooth_sequence(&seq, &cfg.smoothing))? } else { seq };
    let mut static_descriptors = Vec::new();
    for frame in &seq.frames {
        let (_, d) = stage("static features", volume, extract_static(frame, &cfg.static_features))?;
        static_descriptors.extend(d);
    }
    let points = stage("spacetime features", volume, detect_spacetime_points(&seq, &cfg.spacetime))?;
    let spacetime_descriptors = stage("spacetime features", volume, describe_spacetime(&seq, &points, &cfg.spacetime))?;
    Ok(PlaneFeatures { static_descriptors, spacetime_descriptors })
}

/// Features of the selected candidates of one volume, in the order of `which`.
pub fn volume_features(
    vol: &Volume4D,
    candidates: &[PlaneParams],
    which: &[usize],
    cfg: &PipelineConfig,
    volume: &str,
) -> Result<Vec<PlaneFeatures>> {
    which.par_iter().map(|&i| plane_features(vol, &candidates[i], cfg, volume)).collect()
}

/// Which candidates of each manifest volume get features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// Only candidates that appear in the manifest.
    Labeled,
    /// Every generated candidate (needed for per-volume retrieval scores).
    AllCandidates,
}

/// Per-volume candidate features for a manifest, indexed by candidate.
#[derive(Debug, Clone)]
pub struct DatasetFeatures {
    pub volumes: Vec<Vec<Option<PlaneFeatures>>>,
    pub extraction_secs: f64,
}

impl DatasetFeatures {
    /// Loads each volume in turn and extracts its candidates in parallel.
    pub fn compute(manifest: &DatasetManifest, cfg: &PipelineConfig, scope: Scope) -> Result<Self> {
        let start = Instant::now();
        let mut volumes = Vec::with_capacity(manifest.volumes.len());
        for (v, entry) in manifest.volumes.iter().enumerate() {
            let vol = load_volume(&entry.path)?;
            let candidates = stage("candidates", &entry.name, generate_candidates(vol.dims(), &cfg.candidates))?;
            manifest.check_candidate_count(candidates.len())?;
            let which: Vec<usize> = match scope {
                Scope::AllCandidates => (0..candidates.len()).collect(),
                Scope::Labeled => {
                    let mut w: Vec<usize> = manifest.records_of(v).map(|r| r.candidate).collect();
                    w.sort_unstable();
                    w
                }
            };
            let feats = volume_features(&vol, &candidates, &which, cfg, &entry.name)?;
            let mut slots: Vec<Option<PlaneFeatures>> = vec![None; candidates.len()];
            for (i, f) in which.into_iter().zip(feats) {
                slots[i] = Some(f);
            }
            volumes.push(slots);
        }
        Ok(Self { volumes, extraction_secs: start.elapsed().as_secs_f64() })
    }

    pub fn get(&self, volume: usize, candidate: usize) -> Option<&PlaneFeatures> {
        self.volumes.get(volume)?.get(candidate)?.as_ref()
    }

    /// Features of every manifest record, in record order.
    pub fn labeled<'a>(&'a self, manifest: &DatasetManifest) -> Result<Vec<&'a PlaneFeatures>> {
        manifest
            .records
            .iter()
            .map(|r| {
                self.get(r.volume, r.candidate).ok_or_else(|| Error::Manifest {
                    path: manifest.path.clone(),
                    line: r.line,
                    message: format!("no features computed for candidate {}", r.candidate),
                })
            })
            .collect()
    }
}

/// Keeps at most `cap` items by reservoir sampling, deterministically for a fixed seed.
pub fn reservoir_sample<T: Clone>(items: impl IntoIterator<Item = T>, cap: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = Vec::new();
    for (i, item) in items.into_iter().enumerate() {
        if pool.len() < cap {
            pool.push(item);
        } else {
            let j = rng.random_range(0..=i);
            if j < cap {
                pool[j] = item;
            }
        }
    }
    pool
}

/// Trains both vocabularies on the pooled (and capped) non-degenerate training descriptors.
pub fn learn_codebooks(features: &[&PlaneFeatures], cfg: &PipelineConfig) -> Result<(Codebook, Codebook)> {
    let cb = &cfg.codebook;
    let pool = |pick: fn(&PlaneFeatures) -> &Vec<Descriptor>, seed: u64| {
        let all = features.iter().flat_map(|f| pick(f).iter()).filter(|d| !d.degenerate).cloned();
        reservoir_sample(all, cb.pool_cap, seed)
    };
    let static_pool = pool(|f| &f.static_descriptors, cb.pool_seed);
    let spacetime_pool = pool(|f| &f.spacetime_descriptors, cb.pool_seed.wrapping_add(1));
    let s = stage("static codebook", TRAINING_SET, train_codebook(&static_pool, DescriptorKind::Static, &cb.kmeans_static()))?;
    let t = stage(
        "spacetime codebook",
        TRAINING_SET,
        train_codebook(&spacetime_pool, DescriptorKind::Spacetime, &cb.kmeans_spacetime()),
    )?;
    Ok((s, t))
}

/// Bag-of-words histograms of every plane: `(X rows, Y rows)`.
pub fn encode(features: &[&PlaneFeatures], static_cb: &Codebook, spacetime_cb: &Codebook) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    features
        .par_iter()
        .map(|f| {
            let x = stage("quantize", TRAINING_SET, quantize(&f.static_descriptors, static_cb))?.values;
            let y = stage("quantize", TRAINING_SET, quantize(&f.spacetime_descriptors, spacetime_cb))?.values;
            Ok((x, y))
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().unzip())
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let d = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j])
}

/// Standard-plane class of each label, `None` for non-standard planes.
pub fn plane_targets(labels: &[SemanticLabels]) -> Vec<Option<usize>> {
    labels.iter().map(SemanticLabels::standard_class).collect()
}

/// How a plane is represented for the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Raw static bag of words.
    Static,
    /// Raw spatio-temporal bag of words.
    Spacetime,
    /// Both bags of words side by side.
    Concat,
    /// Unsupervised canonical correlation (identity similarity).
    Cca,
    /// Supervised embedding with the label-derived similarity.
    Embedded,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Static, Method::Spacetime, Method::Concat, Method::Cca, Method::Embedded];
    /// The four representations compared by the timing table.
    pub const TIMED: [Method; 4] = [Method::Static, Method::Spacetime, Method::Concat, Method::Embedded];

    pub fn name(self) -> &'static str {
        match self {
            Method::Static => "static",
            Method::Spacetime => "spacetime",
            Method::Concat => "concat",
            Method::Cca => "cca",
            Method::Embedded => "embedded",
        }
    }
}

/// A representation plus the classifier trained on it.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodModel {
    pub method: Method,
    pub embedding: Option<EmbeddingModel>,
    pub view: View,
    pub classifier: MulticlassModel,
}

fn raw_svm_config(cfg: &SvmConfig) -> SvmConfig {
    // histograms are already nonnegative and comparable across dimensions
    SvmConfig { scale: cfg.kernel != KernelKind::Hik && cfg.scale, ..*cfg }
}

impl MethodModel {
    pub fn representation(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        Ok(match (self.method, &self.embedding) {
            (Method::Static, _) => x.to_vec(),
            (Method::Spacetime, _) => y.to_vec(),
            (Method::Concat, _) => [x, y].concat(),
            (_, Some(e)) => e.embed(Some(x), Some(y), self.view)?,
            (_, None) => return Err(Error::Bundle(format!("{} model lacks its embedding", self.method.name()))),
        })
    }

    pub fn classify(&self, x: &[f64], y: &[f64]) -> Result<Classification> {
        Ok(self.classifier.classify(&self.representation(x, y)?)?)
    }

    pub fn dim(&self) -> usize {
        self.classifier.dim().unwrap_or(0)
    }
}

/// Fits one representation and its one-vs-rest classifier on encoded training planes.
pub fn fit_method(
    method: Method,
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    labels: &[SemanticLabels],
    classes: usize,
    cfg: &PipelineConfig,
) -> Result<MethodModel> {
    let targets = plane_targets(labels);
    let view = cfg.embedding.view;
    let embedding = match method {
        Method::Cca | Method::Embedded => {
            let s = match method {
                Method::Cca => SimilarityMatrix::identity(labels.len()),
                _ => stage("similarity", TRAINING_SET, build_similarity_matrix(labels))?,
            };
            let (xm, ym) = (rows_to_matrix(x), rows_to_matrix(y));
            Some(stage("embedding", TRAINING_SET, fit_embedding(&xm, &ym, &s, cfg.embedding.c, cfg.embedding.epsilon))?)
        }
        _ => None,
    };
    let partial = MethodModel {
        method,
        embedding,
        view,
        classifier: MulticlassModel { machines: Vec::new(), scaler: None, kernel: cfg.svm.kernel },
    };
    let z = x.iter().zip(y).map(|(a, b)| partial.representation(a, b)).collect::<Result<Vec<_>>>()?;
    let svm = match method {
        Method::Static | Method::Spacetime | Method::Concat => raw_svm_config(&cfg.svm),
        _ => cfg.svm,
    };
    let classifier = stage("classifier", TRAINING_SET, train_multiclass(&z, &targets, classes, &svm))?;
    Ok(MethodModel { classifier, ..partial })
}

/// Everything learned from one training manifest, before and after the classifier.
pub struct TrainedPipeline {
    pub bundle: ModelBundle,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub labels: Vec<SemanticLabels>,
    pub train_secs: f64,
}

impl ModelBundle {
    /// The bundle's representation, viewed as a [`MethodModel`].
    pub fn method_model(&self) -> MethodModel {
        MethodModel {
            method: Method::Embedded,
            embedding: Some(self.embedding.clone()),
            view: self.config.embedding.view,
            classifier: self.classifier.clone(),
        }
    }

    pub fn encode_plane(&self, f: &PlaneFeatures) -> Result<(Vec<f64>, Vec<f64>)> {
        let x = quantize(&f.static_descriptors, &self.static_codebook)?.values;
        let y = quantize(&f.spacetime_descriptors, &self.spacetime_codebook)?.values;
        Ok((x, y))
    }

    pub fn classify_plane(&self, f: &PlaneFeatures) -> Result<Classification> {
        let (x, y) = self.encode_plane(f)?;
        let z = self.embedding.embed(Some(&x), Some(&y), self.config.embedding.view)?;
        Ok(self.classifier.classify(&z)?)
    }
}

/// Learns codebooks, embedding and classifier from precomputed training features.
pub fn train_from_features(manifest: &DatasetManifest, feats: &DatasetFeatures, cfg: &PipelineConfig) -> Result<TrainedPipeline> {
    cfg.validate()?;
    let start = Instant::now();
    let planes = feats.labeled(manifest)?;
    let labels: Vec<SemanticLabels> = manifest.records.iter().map(|r| r.labels.clone()).collect();
    let (static_codebook, spacetime_codebook) = learn_codebooks(&planes, cfg)?;
    let (x, y) = encode(&planes, &static_codebook, &spacetime_codebook)?;
    let model = fit_method(Method::Embedded, &x, &y, &labels, manifest.classes, cfg)?;
    let bundle = ModelBundle {
        config: cfg.clone(),
        classes: manifest.classes,
        diagnosis_slots: manifest.diagnosis_slots,
        static_codebook,
        spacetime_codebook,
        embedding: model.embedding.expect("embedded method carries its embedding"),
        classifier: model.classifier,
    };
    bundle.validate()?;
    Ok(TrainedPipeline { bundle, x, y, labels, train_secs: start.elapsed().as_secs_f64() })
}

/// Full training run: features of every labeled candidate, then [`train_from_features`].
pub fn train_pipeline(manifest: &DatasetManifest, cfg: &PipelineConfig) -> Result<ModelBundle> {
    let feats = DatasetFeatures::compute(manifest, cfg, Scope::Labeled)?;
    Ok(train_from_features(manifest, &feats, cfg)?.bundle)
}

/// One ranked candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Located {
    pub candidate: usize,
    pub decision: f64,
    pub params: PlaneParams,
}

/// Indices sorted by value, descending; equal values keep ascending index order.
pub fn rank_by_decision(values: &[f64], top_k: usize) -> Vec<(usize, f64)> {
    let mut order: Vec<(usize, f64)> = values.iter().copied().enumerate().collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    order.truncate(top_k);
    order
}

/// Scores every candidate of `vol` for one class and returns the best `top_k`.
pub fn locate_standard_planes(vol: &Volume4D, bundle: &ModelBundle, class: usize, top_k: usize, volume: &str) -> Result<Vec<Located>> {
    if class >= bundle.classes {
        return Err(Error::Config(format!("class {class} out of range; bundle has {} classes", bundle.classes)));
    }
    if top_k == 0 {
        return Err(Error::Config("top-k must be >= 1".into()));
    }
    let cfg = &bundle.config;
    let candidates = stage("candidates", volume, generate_candidates(vol.dims(), &cfg.candidates))?;
    let all: Vec<usize> = (0..candidates.len()).collect();
    let feats = volume_features(vol, &candidates, &all, cfg, volume)?;
    let values = feats
        .par_iter()
        .map(|f| Ok(bundle.classify_plane(f)?.decisions[class]))
        .collect::<Result<Vec<f64>>>()?;
    Ok(rank_by_decision(&values, top_k)
        .into_iter()
        .map(|(candidate, decision)| Located { candidate, decision, params: candidates[candidate] })
        .collect())
}

/// Classification of every computed candidate, aligned with [`DatasetFeatures::volumes`].
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub volumes: Vec<Vec<Option<Classification>>>,
    pub test_secs: f64,
}

/// Encodes with `bundle`'s codebooks and classifies with `model`.
pub fn predict(feats: &DatasetFeatures, bundle: &ModelBundle, model: &MethodModel) -> Result<Predictions> {
    let start = Instant::now();
    let volumes = feats
        .volumes
        .iter()
        .map(|slots| {
            slots
                .par_iter()
                .map(|f| match f {
                    Some(f) => {
                        let (x, y) = bundle.encode_plane(f)?;
                        model.classify(&x, &y).map(Some)
                    }
                    None => Ok(None),
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Predictions { volumes, test_secs: start.elapsed().as_secs_f64() })
}

/// One cell of the per-class, per-condition accuracy table.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyCell {
    pub class: usize,
    pub condition: Condition,
    /// Balanced accuracy of "is this class" over the labeled candidates; `None` without samples.
    pub accuracy: Option<f64>,
    pub samples: usize,
    pub positives: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct F1Row {
    pub class: usize,
    pub mean_f1: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub volumes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub method: String,
    pub accuracy: Vec<AccuracyCell>,
    pub f1: Vec<F1Row>,
    pub train_secs: f64,
    pub test_secs: f64,
}

impl EvaluationReport {
    /// Mean over the accuracy cells that have samples.
    pub fn mean_accuracy(&self) -> f64 {
        mean(&self.accuracy.iter().filter_map(|c| c.accuracy).collect::<Vec<_>>())
    }

    pub fn mean_f1(&self) -> f64 {
        mean(&self.f1.iter().map(|r| r.mean_f1).collect::<Vec<_>>())
    }
}

/// Per class and condition: balanced accuracy of the one-class decision over labeled candidates.
pub fn synthetic_accuracy(manifest: &DatasetManifest, preds: &Predictions) -> Result<Vec<AccuracyCell>> {
    if manifest.records.is_empty() {
        return Err(Error::Config("empty test set".into()));
    }
    let mut cells = Vec::new();
    for class in 0..manifest.classes {
        for condition in Condition::ALL {
            let mut conf = Confusion::default();
            for r in manifest.records.iter().filter(|r| manifest.volumes[r.volume].condition == condition) {
                let pred = preds.volumes[r.volume][r.candidate].as_ref().ok_or_else(|| Error::Manifest {
                    path: manifest.path.clone(),
                    line: r.line,
                    message: "candidate was not classified".into(),
                })?;
                conf.record(r.labels.standard_class() == Some(class), pred.class == Some(class));
            }
            let samples = conf.total();
            cells.push(AccuracyCell {
                class,
                condition,
                accuracy: (samples > 0).then(|| conf.balanced_accuracy()),
                samples,
                positives: conf.tp + conf.fn_,
            });
        }
    }
    Ok(cells)
}

/// Per class: F1 of the candidates classified as that class against the ground truth,
/// averaged over volumes. Every candidate of every volume must have been classified.
pub fn volume_f1(manifest: &DatasetManifest, preds: &Predictions) -> Result<Vec<F1Row>> {
    let mut rows = Vec::new();
    for class in 0..manifest.classes {
        let (mut f1, mut p, mut r) = (Vec::new(), Vec::new(), Vec::new());
        for (v, slots) in preds.volumes.iter().enumerate() {
            let truth = manifest.ground_truth(v, class);
            if truth.is_empty() {
                return Err(Error::Config(format!("volume `{}` lacks ground truth for class {class}", manifest.volumes[v].name)));
            }
            let mut predicted = Vec::new();
            for (i, c) in slots.iter().enumerate() {
                let c = c.as_ref().ok_or_else(|| {
                    Error::Config(format!("candidate {i} of `{}` was not classified", manifest.volumes[v].name))
                })?;
                if c.class == Some(class) {
                    predicted.push(i);
                }
            }
            let s = retrieval_score(&predicted, &truth);
            f1.push(s.f1);
            p.push(s.precision);
            r.push(s.recall);
        }
        rows.push(F1Row { class, mean_f1: mean(&f1), mean_precision: mean(&p), mean_recall: mean(&r), volumes: f1.len() });
    }
    Ok(rows)
}

/// Which tables an evaluation fills in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Synthetic,
    Volume,
}

impl EvalMode {
    pub fn scope(self) -> Scope {
        match self {
            EvalMode::Synthetic => Scope::Labeled,
            EvalMode::Volume => Scope::AllCandidates,
        }
    }
}

/// Evaluates a method on precomputed test features.
pub fn evaluate_with(
    manifest: &DatasetManifest,
    feats: &DatasetFeatures,
    bundle: &ModelBundle,
    model: &MethodModel,
    modes: &[EvalMode],
    train_secs: f64,
) -> Result<EvaluationReport> {
    if model.classifier.classes() != manifest.classes {
        return Err(Error::Config(format!(
            "manifest has {} classes but the model has {}",
            manifest.classes,
            model.classifier.classes()
        )));
    }
    let preds = predict(feats, bundle, model)?;
    let accuracy = if modes.contains(&EvalMode::Synthetic) { synthetic_accuracy(manifest, &preds)? } else { Vec::new() };
    let f1 = if modes.contains(&EvalMode::Volume) { volume_f1(manifest, &preds)? } else { Vec::new() };
    Ok(EvaluationReport { method: model.method.name().into(), accuracy, f1, train_secs, test_secs: preds.test_secs })
}

/// Per-class, per-condition accuracy over the labeled test candidates.
pub fn evaluate_synthetic(bundle: &ModelBundle, manifest: &DatasetManifest) -> Result<EvaluationReport> {
    let feats = DatasetFeatures::compute(manifest, &bundle.config, Scope::Labeled)?;
    evaluate_with(manifest, &feats, bundle, &bundle.method_model(), &[EvalMode::Synthetic], 0.0)
}

/// Per-class F1 of the retrieved candidates, averaged over test volumes.
pub fn evaluate_volumes(bundle: &ModelBundle, manifest: &DatasetManifest) -> Result<EvaluationReport> {
    let feats = DatasetFeatures::compute(manifest, &bundle.config, Scope::AllCandidates)?;
    evaluate_with(manifest, &feats, bundle, &bundle.method_model(), &[EvalMode::Volume], 0.0)
}

/// Trains every baseline and the supervised embedding on the same codebooks and SVM
/// settings, then evaluates each on the test set.
pub fn run_baselines(
    trained: &TrainedPipeline,
    test: &DatasetManifest,
    test_feats: &DatasetFeatures,
    modes: &[EvalMode],
) -> Result<Vec<EvaluationReport>> {
    let b = &trained.bundle;
    Method::ALL
        .iter()
        .map(|&m| {
            let start = Instant::now();
            let model = fit_method(m, &trained.x, &trained.y, &trained.labels, b.classes, &b.config)?;
            let secs = start.elapsed().as_secs_f64();
            evaluate_with(test, test_feats, b, &model, modes, secs)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub method: Method,
    pub dims: usize,
    pub candidates: usize,
    /// Embedding fit (when used) plus SVM training.
    pub train_secs: f64,
    /// Classifying every candidate from its bag-of-words histograms.
    pub test_secs: f64,
}

/// Classifies every `(x, y)` pair on the calling thread and returns the elapsed seconds.
pub fn time_classification(model: &MethodModel, x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<(f64, Vec<Option<usize>>)> {
    let start = Instant::now();
    let classes = x.iter().zip(y).map(|(a, b)| Ok(model.classify(a, b)?.class)).collect::<Result<Vec<_>>>()?;
    Ok((start.elapsed().as_secs_f64(), classes))
}

/// Training and classification times of the four timed representations on encoded planes.
pub fn benchmark_encoded(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    labels: &[SemanticLabels],
    classes: usize,
    cfg: &PipelineConfig,
) -> Result<Vec<TimingRow>> {
    Method::TIMED
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let model = fit_method(method, x, y, labels, classes, cfg)?;
            let train_secs = start.elapsed().as_secs_f64();
            let (test_secs, _) = time_classification(&model, x, y)?;
            Ok(TimingRow { method, dims: model.dim(), candidates: x.len(), train_secs, test_secs })
        })
        .collect()
}

/// Timing table for a manifest, using the bundle's configuration and codebooks.
pub fn benchmark(bundle: &ModelBundle, manifest: &DatasetManifest) -> Result<(Vec<TimingRow>, f64)> {
    let feats = DatasetFeatures::compute(manifest, &bundle.config, Scope::Labeled)?;
    let planes = feats.labeled(manifest)?;
    let (x, y) = encode(&planes, &bundle.static_codebook, &bundle.spacetime_codebook)?;
    let labels: Vec<SemanticLabels> = manifest.records.iter().map(|r| r.labels.clone()).collect();
    Ok((benchmark_encoded(&x, &y, &labels, manifest.classes, &bundle.config)?, feats.extraction_secs))
}

/// Frames of one candidate plane, unsmoothed.
pub fn candidate_frames(vol: &Volume4D, cfg: &PipelineConfig, candidate: usize) -> Result<Vec<GrayImage>> {
    let candidates = generate_candidates(vol.dims(), &cfg.candidates)?;
    let params = candidates
        .get(candidate)
        .ok_or_else(|| Error::Config(format!("candidate {candidate} out of range (0..{})", candidates.len())))?;
    Ok(extract_plane_sequence(vol, params)?.frames)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlaySummary {
    pub files: Vec<PathBuf>,
    pub original_points: usize,
    pub smoothed_points: usize,
}

fn marks(kps: &[KeyPoint2D]) -> Vec<(f64, f64)> {
    kps.iter().map(|k| (k.x, k.y)).collect()
}

/// Writes `frame_TTT_original.ppm` and `frame_TTT_smoothed.ppm` for every frame, with the
/// static keypoints detected on each marked in yellow.
pub fn dump_keypoint_overlays(frames: &[GrayImage], cfg: &PipelineConfig, out_dir: &Path) -> Result<OverlaySummary> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut summary = OverlaySummary { files: Vec::new(), original_points: 0, smoothed_points: 0 };
    for (t, frame) in frames.iter().enumerate() {
        let smoothed = l0_smooth(frame, &cfg.smoothing)?;
        let (kp_orig, _) = extract_static(frame, &cfg.static_features)?;
        let (kp_smooth, _) = extract_static(&smoothed, &cfg.static_features)?;
        summary.original_points += kp_orig.len();
        summary.smoothed_points += kp_smooth.len();
        for (tag, img, kps) in [("original", frame, &kp_orig), ("smoothed", &smoothed, &kp_smooth)] {
            let p = out_dir.join(format!("frame_{t:03}_{tag}.ppm"));
            image_io::write_overlay(&p, img, &marks(kps))?;
            summary.files.push(p);
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranking_breaks_ties_by_index() {
        let r = rank_by_decision(&[0.5, 2.0, 0.5, -1.0, 2.0], 10);
        assert_eq!(r.iter().map(|p| p.0).collect::<Vec<_>>(), vec![1, 4, 0, 2, 3]);
        assert_eq!(rank_by_decision(&[1.0, 3.0, 2.0], 2), vec![(1, 3.0), (2, 2.0)]);
    }

    #[test]
    fn reservoir_is_deterministic_and_capped() {
        let a = reservoir_sample(0..1000, 50, 7);
        assert_eq!(a.len(), 50);
        assert_eq!(a, reservoir_sample(0..1000, 50, 7));
        assert_ne!(a, reservoir_sample(0..1000, 50, 8));
        assert_eq!(reservoir_sample(0..10, 50, 7), (0..10).collect::<Vec<_>>());
    }
}
