//! Pipeline configuration as a plain `key=value` file.
//!
//! Every key is optional; omitted keys keep their defaults and unknown keys are rejected.
//! `#` starts a comment. [`PipelineConfig::to_text`] writes the canonical form that is
//! stored in model bundles and hashed.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use planefinder_core::classifier::{ClassWeights, KernelKind, SvmConfig};
use planefinder_core::codebook::KMeansConfig;
use planefinder_core::embedding::{Epsilon, View};
use planefinder_core::features::{SpaceTimeConfig, StaticConfig};
use planefinder_core::smoothing::SmoothingConfig;
use planefinder_core::volume::CandidateConfig;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CodebookSettings {
    pub k_static: usize,
    pub k_spacetime: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Descriptors kept per kind for vocabulary training.
    pub pool_cap: usize,
    pub pool_seed: u64,
}

impl Default for CodebookSettings {
    fn default() -> Self {
        Self { k_static: 5000, k_spacetime: 1000, seed: 0, max_iter: 100, pool_cap: 200_000, pool_seed: 0 }
    }
}

impl CodebookSettings {
    pub fn kmeans_static(&self) -> KMeansConfig {
        KMeansConfig { k: self.k_static, seed: self.seed, max_iter: self.max_iter }
    }

    pub fn kmeans_spacetime(&self) -> KMeansConfig {
        KMeansConfig { k: self.k_spacetime, seed: self.seed.wrapping_add(1), max_iter: self.max_iter }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSettings {
    pub c: usize,
    pub epsilon: Epsilon,
    pub view: View,
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        Self { c: 32, epsilon: Epsilon::default(), view: View::Fused }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub candidates: CandidateConfig,
    pub smoothing_enabled: bool,
    pub smoothing: SmoothingConfig,
    pub static_features: StaticConfig,
    pub spacetime: SpaceTimeConfig,
    pub codebook: CodebookSettings,
    pub embedding: EmbeddingSettings,
    pub svm: SvmConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            candidates: CandidateConfig::default(),
            smoothing_enabled: true,
            smoothing: SmoothingConfig::default(),
            static_features: StaticConfig::default(),
            spacetime: SpaceTimeConfig::default(),
            codebook: CodebookSettings::default(),
            embedding: EmbeddingSettings::default(),
            svm: SvmConfig::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse::<T>().map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("bad value `{value}` for `{key}` (true|false)"))),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = value.split_whitespace().map(|p| parse(key, p)).collect::<Result<_>>()?;
    if v.is_empty() {
        return Err(Error::Config(format!("`{key}` needs at least one value")));
    }
    Ok(v)
}

fn parse_epsilon(value: &str) -> Result<Epsilon> {
    let bad = || Error::Config(format!("bad epsilon `{value}` (relative:<f> or absolute:<f>)"));
    let (kind, num) = value.split_once(':').ok_or_else(bad)?;
    let num: f64 = num.trim().parse().map_err(|_| bad())?;
    if !(num >= 0.0) || !num.is_finite() {
        return Err(bad());
    }
    match kind.trim() {
        "relative" => Ok(Epsilon::Relative(num)),
        "absolute" => Ok(Epsilon::Absolute(num)),
        _ => Err(bad()),
    }
}

fn parse_weights(value: &str) -> Result<ClassWeights> {
    if value == "balanced" {
        return Ok(ClassWeights::Balanced);
    }
    let bad = || Error::Config(format!("bad svm.weights `{value}` (balanced or fixed:<pos>,<neg>)"));
    let rest = value.strip_prefix("fixed:").ok_or_else(bad)?;
    let (p, n) = rest.split_once(',').ok_or_else(bad)?;
    let (positive, negative): (f64, f64) = (p.trim().parse().map_err(|_| bad())?, n.trim().parse().map_err(|_| bad())?);
    if !(positive > 0.0 && negative > 0.0) {
        return Err(bad());
    }
    Ok(ClassWeights::Fixed { positive, negative })
}

fn list_text(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ")
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut beta0 = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got `{line}`", lineno + 1)))?;
            cfg.set(key.trim(), value.trim(), &mut beta0)?;
        }
        // beta0 follows lambda unless given explicitly
        cfg.smoothing.beta0 = beta0.unwrap_or(2.0 * cfg.smoothing.lambda);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn set(&mut self, key: &str, v: &str, beta0: &mut Option<f64>) -> Result<()> {
        match key {
            "candidates.count" => self.candidates.count = parse(key, v)?,
            "candidates.seed" => self.candidates.seed = parse(key, v)?,
            "candidates.offsets" => self.candidates.offsets = parse(key, v)?,
            "candidates.offset_step" => self.candidates.offset_step = parse(key, v)?,
            "candidates.width" => self.candidates.width = parse(key, v)?,
            "candidates.height" => self.candidates.height = parse(key, v)?,
            "candidates.pixel_step" => self.candidates.pixel_step = parse(key, v)?,
            "smoothing.enabled" => self.smoothing_enabled = parse_bool(key, v)?,
            "smoothing.lambda" => self.smoothing.lambda = parse(key, v)?,
            "smoothing.kappa" => self.smoothing.kappa = parse(key, v)?,
            "smoothing.beta0" => *beta0 = Some(parse(key, v)?),
            "smoothing.beta_max" => self.smoothing.beta_max = parse(key, v)?,
            "static.sigma0" => self.static_features.sigma0 = parse(key, v)?,
            "static.scales_per_octave" => self.static_features.scales_per_octave = parse(key, v)?,
            "static.octaves" => self.static_features.octaves = parse(key, v)?,
            "static.contrast_threshold" => self.static_features.contrast_threshold = parse(key, v)?,
            "static.edge_ratio" => self.static_features.edge_ratio = parse(key, v)?,
            "static.input_sigma" => self.static_features.input_sigma = parse(key, v)?,
            "static.min_size" => self.static_features.min_size = parse(key, v)?,
            "spacetime.spatial_scales" => self.spacetime.spatial_scales = parse_list(key, v)?,
            "spacetime.temporal_scales" => self.spacetime.temporal_scales = parse_list(key, v)?,
            "spacetime.integration_factor" => self.spacetime.integration_factor = parse(key, v)?,
            "spacetime.k" => self.spacetime.k = parse(key, v)?,
            "spacetime.threshold_std" => self.spacetime.threshold_std = parse(key, v)?,
            "spacetime.min_frames" => self.spacetime.min_frames = parse(key, v)?,
            "spacetime.border" => self.spacetime.border = parse(key, v)?,
            "codebook.k_static" => self.codebook.k_static = parse(key, v)?,
            "codebook.k_spacetime" => self.codebook.k_spacetime = parse(key, v)?,
            "codebook.seed" => self.codebook.seed = parse(key, v)?,
            "codebook.max_iter" => self.codebook.max_iter = parse(key, v)?,
            "codebook.pool_cap" => self.codebook.pool_cap = parse(key, v)?,
            "codebook.pool_seed" => self.codebook.pool_seed = parse(key, v)?,
            "embedding.c" => self.embedding.c = parse(key, v)?,
            "embedding.epsilon" => self.embedding.epsilon = parse_epsilon(v)?,
            "embedding.view" => self.embedding.view = v.parse::<View>().map_err(|e| Error::Config(e.to_string()))?,
            "svm.c" => self.svm.c = parse(key, v)?,
            "svm.kernel" => self.svm.kernel = v.parse::<KernelKind>().map_err(|e| Error::Config(e.to_string()))?,
            "svm.tolerance" => self.svm.tolerance = parse(key, v)?,
            "svm.max_iter" => self.svm.max_iter = parse(key, v)?,
            "svm.weights" => self.svm.weights = parse_weights(v)?,
            "svm.scale" => self.svm.scale = parse_bool(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.smoothing_enabled {
            self.smoothing.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.codebook.k_static == 0 || self.codebook.k_spacetime == 0 {
            return fail("codebook sizes must be >= 1");
        }
        if self.codebook.pool_cap == 0 || self.codebook.max_iter == 0 {
            return fail("codebook.pool_cap and codebook.max_iter must be >= 1");
        }
        if self.embedding.c == 0 {
            return fail("embedding.c must be >= 1");
        }
        if !(self.svm.c > 0.0) || !(self.svm.tolerance > 0.0) {
            return fail("svm.c and svm.tolerance must be > 0");
        }
        if self.svm.kernel == KernelKind::Hik && !self.svm.scale {
            return fail("svm.kernel=hik needs svm.scale=true because embedded codes are signed");
        }
        if self.spacetime.spatial_scales.iter().chain(&self.spacetime.temporal_scales).any(|s| !(*s > 0.0)) {
            return fail("spacetime scales must be > 0");
        }
        Ok(())
    }

    /// Canonical text with every key, in a fixed order.
    pub fn to_text(&self) -> String {
        let c = &self.candidates;
        let s = &self.smoothing;
        let st = &self.static_features;
        let t = &self.spacetime;
        let cb = &self.codebook;
        let e = &self.embedding;
        let v = &self.svm;
        let eps = match e.epsilon {
            Epsilon::Relative(x) => format!("relative:{x:?}"),
            Epsilon::Absolute(x) => format!("absolute:{x:?}"),
        };
        let weights = match v.weights {
            ClassWeights::Balanced => "balanced".to_string(),
            ClassWeights::Fixed { positive, negative } => format!("fixed:{positive:?},{negative:?}"),
        };
        let mut out = String::new();
        let mut kv = |k: &str, val: String| {
            let _ = writeln!(out, "{k}={val}");
        };
        kv("candidates.count", c.count.to_string());
        kv("candidates.seed", c.seed.to_string());
        kv("candidates.offsets", c.offsets.to_string());
        kv("candidates.offset_step", format!("{:?}", c.offset_step));
        kv("candidates.width", c.width.to_string());
        kv("candidates.height", c.height.to_string());
        kv("candidates.pixel_step", format!("{:?}", c.pixel_step));
        kv("smoothing.enabled", self.smoothing_enabled.to_string());
        kv("smoothing.lambda", format!("{:?}", s.lambda));
        kv("smoothing.kappa", format!("{:?}", s.kappa));
        kv("smoothing.beta0", format!("{:?}", s.beta0));
        kv("smoothing.beta_max", format!("{:?}", s.beta_max));
        kv("static.sigma0", format!("{:?}", st.sigma0));
        kv("static.scales_per_octave", st.scales_per_octave.to_string());
        kv("static.octaves", st.octaves.to_string());
        kv("static.contrast_threshold", format!("{:?}", st.contrast_threshold));
        kv("static.edge_ratio", format!("{:?}", st.edge_ratio));
        kv("static.input_sigma", format!("{:?}", st.input_sigma));
        kv("static.min_size", st.min_size.to_string());
        kv("spacetime.spatial_scales", list_text(&t.spatial_scales));
        kv("spacetime.temporal_scales", list_text(&t.temporal_scales));
        kv("spacetime.integration_factor", format!("{:?}", t.integration_factor));
        kv("spacetime.k", format!("{:?}", t.k));
        kv("spacetime.threshold_std", format!("{:?}", t.threshold_std));
        kv("spacetime.min_frames", t.min_frames.to_string());
        kv("spacetime.border", t.border.to_string());
        kv("codebook.k_static", cb.k_static.to_string());
        kv("codebook.k_spacetime", cb.k_spacetime.to_string());
        kv("codebook.seed", cb.seed.to_string());
        kv("codebook.max_iter", cb.max_iter.to_string());
        kv("codebook.pool_cap", cb.pool_cap.to_string());
        kv("codebook.pool_seed", cb.pool_seed.to_string());
        kv("embedding.c", e.c.to_string());
        kv("embedding.epsilon", eps);
        kv("embedding.view", e.view.name().to_string());
        kv("svm.c", format!("{:?}", v.c));
        kv("svm.kernel", v.kernel.name().to_string());
        kv("svm.tolerance", format!("{:?}", v.tolerance));
        kv("svm.max_iter", v.max_iter.to_string());
        kv("svm.weights", weights);
        kv("svm.scale", v.scale.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.smoothing.beta0, 0.04);
        let text = cfg.to_text();
        assert_eq!(PipelineConfig::parse(&text).unwrap(), cfg);
        assert_eq!(PipelineConfig::parse("").unwrap(), cfg);
    }

    #[test]
    fn overrides_and_comments() {
        let cfg = PipelineConfig::parse(
            "# desk scale\ncodebook.k_static = 64\nembedding.view=static # inline\nsmoothing.lambda=0.05\n\
             embedding.epsilon=absolute:0\nsvm.weights=fixed:2,1\nspacetime.spatial_scales=1.5 3\n",
        )
        .unwrap();
        assert_eq!(cfg.codebook.k_static, 64);
        assert_eq!(cfg.embedding.view, View::Static);
        assert_eq!(cfg.smoothing.beta0, 0.1);
        assert_eq!(cfg.embedding.epsilon, Epsilon::Absolute(0.0));
        assert_eq!(cfg.svm.weights, ClassWeights::Fixed { positive: 2.0, negative: 1.0 });
        assert_eq!(cfg.spacetime.spatial_scales, vec![1.5, 3.0]);
        assert_eq!(PipelineConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(matches!(PipelineConfig::parse("codebook.k=5"), Err(Error::Config(_))));
        assert!(matches!(PipelineConfig::parse("svm.c=-1"), Err(Error::Config(_))));
        assert!(matches!(PipelineConfig::parse("embedding.view=both"), Err(Error::Config(_))));
        assert!(matches!(PipelineConfig::parse("svm.scale=false"), Err(Error::Config(_))));
        assert!(matches!(PipelineConfig::parse("just words"), Err(Error::Config(_))));
    }
}
