//! Trained models on disk.
//!
//! A bundle is a directory holding one `PFMAT001` file per matrix, the configuration
//! snapshot `config.txt`, and `bundle.manifest`, which lists every component with its
//! dimensions and SHA-256 digest plus a content hash over all of them.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use planefinder_core::classifier::{FeatureScaler, KernelKind, MulticlassModel, SvmModel};
use planefinder_core::codebook::Codebook;
use planefinder_core::embedding::{EmbeddingModel, View};
use planefinder_core::features::DescriptorKind;
use planefinder_core::DMatrix;

use crate::config::PipelineConfig;
use crate::matrix_io;
use crate::{Error, Result};

pub const MANIFEST_NAME: &str = "bundle.manifest";
const FORMAT_LINE: &str = "format=planefinder-bundle 1";

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub config: PipelineConfig,
    /// Number of standard-plane classes.
    pub classes: usize,
    pub diagnosis_slots: usize,
    pub static_codebook: Codebook,
    pub spacetime_codebook: Codebook,
    pub embedding: EmbeddingModel,
    pub classifier: MulticlassModel,
}

struct Component {
    name: String,
    rows: usize,
    cols: usize,
    bytes: Vec<u8>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        v.extend(m.row(r).iter());
    }
    v
}

impl ModelBundle {
    /// Checks that codebook sizes, embedding dimensions and classifier inputs agree.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Bundle(m));
        self.embedding.validate()?;
        if self.static_codebook.kind() != DescriptorKind::Static || self.spacetime_codebook.kind() != DescriptorKind::Spacetime {
            return bad("codebook kinds are swapped".into());
        }
        if self.embedding.dim_x() != self.static_codebook.k() || self.embedding.dim_y() != self.spacetime_codebook.k() {
            return bad(format!(
                "embedding expects {}+{} inputs but codebooks have {}+{} words",
                self.embedding.dim_x(),
                self.embedding.dim_y(),
                self.static_codebook.k(),
                self.spacetime_codebook.k()
            ));
        }
        if self.classifier.classes() != self.classes {
            return bad(format!("classifier has {} machines for {} classes", self.classifier.classes(), self.classes));
        }
        if let Some(d) = self.classifier.dim() {
            if d != self.embedding.c {
                return bad(format!("classifier input {d} differs from code length {}", self.embedding.c));
            }
        }
        if self.embedding.c != self.config.embedding.c {
            return bad("code length differs from the configuration snapshot".into());
        }
        Ok(())
    }

    fn components(&self) -> Vec<Component> {
        let mut out = Vec::new();
        let mut push = |name: String, rows: usize, cols: usize, data: &[f64]| {
            out.push(Component { name, rows, cols, bytes: matrix_io::encode(rows, cols, data) });
        };
        for (name, cb) in [("codebook_static", &self.static_codebook), ("codebook_spacetime", &self.spacetime_codebook)] {
            push(format!("{name}.pfmat"), cb.k(), cb.dim(), cb.centroids());
        }
        let e = &self.embedding;
        push("embedding_wx.pfmat".into(), e.wx.nrows(), e.wx.ncols(), &row_major(&e.wx));
        push("embedding_wy.pfmat".into(), e.wy.nrows(), e.wy.ncols(), &row_major(&e.wy));
        push("embedding_mean_x.pfmat".into(), 1, e.mean_x.len(), &e.mean_x);
        push("embedding_mean_y.pfmat".into(), 1, e.mean_y.len(), &e.mean_y);
        push("embedding_correlations.pfmat".into(), 1, e.correlations.len(), &e.correlations);
        push("embedding_state.pfmat".into(), 1, 4, &[e.c as f64, e.epsilon_x, e.epsilon_y, e.train_n as f64]);
        match &self.classifier.scaler {
            Some(s) => push("scaler.pfmat".into(), 2, s.dim(), &[s.min.clone(), s.max.clone()].concat()),
            None => push("scaler.pfmat".into(), 0, 0, &[]),
        }
        for (k, m) in self.classifier.machines.iter().enumerate() {
            let dim = m.support_vectors.first().map_or(0, Vec::len);
            push(format!("svm_{k}_vectors.pfmat"), m.support_vectors.len(), dim, &m.support_vectors.concat());
            push(format!("svm_{k}_coefs.pfmat"), 1, m.dual_coefs.len(), &m.dual_coefs);
            push(format!("svm_{k}_params.pfmat"), 1, 4, &[m.bias, m.c, m.class_weights.0, m.class_weights.1]);
        }
        let cfg = self.config.to_text().into_bytes();
        out.push(Component { name: "config.txt".into(), rows: 0, cols: 0, bytes: cfg });
        out.sort_by(|a, b| a.name.cmp(&b.name));
        out
    }

    fn hash_components(components: &[Component]) -> String {
        let mut h = Sha256::new();
        for c in components {
            h.update(c.name.as_bytes());
            h.update([0u8]);
            h.update((c.bytes.len() as u64).to_le_bytes());
            h.update(&c.bytes);
        }
        hex(&h.finalize())
    }

    /// SHA-256 over every component in name order; identical models give identical hashes.
    pub fn content_hash(&self) -> String {
        Self::hash_components(&self.components())
    }

    fn manifest_text(&self, components: &[Component]) -> String {
        let mut s = format!("{FORMAT_LINE}\n");
        s.push_str(&format!("classes={}\n", self.classes));
        s.push_str(&format!("diagnosis_slots={}\n", self.diagnosis_slots));
        s.push_str(&format!("kernel={}\n", self.classifier.kernel.name()));
        s.push_str(&format!("view={}\n", self.config.embedding.view.name()));
        s.push_str(&format!(
            "dims=static:{}x{} spacetime:{}x{} code:{}\n",
            self.static_codebook.k(),
            self.static_codebook.dim(),
            self.spacetime_codebook.k(),
            self.spacetime_codebook.dim(),
            self.embedding.c
        ));
        for c in components {
            s.push_str(&format!("component={} {}x{} {}\n", c.name, c.rows, c.cols, sha256_hex(&c.bytes)));
        }
        s.push_str(&format!("hash={}\n", Self::hash_components(components)));
        s
    }

    /// Writes the bundle into `dir` (created if needed) and returns its content hash.
    pub fn save(&self, dir: &Path) -> Result<String> {
        self.validate()?;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let components = self.components();
        for c in &components {
            let p = dir.join(&c.name);
            fs::write(&p, &c.bytes).map_err(|e| Error::io(p, e))?;
        }
        let p = dir.join(MANIFEST_NAME);
        fs::write(&p, self.manifest_text(&components)).map_err(|e| Error::io(p, e))?;
        Ok(Self::hash_components(&components))
    }

    /// Reads the hash recorded in a bundle directory without loading the model.
    pub fn read_hash(dir: &Path) -> Result<String> {
        let p = dir.join(MANIFEST_NAME);
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        text.lines()
            .find_map(|l| l.strip_prefix("hash="))
            .map(str::to_string)
            .ok_or_else(|| Error::Bundle(format!("{} has no hash line", p.display())))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mp = dir.join(MANIFEST_NAME);
        let text = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
        if text.lines().next() != Some(FORMAT_LINE) {
            return Err(Error::Bundle(format!("{} is not a planefinder bundle manifest", mp.display())));
        }
        let field = |key: &str| -> Result<&str> {
            text.lines()
                .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .ok_or_else(|| Error::Bundle(format!("manifest lacks `{key}`")))
        };
        let classes: usize = field("classes")?.parse().map_err(|_| Error::Bundle("bad classes".into()))?;
        let diagnosis_slots: usize =
            field("diagnosis_slots")?.parse().map_err(|_| Error::Bundle("bad diagnosis_slots".into()))?;
        let kernel: KernelKind = field("kernel")?.parse()?;
        let view: View = field("view")?.parse()?;
        let recorded_hash = field("hash")?.to_string();

        let cfg_path = dir.join("config.txt");
        let config = PipelineConfig::load(&cfg_path)?;
        if config.embedding.view != view || config.svm.kernel != kernel {
            return Err(Error::Bundle("manifest and configuration snapshot disagree".into()));
        }
        let mat = |name: &str| matrix_io::read_rows(&dir.join(name));
        let codebook = |name: &str, kind| -> Result<Codebook> {
            let (k, d, data) = mat(name)?;
            Ok(Codebook::new(data, k, d, kind)?)
        };
        let static_codebook = codebook("codebook_static.pfmat", DescriptorKind::Static)?;
        let spacetime_codebook = codebook("codebook_spacetime.pfmat", DescriptorKind::Spacetime)?;
        let wx = matrix_io::read_matrix(&dir.join("embedding_wx.pfmat"))?;
        let wy = matrix_io::read_matrix(&dir.join("embedding_wy.pfmat"))?;
        let (_, _, mean_x) = mat("embedding_mean_x.pfmat")?;
        let (_, _, mean_y) = mat("embedding_mean_y.pfmat")?;
        let (_, _, correlations) = mat("embedding_correlations.pfmat")?;
        let (_, _, state) = mat("embedding_state.pfmat")?;
        if state.len() != 4 {
            return Err(Error::Bundle("embedding_state.pfmat must hold 4 values".into()));
        }
        let embedding = EmbeddingModel {
            wx,
            wy,
            mean_x,
            mean_y,
            c: state[0] as usize,
            epsilon_x: state[1],
            epsilon_y: state[2],
            train_n: state[3] as usize,
            correlations,
        };
        let (sr, sc, sdata) = mat("scaler.pfmat")?;
        let scaler = match sr {
            0 => None,
            2 => Some(FeatureScaler { min: sdata[..sc].to_vec(), max: sdata[sc..].to_vec() }),
            _ => return Err(Error::Bundle("scaler.pfmat must have 0 or 2 rows".into())),
        };
        let mut machines = Vec::with_capacity(classes);
        for k in 0..classes {
            let (m, d, sv) = mat(&format!("svm_{k}_vectors.pfmat"))?;
            let (_, _, dual_coefs) = mat(&format!("svm_{k}_coefs.pfmat"))?;
            let (_, _, p) = mat(&format!("svm_{k}_params.pfmat"))?;
            if dual_coefs.len() != m || p.len() != 4 {
                return Err(Error::Bundle(format!("machine {k} has inconsistent files")));
            }
            let support_vectors = if d == 0 { vec![Vec::new(); m] } else { sv.chunks_exact(d).map(<[f64]>::to_vec).collect() };
            machines.push(SvmModel {
                support_vectors,
                dual_coefs,
                bias: p[0],
                c: p[1],
                class_weights: (p[2], p[3]),
                kernel,
                scaler: None,
            });
        }
        let bundle = Self {
            config,
            classes,
            diagnosis_slots,
            static_codebook,
            spacetime_codebook,
            embedding,
            classifier: MulticlassModel { machines, scaler, kernel },
        };
        bundle.validate()?;
        let hash = bundle.content_hash();
        if hash != recorded_hash {
            return Err(Error::Bundle(format!("content hash {hash} does not match recorded {recorded_hash}")));
        }
        Ok(bundle)
    }
}
