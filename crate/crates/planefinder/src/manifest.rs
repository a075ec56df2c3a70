//! Tab-separated dataset manifests, one labeled candidate per line:
//!
//! ```text
//! volume path <TAB> candidate index <TAB> plane one-hot <TAB> diagnosis one-hot <TAB> normal|abnormal
//! vol00.vol4	40	1,0,0,0	0,1	normal
//! ```
//!
//! The last plane slot means "not a standard plane"; the last diagnosis slot means normal.
//! Volume paths are relative to the manifest's directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use planefinder_core::embedding::SemanticLabels;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    Normal,
    Abnormal,
}

impl Condition {
    pub const ALL: [Condition; 2] = [Condition::Abnormal, Condition::Normal];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Normal => "normal",
            Condition::Abnormal => "abnormal",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "normal" => Ok(Condition::Normal),
            "abnormal" => Ok(Condition::Abnormal),
            other => Err(format!("condition must be normal|abnormal, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    /// Index into [`DatasetManifest::volumes`].
    pub volume: usize,
    pub candidate: usize,
    pub labels: SemanticLabels,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeEntry {
    /// Path as written in the manifest.
    pub name: String,
    /// Path resolved against the manifest directory.
    pub path: PathBuf,
    pub condition: Condition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub path: PathBuf,
    pub volumes: Vec<VolumeEntry>,
    pub records: Vec<ManifestRecord>,
    /// Number of standard-plane classes (plane one-hot length minus one).
    pub classes: usize,
    pub diagnosis_slots: usize,
}

fn parse_one_hot(field: &str) -> Option<Vec<u8>> {
    field.split(',').map(|p| p.trim().parse::<u8>().ok()).collect()
}

impl DatasetManifest {
    /// Parses manifest text; `path` names the manifest and anchors relative volume paths.
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let err = |line: usize, message: String| Error::Manifest { path: path.to_path_buf(), line, message };
        let mut volumes: Vec<VolumeEntry> = Vec::new();
        let mut records = Vec::new();
        let mut slots: Option<(usize, usize)> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(err(line, format!("expected 5 tab-separated fields, got {}", fields.len())));
            }
            let candidate = fields[1].parse::<usize>().map_err(|_| err(line, format!("bad candidate index `{}`", fields[1])))?;
            let plane = parse_one_hot(fields[2]).ok_or_else(|| err(line, format!("bad plane one-hot `{}`", fields[2])))?;
            let diagnosis =
                parse_one_hot(fields[3]).ok_or_else(|| err(line, format!("bad diagnosis one-hot `{}`", fields[3])))?;
            let condition = fields[4].parse::<Condition>().map_err(|m| err(line, m))?;
            let shape = (plane.len(), diagnosis.len());
            if plane.len() < 2 || diagnosis.len() < 2 {
                return Err(err(line, "plane and diagnosis vectors need at least 2 slots".into()));
            }
            match slots {
                None => slots = Some(shape),
                Some(s) if s != shape => {
                    return Err(err(line, format!("label lengths {shape:?} differ from earlier records {s:?}")))
                }
                _ => {}
            }
            let labels = SemanticLabels::new(plane, diagnosis).map_err(|e| err(line, e.to_string()))?;
            let volume = match volumes.iter().position(|v| v.name == fields[0]) {
                Some(v) => {
                    if volumes[v].condition != condition {
                        return Err(err(line, format!("volume `{}` listed as both normal and abnormal", fields[0])));
                    }
                    v
                }
                None => {
                    volumes.push(VolumeEntry { name: fields[0].to_string(), path: base.join(fields[0]), condition });
                    volumes.len() - 1
                }
            };
            if records.iter().any(|r: &ManifestRecord| r.volume == volume && r.candidate == candidate) {
                return Err(err(line, format!("candidate {candidate} of `{}` listed twice", fields[0])));
            }
            records.push(ManifestRecord { volume, candidate, labels, line });
        }
        let (plane_slots, diagnosis_slots) = slots.ok_or_else(|| err(0, "manifest has no records".into()))?;
        let manifest = Self { path: path.to_path_buf(), volumes, records, classes: plane_slots - 1, diagnosis_slots };
        for (v, entry) in manifest.volumes.iter().enumerate() {
            for k in 0..manifest.classes {
                if manifest.ground_truth(v, k).is_empty() {
                    let line = manifest.records.iter().find(|r| r.volume == v).map_or(0, |r| r.line);
                    return Err(err(line, format!("volume `{}` has no ground-truth candidate for class {k}", entry.name)));
                }
            }
        }
        Ok(manifest)
    }

    /// Reads a manifest and checks that every referenced volume exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m = Self::parse(path, &text)?;
        for v in &m.volumes {
            if !v.path.is_file() {
                let line = m.records.iter().find(|r| m.volumes[r.volume].name == v.name).map_or(0, |r| r.line);
                return Err(Error::Manifest {
                    path: path.to_path_buf(),
                    line,
                    message: format!("volume `{}` not found at {}", v.name, v.path.display()),
                });
            }
        }
        Ok(m)
    }

    /// Candidate indices labeled as class `class` in volume `volume`, ascending.
    pub fn ground_truth(&self, volume: usize, class: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .records
            .iter()
            .filter(|r| r.volume == volume && r.labels.standard_class() == Some(class))
            .map(|r| r.candidate)
            .collect();
        v.sort_unstable();
        v
    }

    pub fn records_of(&self, volume: usize) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| r.volume == volume)
    }

    /// Fails when a record points past the candidate list.
    pub fn check_candidate_count(&self, count: usize) -> Result<()> {
        match self.records.iter().find(|r| r.candidate >= count) {
            Some(r) => Err(Error::Manifest {
                path: self.path.clone(),
                line: r.line,
                message: format!("candidate index {} >= candidate count {count}", r.candidate),
            }),
            None => Ok(()),
        }
    }

    pub fn to_text(&self) -> String {
        let join = |v: &[u8]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        for r in &self.records {
            let vol = &self.volumes[r.volume];
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                vol.name,
                r.candidate,
                join(r.labels.plane()),
                join(r.labels.diagnosis()),
                vol.condition
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "a.vol4\t3\t1,0,0\t0,1\tnormal\n\
                        a.vol4\t5\t0,1,0\t0,1\tnormal\n\
                        a.vol4\t6\t0,0,1\t0,1\tnormal\n\
                        b.vol4\t0\t0,1,0\t1,0\tabnormal\n\
                        b.vol4\t2\t1,0,0\t1,0\tabnormal\n";

    #[test]
    fn groups_by_volume() {
        let m = DatasetManifest::parse(Path::new("/data/m.tsv"), TEXT).unwrap();
        assert_eq!(m.classes, 2);
        assert_eq!(m.volumes.len(), 2);
        assert_eq!(m.volumes[1].path, Path::new("/data/b.vol4"));
        assert_eq!(m.ground_truth(0, 1), vec![5]);
        assert_eq!(m.ground_truth(1, 0), vec![2]);
        assert!(m.check_candidate_count(7).is_ok());
        assert!(m.check_candidate_count(6).is_err());
        assert_eq!(DatasetManifest::parse(Path::new("/data/m.tsv"), &m.to_text()).unwrap(), m);
    }

    #[test]
    fn rejects_inconsistent_records() {
        let p = Path::new("m.tsv");
        let missing_class = "a.vol4\t3\t1,0,0\t0,1\tnormal\n";
        assert!(matches!(DatasetManifest::parse(p, missing_class), Err(Error::Manifest { .. })));
        let mixed = TEXT.replace("b.vol4\t2\t1,0,0\t1,0\tabnormal", "b.vol4\t2\t1,0,0\t1,0\tnormal");
        assert!(DatasetManifest::parse(p, &mixed).is_err());
        let two_hot = TEXT.replace("1,0,0\t0,1", "1,1,0\t0,1");
        assert!(DatasetManifest::parse(p, &two_hot).is_err());
        let dup = format!("{TEXT}a.vol4\t3\t0,0,1\t0,1\tnormal\n");
        assert!(matches!(DatasetManifest::parse(p, &dup), Err(Error::Manifest { line: 6, .. })));
    }

    #[test]
    fn load_names_missing_volume() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.tsv");
        fs::write(&p, TEXT).unwrap();
        fs::write(dir.path().join("a.vol4"), "").unwrap();
        match DatasetManifest::load(&p) {
            Err(Error::Manifest { line, message, .. }) => {
                assert_eq!(line, 4);
                assert!(message.contains("b.vol4"));
            }
            other => panic!("expected a manifest error, got {other:?}"),
        }
    }
}
