use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::source::Split;
use super::{DifferenceOp, SceneSpec};

pub const GENERATOR_VERSION: &str = concat!("querymod-synth/", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSizes {
    pub dev: usize,
    pub eval: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleRecord {
    pub id: String,
    pub ops: Vec<DifferenceOp>,
    pub text: String,
    pub labels_a: Vec<u8>,
    pub labels_b: Vec<u8>,
    /// Relative to the manifest's directory.
    pub audio_a: String,
    pub audio_b: String,
    pub seed: u64,
}

impl ExampleRecord {
    /// Split encoded in the id prefix (`dev_…` / `eval_…`).
    pub fn split(&self) -> Option<Split> {
        if self.id.starts_with("dev_") {
            Some(Split::Dev)
        } else if self.id.starts_with("eval_") {
            Some(Split::Eval)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub scene: SceneSpec,
    pub splits: SplitSizes,
    pub clip_seconds: f64,
    pub sample_rate_hz: u32,
    pub examples: Vec<ExampleRecord>,
    pub generator_version: String,
    pub master_seed: u64,
}

impl Manifest {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Atomic write (temp file, then rename).
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn examples_in(&self, split: Split) -> impl Iterator<Item = &ExampleRecord> {
        self.examples.iter().filter(move |e| e.split() == Some(split))
    }

    pub fn get(&self, id: &str) -> Option<&ExampleRecord> {
        self.examples.iter().find(|e| e.id == id)
    }

    /// Schema and invariant checks that need no filesystem access.
    pub fn validate_schema(&self) -> Result<()> {
        self.scene.validate()?;
        let scene = self.scene.name;
        if self.clip_seconds.is_nan() || self.clip_seconds <= 0.0 || self.sample_rate_hz == 0 {
            return Err(Error::Schema("clip_seconds and sample_rate_hz must be positive".into()));
        }
        let mut seen = HashSet::new();
        let (mut n_dev, mut n_eval) = (0, 0);
        for ex in &self.examples {
            if !seen.insert(ex.id.as_str()) {
                return Err(Error::DuplicateId(ex.id.clone()));
            }
            match ex.split() {
                Some(Split::Dev) => n_dev += 1,
                Some(Split::Eval) => n_eval += 1,
                None => return Err(Error::Schema(format!("id `{}` has no dev_/eval_ prefix", ex.id))),
            }
            if ex.ops.is_empty() || ex.ops.len() > 2 {
                return Err(Error::Schema(format!("example `{}` has {} ops; expected 1 or 2", ex.id, ex.ops.len())));
            }
            if ex.ops.len() == 2 && ex.ops[0].class_id == ex.ops[1].class_id {
                return Err(Error::Schema(format!("example `{}` repeats class {}", ex.id, ex.ops[0].class_id)));
            }
            for op in &ex.ops {
                op.check_scene(scene).map_err(|e| Error::Schema(format!("example `{}`: {e}", ex.id)))?;
                if !op.magnitude_db.is_finite() {
                    return Err(Error::Schema(format!("example `{}` has a non-finite magnitude", ex.id)));
                }
            }
            let (va, vb) = super::labels_for(scene, &ex.ops);
            if ex.labels_a != va || ex.labels_b != vb {
                return Err(Error::Schema(format!("example `{}` labels disagree with its ops", ex.id)));
            }
            if ex.text != super::describe(&ex.ops)? {
                return Err(Error::Schema(format!("example `{}` text disagrees with its ops", ex.id)));
            }
        }
        if n_dev != self.splits.dev || n_eval != self.splits.eval {
            return Err(Error::Schema(format!(
                "split sizes say dev={} eval={}, found dev={n_dev} eval={n_eval}",
                self.splits.dev, self.splits.eval
            )));
        }
        Ok(())
    }
}

/// A manifest together with the directory its audio paths resolve against.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedManifest {
    pub manifest: Manifest,
    pub root: PathBuf,
}

impl LoadedManifest {
    pub fn audio_path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }
}

/// Parses and fully validates a manifest, including audio file existence.
pub fn load_manifest(path: &Path) -> Result<LoadedManifest> {
    let text = std::fs::read_to_string(path)?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Schema(e.to_string()))?;
    manifest.validate_schema()?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    for ex in &manifest.examples {
        for rel in [&ex.audio_a, &ex.audio_b] {
            let p = root.join(rel);
            if !p.is_file() {
                return Err(Error::MissingAudio { id: ex.id.clone(), path: p });
            }
        }
    }
    Ok(LoadedManifest { manifest, root })
}
