use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seed::{derive_seed, rng_from_seed, Rng};

use super::difference::{apply_difference, crop_background, DiffKind, DifferenceOp, SourceBank};
use super::manifest::{ExampleRecord, Manifest, SplitSizes, GENERATOR_VERSION};
use super::source::Split;
use super::wav::write_wav;
use super::{describe, Scene};

/// Rendering parameters for a corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub clip_seconds: f64,
    pub sample_rate_hz: u32,
    pub event_seconds: f64,
    pub background_source_seconds: f64,
    /// Inc/DecBg: layer level below the base clip, dB.
    pub bg_gain_db: (f64, f64),
    /// Add/RemoveEvent SNR, also the louder layer's SNR in Inc/DecEvent.
    pub event_snr_db: (f64, f64),
    /// Inc/DecEvent attenuation of the quieter layer, dB.
    pub event_atten_db: (f64, f64),
    pub p_two_ops: f64,
}

impl SynthConfig {
    /// 10 s clips at 16 kHz.
    pub fn desk() -> Self {
        Self {
            clip_seconds: 10.0,
            sample_rate_hz: 16_000,
            event_seconds: 2.5,
            background_source_seconds: 20.0,
            bg_gain_db: (3.0, 9.0),
            event_snr_db: (-3.0, 9.0),
            event_atten_db: (4.0, 10.0),
            p_two_ops: 0.5,
        }
    }

    /// 2 s clips at 8 kHz.
    pub fn test_preset() -> Self {
        Self {
            clip_seconds: 2.0,
            sample_rate_hz: 8_000,
            event_seconds: 0.6,
            background_source_seconds: 4.0,
            ..Self::desk()
        }
    }

    pub fn clip_samples(&self) -> usize {
        (self.clip_seconds * self.sample_rate_hz as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let range_ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if self.clip_seconds.is_nan() || self.clip_seconds <= 0.0 {
            return Err(invalid("clip_seconds must be positive"));
        }
        if !(self.event_seconds > 0.0 && self.event_seconds <= self.clip_seconds) {
            return Err(invalid(format!(
                "event_seconds {} must be in (0, clip_seconds={}]",
                self.event_seconds, self.clip_seconds
            )));
        }
        if self.background_source_seconds < self.clip_seconds {
            return Err(invalid("background_source_seconds must be at least clip_seconds"));
        }
        if !(range_ok(self.bg_gain_db) && range_ok(self.event_snr_db) && range_ok(self.event_atten_db)) {
            return Err(invalid("magnitude ranges need finite lo <= hi"));
        }
        if !(0.0..=1.0).contains(&self.p_two_ops) {
            return Err(invalid("p_two_ops must be a probability"));
        }
        Ok(())
    }

    pub fn magnitude_range(&self, kind: DiffKind) -> (f64, f64) {
        match kind {
            DiffKind::IncBg | DiffKind::DecBg => self.bg_gain_db,
            DiffKind::AddEvent | DiffKind::RemoveEvent => self.event_snr_db,
            DiffKind::IncEvent | DiffKind::DecEvent => self.event_atten_db,
        }
    }

    pub fn source_bank(&self, scene: Scene, split: Split) -> SourceBank {
        SourceBank {
            scene,
            sample_rate_hz: self.sample_rate_hz,
            split,
            event_seconds: self.event_seconds,
            background_seconds: self.background_source_seconds,
            event_snr_db: self.event_snr_db,
        }
    }
}

/// One rendered row `(a, b, t, v, w)` plus provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct PairExample {
    pub id: String,
    pub split: Split,
    pub audio_a: Vec<f64>,
    pub audio_b: Vec<f64>,
    pub text: String,
    pub labels_a: Vec<u8>,
    pub labels_b: Vec<u8>,
    pub ops: Vec<DifferenceOp>,
    pub seed: u64,
}

pub fn example_id(split: Split, index: usize) -> String {
    format!("{}_{index:05}", split.name())
}

pub fn example_seed(master_seed: u64, split: Split, index: usize) -> u64 {
    derive_seed(master_seed, split.name(), index as u64)
}

/// Draws 1 or 2 operations on distinct classes: class uniform over the
/// scene, kind uniform among those valid for the class, magnitude uniform
/// in the configured range.
pub fn sample_ops(scene: Scene, cfg: &SynthConfig, rng: &mut Rng) -> Vec<DifferenceOp> {
    let n = if rng.gen_bool(cfg.p_two_ops) { 2 } else { 1 };
    let classes = scene.classes();
    rand::seq::index::sample(rng, classes.len(), n)
        .into_iter()
        .map(|i| {
            let class = classes[i];
            let kind = if class.is_background() {
                *[DiffKind::IncBg, DiffKind::DecBg].choose(rng).expect("nonempty")
            } else {
                *DiffKind::EVENT_KINDS.choose(rng).expect("nonempty")
            };
            let (lo, hi) = cfg.magnitude_range(kind);
            DifferenceOp::new(kind, class, rng.gen_range(lo..=hi))
        })
        .collect()
}

/// Multi-hot presence labels `(v, w)` implied by a list of operations.
pub fn labels_for(scene: Scene, ops: &[DifferenceOp]) -> (Vec<u8>, Vec<u8>) {
    let mut a = vec![0u8; 5];
    let mut b = vec![0u8; 5];
    a[0] = 1;
    b[0] = 1;
    for op in ops {
        let Some(i) = scene.label_index(op.class_id) else { continue };
        match op.kind {
            DiffKind::IncBg | DiffKind::DecBg => {}
            DiffKind::AddEvent => b[i] = 1,
            DiffKind::RemoveEvent => a[i] = 1,
            DiffKind::IncEvent | DiffKind::DecEvent => {
                a[i] = 1;
                b[i] = 1;
            }
        }
    }
    (a, b)
}

/// Renders example `index` of `split`. Depends only on the arguments, never
/// on which other examples were rendered or in what order.
pub fn render_example(
    scene: Scene,
    cfg: &SynthConfig,
    master_seed: u64,
    split: Split,
    index: usize,
) -> Result<PairExample> {
    let seed = example_seed(master_seed, split, index);
    let mut rng = rng_from_seed(seed);
    let bank = cfg.source_bank(scene, split);
    let background = bank.background(&mut rng)?;
    let (mut a, mut b) = crop_background(&background, cfg.clip_samples(), &mut rng)?;
    let ops = sample_ops(scene, cfg, &mut rng);
    for op in &ops {
        (a, b) = apply_difference(&a, &b, op, &bank, &mut rng)?;
    }
    let (labels_a, labels_b) = labels_for(scene, &ops);
    Ok(PairExample {
        id: example_id(split, index),
        split,
        audio_a: a,
        audio_b: b,
        text: describe(&ops)?,
        labels_a,
        labels_b,
        ops,
        seed,
    })
}

/// Renders every example, writes `audio/<id>_{a,b}.wav` under `out_dir`
/// and a `manifest.json` next to it.
pub fn build_dataset(
    scene: Scene,
    n_dev: usize,
    n_eval: usize,
    cfg: &SynthConfig,
    master_seed: u64,
    out_dir: &Path,
) -> Result<Manifest> {
    if n_dev == 0 || n_eval == 0 {
        return Err(invalid(format!("split sizes must be positive, got dev={n_dev} eval={n_eval}")));
    }
    cfg.validate()?;
    let audio_dir = out_dir.join("audio");
    std::fs::create_dir_all(&audio_dir)?;

    let jobs: Vec<(Split, usize)> = (0..n_dev)
        .map(|i| (Split::Dev, i))
        .chain((0..n_eval).map(|i| (Split::Eval, i)))
        .collect();
    let examples = jobs
        .par_iter()
        .map(|&(split, i)| {
            let ex = render_example(scene, cfg, master_seed, split, i)?;
            let rel_a = format!("audio/{}_a.wav", ex.id);
            let rel_b = format!("audio/{}_b.wav", ex.id);
            write_wav(&out_dir.join(&rel_a), &ex.audio_a, cfg.sample_rate_hz)?;
            write_wav(&out_dir.join(&rel_b), &ex.audio_b, cfg.sample_rate_hz)?;
            Ok(ExampleRecord {
                id: ex.id,
                ops: ex.ops,
                text: ex.text,
                labels_a: ex.labels_a,
                labels_b: ex.labels_b,
                audio_a: rel_a,
                audio_b: rel_b,
                seed: ex.seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = Manifest {
        scene: scene.spec(),
        splits: SplitSizes { dev: n_dev, eval: n_eval },
        clip_seconds: cfg.clip_seconds,
        sample_rate_hz: cfg.sample_rate_hz,
        examples,
        generator_version: GENERATOR_VERSION.to_string(),
        master_seed,
    };
    manifest.save(&out_dir.join(super::MANIFEST_FILE))?;
    Ok(manifest)
}
