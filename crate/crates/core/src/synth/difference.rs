//! The six paired-audio difference operations.
//!
//! Each "decrease/remove" kind is literally its "increase/add" partner
//! applied with the two clips exchanged, so the swap symmetry holds sample
//! for sample under identical randomness.

use std::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dsp::{rms, snr_gain};
use crate::error::{invalid, shape, Result};
use crate::seed::Rng;

use super::source::{synthesize_clip, SourceClip, Split};
use super::{Scene, SoundClass};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiffKind {
    IncBg,
    DecBg,
    AddEvent,
    RemoveEvent,
    IncEvent,
    DecEvent,
}

impl DiffKind {
    pub const ALL: [DiffKind; 6] = [
        DiffKind::IncBg,
        DiffKind::DecBg,
        DiffKind::AddEvent,
        DiffKind::RemoveEvent,
        DiffKind::IncEvent,
        DiffKind::DecEvent,
    ];
    pub const EVENT_KINDS: [DiffKind; 4] =
        [DiffKind::AddEvent, DiffKind::RemoveEvent, DiffKind::IncEvent, DiffKind::DecEvent];

    pub fn is_background(self) -> bool {
        matches!(self, DiffKind::IncBg | DiffKind::DecBg)
    }

    /// Volume changes, as opposed to presence changes.
    pub fn is_volume(self) -> bool {
        !matches!(self, DiffKind::AddEvent | DiffKind::RemoveEvent)
    }
}

/// One difference between clip `a` and clip `b`. `magnitude_db` is the
/// background layer level below the base (Inc/DecBg), the event SNR
/// (Add/RemoveEvent), or the attenuation of the quieter event (Inc/DecEvent).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DifferenceOp {
    pub kind: DiffKind,
    pub class_id: SoundClass,
    pub magnitude_db: f64,
}

impl DifferenceOp {
    pub fn new(kind: DiffKind, class_id: SoundClass, magnitude_db: f64) -> Self {
        Self { kind, class_id, magnitude_db }
    }

    /// Background kinds need the scene background; event kinds need one of
    /// the scene's event classes.
    pub fn check_scene(&self, scene: Scene) -> Result<()> {
        let ok = if self.kind.is_background() {
            self.class_id == scene.background()
        } else {
            scene.events().contains(&self.class_id)
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!(
                "{:?} on `{}` is not valid in the {} scene",
                self.kind,
                self.class_id,
                scene.name()
            )))
        }
    }
}

impl fmt::Display for DifferenceOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}({}, {:.2} dB)", self.kind, self.class_id, self.magnitude_db)
    }
}

/// Renders fresh source material for difference operations.
#[derive(Clone, Debug)]
pub struct SourceBank {
    pub scene: Scene,
    pub sample_rate_hz: u32,
    pub split: Split,
    pub event_seconds: f64,
    pub background_seconds: f64,
    /// Range the louder layer's SNR is drawn from in Inc/DecEvent.
    pub event_snr_db: (f64, f64),
}

impl SourceBank {
    fn fresh_seed(&self, rng: &mut Rng) -> u64 {
        self.split.tag_seed(rng.gen())
    }

    pub fn background(&self, rng: &mut Rng) -> Result<SourceClip> {
        let seed = self.fresh_seed(rng);
        synthesize_clip(self.scene.background(), self.background_seconds, self.sample_rate_hz, seed, self.split)
    }

    pub fn event(&self, class: SoundClass, rng: &mut Rng) -> Result<SourceClip> {
        let seed = self.fresh_seed(rng);
        synthesize_clip(class, self.event_seconds, self.sample_rate_hz, seed, self.split)
    }
}

/// Cuts two `len`-sample windows from `clip` at independent uniform offsets.
pub fn crop_background(clip: &SourceClip, len: usize, rng: &mut Rng) -> Result<(Vec<f64>, Vec<f64>)> {
    let max_off = crop_range(clip, len)?;
    let oa = rng.gen_range(0..=max_off);
    let ob = rng.gen_range(0..=max_off);
    Ok((clip.samples[oa..oa + len].to_vec(), clip.samples[ob..ob + len].to_vec()))
}

fn crop_range(clip: &SourceClip, len: usize) -> Result<usize> {
    if len == 0 || clip.samples.len() < len {
        return Err(invalid(format!(
            "cannot crop {len} samples from a {}-sample clip",
            clip.samples.len()
        )));
    }
    Ok(clip.samples.len() - len)
}

fn crop_one(clip: &SourceClip, len: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    let off = rng.gen_range(0..=crop_range(clip, len)?);
    Ok(clip.samples[off..off + len].to_vec())
}

/// Scaled material injected into one clip at `onset`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub onset: usize,
    pub samples: Vec<f64>,
}

impl Layer {
    fn add_to(&self, x: &mut [f64]) {
        for (o, v) in x[self.onset..].iter_mut().zip(&self.samples) {
            *o += v;
        }
    }
}

/// What an operation adds to each of the two clips, before mixing.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct DifferenceLayers {
    pub alpha: Option<Layer>,
    pub beta: Option<Layer>,
}

impl DifferenceLayers {
    fn swapped(self) -> Self {
        Self { alpha: self.beta, beta: self.alpha }
    }
}

/// Computes the layers an operation injects into `alpha` and `beta`.
pub fn difference_layers(
    alpha: &[f64],
    beta: &[f64],
    op: &DifferenceOp,
    bank: &SourceBank,
    rng: &mut Rng,
) -> Result<DifferenceLayers> {
    if alpha.len() != beta.len() {
        return Err(shape(format!("clips differ in length: {} vs {}", alpha.len(), beta.len())));
    }
    op.check_scene(bank.scene)?;
    match op.kind {
        DiffKind::IncBg => louder_background(beta, op, bank, rng),
        DiffKind::DecBg => Ok(louder_background(alpha, op, bank, rng)?.swapped()),
        DiffKind::AddEvent => added_event(beta, op, bank, rng),
        DiffKind::RemoveEvent => Ok(added_event(alpha, op, bank, rng)?.swapped()),
        DiffKind::IncEvent => louder_event(beta, op, bank, rng),
        DiffKind::DecEvent => Ok(louder_event(alpha, op, bank, rng)?.swapped()),
    }
}

/// Applies `op` and returns the mixed pair, hard-clipped to [-1, 1].
pub fn apply_difference(
    alpha: &[f64],
    beta: &[f64],
    op: &DifferenceOp,
    bank: &SourceBank,
    rng: &mut Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let layers = difference_layers(alpha, beta, op, bank, rng)?;
    let (mut a, mut b) = (alpha.to_vec(), beta.to_vec());
    if let Some(l) = &layers.alpha {
        l.add_to(&mut a);
    }
    if let Some(l) = &layers.beta {
        l.add_to(&mut b);
    }
    clip_unit(&mut a);
    clip_unit(&mut b);
    Ok((a, b))
}

pub(crate) fn clip_unit(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
}

/// (a): a fresh background window, `magnitude_db` below `target`, onto `target`.
fn louder_background(target: &[f64], op: &DifferenceOp, bank: &SourceBank, rng: &mut Rng) -> Result<DifferenceLayers> {
    let src = bank.background(rng)?;
    let mut layer = crop_one(&src, target.len(), rng)?;
    let g = snr_gain(target, &layer, op.magnitude_db)?;
    layer.iter_mut().for_each(|v| *v *= g);
    Ok(DifferenceLayers { alpha: None, beta: Some(Layer { onset: 0, samples: layer }) })
}

fn event_onset(clip_len: usize, event: &SourceClip, rng: &mut Rng) -> Result<usize> {
    if event.samples.len() > clip_len {
        return Err(invalid(format!(
            "event of {} samples is longer than the {clip_len}-sample clip",
            event.samples.len()
        )));
    }
    Ok(rng.gen_range(0..=clip_len - event.samples.len()))
}

/// (c): one event rendering at `magnitude_db` SNR against the insertion
/// window of `target`.
fn added_event(target: &[f64], op: &DifferenceOp, bank: &SourceBank, rng: &mut Rng) -> Result<DifferenceLayers> {
    let ev = bank.event(op.class_id, rng)?;
    let onset = event_onset(target.len(), &ev, rng)?;
    let window = &target[onset..onset + ev.samples.len()];
    let g = snr_gain(window, &ev.samples, op.magnitude_db)?;
    let samples = ev.samples.iter().map(|v| v * g).collect();
    Ok(DifferenceLayers { alpha: None, beta: Some(Layer { onset, samples }) })
}

/// (e): two same-class renderings brought to equal RMS; the louder one goes
/// to `target`, the other, `magnitude_db` quieter, to the partner clip at
/// the same onset.
fn louder_event(target: &[f64], op: &DifferenceOp, bank: &SourceBank, rng: &mut Rng) -> Result<DifferenceLayers> {
    let loud = bank.event(op.class_id, rng)?;
    let quiet = bank.event(op.class_id, rng)?;
    let onset = event_onset(target.len(), &loud, rng)?;
    let snr = rng.gen_range(bank.event_snr_db.0..=bank.event_snr_db.1);
    let window = &target[onset..onset + loud.samples.len()];
    let g = snr_gain(window, &loud.samples, snr)?;
    let (rl, rq) = (rms(&loud.samples), rms(&quiet.samples));
    let gq = if rq > 0.0 { g * rl / rq * 10f64.powf(-op.magnitude_db / 20.0) } else { 0.0 };
    let loud_layer = Layer { onset, samples: loud.samples.iter().map(|v| v * g).collect() };
    let quiet_layer = Layer { onset, samples: quiet.samples.iter().map(|v| v * gq).collect() };
    Ok(DifferenceLayers { alpha: Some(quiet_layer), beta: Some(loud_layer) })
}
