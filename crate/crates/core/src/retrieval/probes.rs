use rand::Rng as _;
use rayon::prelude::*;

use crate::dsp::{snr_gain, FrontEnd};
use crate::encoders::Model;
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::objective::Variant;
use crate::seed::{derive_seed, rng_from_seed, Rng};
use crate::synth::wav::pcm16_roundtrip;
use crate::synth::{apply_difference, crop_background, describe, DiffKind, DifferenceOp, Scene, SoundClass, Split, SynthConfig};

use super::index::{query_embeddings, EmbeddingIndex};
use super::metrics::recall_at_k;

/// Features of a rendered contrast pair: `a`, true `b`, other `b`, text.
type ProbeRow = (Vec<f64>, Vec<f64>, Vec<f64>, String);

fn check_event(scene: Scene, class: SoundClass) -> Result<()> {
    if scene.events().contains(&class) {
        Ok(())
    } else {
        Err(Error::UnknownClass(format!("{} is not an event of the {} scene", class.name(), scene.name())))
    }
}

fn background_pair(scene: Scene, synth: &SynthConfig, rng: &mut Rng) -> Result<(Vec<f64>, Vec<f64>)> {
    let bank = synth.source_bank(scene, Split::Eval);
    let bg = bank.background(rng)?;
    crop_background(&bg, synth.clip_samples(), rng)
}

/// A pair whose `b` clip additionally holds one `class` event, drawn from
/// evaluation-split sources. Both clips are 16-bit quantized.
pub fn render_add_probe(
    scene: Scene,
    synth: &SynthConfig,
    seed: u64,
    class: SoundClass,
    index: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_event(scene, class)?;
    let mut rng = rng_from_seed(derive_seed(seed, &format!("probe/{}", class.name()), index as u64));
    let (a, b) = background_pair(scene, synth, &mut rng)?;
    let (lo, hi) = synth.magnitude_range(DiffKind::AddEvent);
    let op = DifferenceOp::new(DiffKind::AddEvent, class, rng.gen_range(lo..=hi));
    let (a, b) = apply_difference(&a, &b, &op, &synth.source_bank(scene, Split::Eval), &mut rng)?;
    Ok((pcm16_roundtrip(&a), pcm16_roundtrip(&b)))
}

/// One query clip and two candidate targets built from the same partner
/// window: one with a `true_class` event, one with an `other_class` event
/// at the same onset and SNR.
#[derive(Clone, Debug, PartialEq)]
pub struct ContrastPair {
    pub a: Vec<f64>,
    pub b_true: Vec<f64>,
    pub b_other: Vec<f64>,
    /// Describes the change from `a` to `b_true`.
    pub text: String,
}

pub fn render_contrast_pair(
    scene: Scene,
    synth: &SynthConfig,
    seed: u64,
    index: usize,
    true_class: SoundClass,
    other_class: SoundClass,
) -> Result<ContrastPair> {
    check_event(scene, true_class)?;
    check_event(scene, other_class)?;
    let mut rng = rng_from_seed(derive_seed(seed, "contrast", index as u64));
    let (a, beta) = background_pair(scene, synth, &mut rng)?;
    let bank = synth.source_bank(scene, Split::Eval);
    let ev_true = bank.event(true_class, &mut rng)?;
    let ev_other = bank.event(other_class, &mut rng)?;
    let (lo, hi) = synth.magnitude_range(DiffKind::AddEvent);
    let snr = rng.gen_range(lo..=hi);
    let onset = rng.gen_range(0..=beta.len() - ev_true.samples.len());
    let with = |ev: &[f64]| -> Result<Vec<f64>> {
        let g = snr_gain(&beta[onset..onset + ev.len()], ev, snr)?;
        let mut out = beta.clone();
        out[onset..].iter_mut().zip(ev).for_each(|(o, v)| *o = (*o + g * v).clamp(-1.0, 1.0));
        Ok(pcm16_roundtrip(&out))
    };
    Ok(ContrastPair {
        b_true: with(&ev_true.samples)?,
        b_other: with(&ev_other.samples)?,
        a: pcm16_roundtrip(&a),
        text: describe(&[DifferenceOp::new(DiffKind::AddEvent, true_class, snr)])?,
    })
}

/// Pooled features of `n` contrast pairs. Pair `i` uses event classes
/// cycling through every ordered pair of distinct scene events.
#[derive(Clone, Debug, PartialEq)]
pub struct ContrastProbeSet {
    pub pooled_a: Tensor,
    pub pooled_true: Tensor,
    pub pooled_other: Tensor,
    pub texts: Vec<String>,
}

impl ContrastProbeSet {
    pub fn render(scene: Scene, synth: &SynthConfig, seed: u64, n: usize, frontend: &FrontEnd) -> Result<Self> {
        let ev = scene.events();
        let pairs: Vec<(SoundClass, SoundClass)> =
            ev.iter().flat_map(|&x| ev.iter().filter(move |&&y| y != x).map(move |&y| (x, y))).collect();
        let rows = (0..n)
            .into_par_iter()
            .map(|i| {
                let (t, o) = pairs[i % pairs.len()];
                let p = render_contrast_pair(scene, synth, seed, i, t, o)?;
                Ok((frontend.features(&p.a)?, frontend.features(&p.b_true)?, frontend.features(&p.b_other)?, p.text))
            })
            .collect::<Result<Vec<_>>>()?;
        let col = |f: fn(&ProbeRow) -> &Vec<f64>| {
            Tensor::from_rows(&rows.iter().map(|r| f(r).clone()).collect::<Vec<_>>())
        };
        Ok(Self {
            pooled_a: col(|r| &r.0)?,
            pooled_true: col(|r| &r.1)?,
            pooled_other: col(|r| &r.2)?,
            texts: rows.into_iter().map(|r| r.3).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    /// R@1 of the described targets over an index of all `2n` candidates.
    pub fn recall_at_1(&self, model: &Model, variant: Variant) -> Result<f64> {
        let n = self.len();
        let ids: Vec<String> =
            (0..n).map(|i| format!("probe_{i:05}_t")).chain((0..n).map(|i| format!("probe_{i:05}_o"))).collect();
        let cands = Tensor::vstack(&self.pooled_true, &self.pooled_other)?;
        let index = EmbeddingIndex::new(ids, model.embed_audio(&model.audio_backbone(&cands)?)?)?;
        let features = crate::trainer::FeatureSet {
            ids: (0..n).map(|i| format!("probe_{i:05}_t")).collect(),
            pooled_a: self.pooled_a.clone(),
            pooled_b: self.pooled_true.clone(),
            texts: self.texts.clone(),
            ops: vec![Vec::new(); n],
            labels_a: Tensor::zeros(&[n, 5]),
            labels_b: Tensor::zeros(&[n, 5]),
        };
        let q = query_embeddings(model, &features, variant)?;
        let ranks = (0..n)
            .map(|i| Ok(index.search(q.row(i), 1, Some(&features.ids[i]))?.rank_of_target.unwrap_or(usize::MAX)))
            .collect::<Result<Vec<_>>>()?;
        Ok(recall_at_k(&ranks, 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::rms;

    #[test]
    fn contrast_targets_differ_only_inside_the_event_window() {
        let cfg = SynthConfig::test_preset();
        let p = render_contrast_pair(Scene::Rain, &cfg, 3, 0, SoundClass::Dog, SoundClass::Thunder).unwrap();
        assert_eq!(p.text, "add dog bark");
        let diff: Vec<usize> = (0..p.b_true.len()).filter(|&i| p.b_true[i] != p.b_other[i]).collect();
        let span = diff.last().unwrap() - diff.first().unwrap() + 1;
        assert!(span <= (cfg.event_seconds * cfg.sample_rate_hz as f64) as usize);
        assert!(rms(&p.a) > 0.0);
    }

    #[test]
    fn probes_reject_foreign_classes() {
        let cfg = SynthConfig::test_preset();
        assert!(matches!(render_add_probe(Scene::Rain, &cfg, 1, SoundClass::CarHorn, 0), Err(Error::UnknownClass(_))));
        assert!(render_add_probe(Scene::Rain, &cfg, 1, SoundClass::Rain, 0).is_err());
        let (a, b) = render_add_probe(Scene::Rain, &cfg, 1, SoundClass::Thunder, 0).unwrap();
        assert_eq!(a.len(), b.len());
        assert_eq!((a.clone(), b), render_add_probe(Scene::Rain, &cfg, 1, SoundClass::Thunder, 0).unwrap());
    }
}
