//! Checks on one desk-scale model trained with the classification term on
//! the Traffic scene. Training runs once and is shared by every test here.

use std::sync::OnceLock;
use std::time::Instant;

use rayon::prelude::*;

use querymod::dsp::{FrontEnd, FrontEndConfig};
use querymod::encoders::{compose_query, Model, ModelConfig};
use querymod::retrieval::{render_add_probe, EmbeddingIndex};
use querymod::synth::{Scene, SoundClass, Split, SynthConfig};
use querymod::trainer::{train, FeatureSet, Method, TrainConfig};

const SEED: u64 = 7;
const SCENE: Scene = Scene::Traffic;

struct Trained {
    model: Model,
    eval: FeatureSet,
}

fn trained() -> &'static Trained {
    static T: OnceLock<Trained> = OnceLock::new();
    T.get_or_init(|| {
        let synth = SynthConfig::desk();
        let frontend = FrontEnd::new(FrontEndConfig::desk()).unwrap();
        let dev = FeatureSet::render(SCENE, &synth, SEED, Split::Dev, 2000, &frontend).unwrap();
        let eval = FeatureSet::render(SCENE, &synth, SEED, Split::Eval, 200, &frontend).unwrap();
        let model = Model::new(ModelConfig { seed: SEED, ..Default::default() }, SCENE, *frontend.config(), synth.clip_samples()).unwrap();
        let cfg = TrainConfig { seed: SEED, progress_every: 0, ..TrainConfig::for_method(Method::WithClassif) };
        Trained { model: train(model, &dev, &cfg).unwrap().best, eval }
    })
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn mean_pairwise(x: &[Vec<f64>], y: &[Vec<f64>], same: bool) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, a) in x.iter().enumerate() {
        for (j, b) in y.iter().enumerate() {
            if same && i == j {
                continue;
            }
            sum += cosine(a, b);
            n += 1;
        }
    }
    sum / n as f64
}

/// Area under the ROC curve by pair counting, ties counted as one half.
fn auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|p| *p.1).map(|p| *p.0).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|p| !*p.1).map(|p| *p.0).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let wins: f64 = pos
        .iter()
        .flat_map(|p| neg.iter().map(move |n| if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 }))
        .sum();
    Some(wins / (pos.len() * neg.len()) as f64)
}

#[test]
fn same_event_mixes_embed_closer_than_different_events() {
    let t = trained();
    let synth = SynthConfig::desk();
    let embed = |class: SoundClass| -> Vec<Vec<f64>> {
        (0..100)
            .into_par_iter()
            .map(|i| t.model.encode_audio(&render_add_probe(SCENE, &synth, 500, class, i).unwrap().1).unwrap())
            .collect()
    };
    let dogs = embed(SoundClass::Dog);
    let horns = embed(SoundClass::CarHorn);
    let within = (mean_pairwise(&dogs, &dogs, true) + mean_pairwise(&horns, &horns, true)) / 2.0;
    let across = mean_pairwise(&dogs, &horns, false);
    assert!(within > across, "within {within:.4} vs across {across:.4}");
}

#[test]
fn classifier_ranks_present_events_above_absent_ones() {
    let t = trained();
    let ea = t.model.embed_audio(&t.model.audio_backbone(&t.eval.pooled_a).unwrap()).unwrap();
    let eb = t.model.embed_audio(&t.model.audio_backbone(&t.eval.pooled_b).unwrap()).unwrap();
    let mut probs = Vec::new();
    let mut labels = Vec::new();
    for (e, y) in [(&ea, &t.eval.labels_a), (&eb, &t.eval.labels_b)] {
        for i in 0..e.rows() {
            probs.push(t.model.classify(e.row(i)).unwrap());
            labels.push(y.row(i).to_vec());
        }
    }
    let aucs: Vec<f64> = (0..5)
        .filter_map(|c| {
            let s: Vec<f64> = probs.iter().map(|p| p[c]).collect();
            let y: Vec<bool> = labels.iter().map(|l| l[c] == 1.0).collect();
            auc(&s, &y)
        })
        .collect();
    assert_eq!(aucs.len(), 4, "every event class occurs and is absent somewhere");
    let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
    assert!(mean > 0.9, "per-class AUC {aucs:?}, mean {mean:.3}");
}

#[test]
fn describing_the_difference_moves_the_query_toward_its_target() {
    let t = trained();
    let ea = t.model.embed_audio(&t.model.audio_backbone(&t.eval.pooled_a).unwrap()).unwrap();
    let eb = t.model.embed_audio(&t.model.audio_backbone(&t.eval.pooled_b).unwrap()).unwrap();
    let et = t.model.embed_text(&t.model.text_backbone(&t.eval.texts).unwrap()).unwrap();
    let n = t.eval.len();
    let closer = (0..n)
        .filter(|&i| {
            let q = compose_query(ea.row(i), et.row(i)).unwrap();
            cosine(&q, eb.row(i)) > cosine(ea.row(i), eb.row(i))
        })
        .count();
    let share = closer as f64 / n as f64;
    assert!(share >= 0.7, "{closer}/{n} = {share:.3}");
}

#[test]
fn eval_index_builds_quickly_and_repeatably() {
    let t = trained();
    let synth = SynthConfig::desk();
    let start = Instant::now();
    let eval = FeatureSet::render(SCENE, &synth, SEED, Split::Eval, 200, t.model.frontend()).unwrap();
    let index = EmbeddingIndex::build(&t.model, &eval).unwrap();
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 30.0, "{secs:.1}s");
    assert_eq!(index.len(), 200);
    assert_eq!(index.embeddings(), EmbeddingIndex::build(&t.model, &t.eval).unwrap().embeddings());
}
