//! Independent oracles shared by the integration tests and the acceptance
//! run. Nothing here calls into the code path it checks.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use querymod::dsp::{pool_stats, FrontEnd, FrontEndConfig};
use querymod::encoders::{Model, ModelConfig};
use querymod::nn::{finite_diff_check, GradCheckOptions, ParamStore, Tensor};
use querymod::objective::{total_loss, Batch, LossConfig, Variant};
use querymod::seed::{rng_from_seed, Rng};
use querymod::synth::{DiffKind, DifferenceOp, Scene, SoundClass};

/// Brute-force ranking: cosine of `q` with every row, sorted by score
/// descending and then by id.
pub fn brute_force_order(ids: &[String], rows: &[Vec<f64>], q: &[f64]) -> Vec<String> {
    let qn = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut scored: Vec<(f64, &String)> = rows
        .iter()
        .zip(ids)
        .map(|(r, id)| {
            let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            (q.iter().zip(r).map(|(a, b)| a * b).sum::<f64>() / (qn * rn), id)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    scored.into_iter().map(|(_, id)| id.clone()).collect()
}

/// Checks the label rule for one example: the background is always present,
/// `w \ v` is exactly the AddEvent classes and `v \ w` exactly the
/// RemoveEvent classes.
pub fn labels_sound(scene: Scene, ops: &[DifferenceOp], v: &[u8], w: &[u8]) -> Result<(), String> {
    if v[0] != 1 || w[0] != 1 {
        return Err("background label missing".into());
    }
    for (i, class) in scene.classes().iter().enumerate().skip(1) {
        let op = ops.iter().find(|o| o.class_id == *class).map(|o| o.kind);
        let added = v[i] == 0 && w[i] == 1;
        let removed = v[i] == 1 && w[i] == 0;
        if added != (op == Some(DiffKind::AddEvent)) {
            return Err(format!("{class}: added={added} but op {op:?}"));
        }
        if removed != (op == Some(DiffKind::RemoveEvent)) {
            return Err(format!("{class}: removed={removed} but op {op:?}"));
        }
        let both = v[i] == 1 && w[i] == 1;
        if both != matches!(op, Some(DiffKind::IncEvent | DiffKind::DecEvent)) {
            return Err(format!("{class}: present in both={both} but op {op:?}"));
        }
    }
    Ok(())
}

/// Mean log-mel vector of a fresh rendering of `class`.
fn mean_log_mel(frontend: &FrontEnd, class: SoundClass, seed: u64) -> Vec<f64> {
    let cfg = frontend.config();
    let x = querymod::synth::synthesize_source(class, 2.0, cfg.sample_rate_hz, seed).expect("render");
    let pooled = pool_stats(&frontend.log_mel(&x).expect("log-mel")).expect("pool");
    pooled[cfg.n_mels..].to_vec()
}

/// One-vs-rest ridge regression on standardized mean log-mel features of
/// the eight source classes: fit on `per_class` renderings each, score on
/// `per_class` fresh renderings each. Returns held-out accuracy.
pub fn source_class_separability(per_class: usize) -> f64 {
    let frontend = FrontEnd::new(FrontEndConfig::desk()).expect("front end");
    let classes = SoundClass::ALL;
    let draw = |offset: u64| -> Vec<(usize, Vec<f64>)> {
        (0..classes.len() * per_class)
            .into_par_iter()
            .map(|j| {
                let (c, i) = (j / per_class, j % per_class);
                (c, mean_log_mel(&frontend, classes[c], offset + i as u64))
            })
            .collect()
    };
    let train = draw(10_000);
    let test = draw(20_000);

    let d = train[0].1.len();
    let n = train.len() as f64;
    let mean: Vec<f64> = (0..d).map(|k| train.iter().map(|r| r.1[k]).sum::<f64>() / n).collect();
    let std: Vec<f64> = (0..d)
        .map(|k| (train.iter().map(|r| (r.1[k] - mean[k]).powi(2)).sum::<f64>() / n).sqrt().max(1e-9))
        .collect();
    let design = |rows: &[(usize, Vec<f64>)]| {
        DMatrix::from_fn(rows.len(), d + 1, |r, k| if k == d { 1.0 } else { (rows[r].1[k] - mean[k]) / std[k] })
    };
    let x = design(&train);
    let y = DMatrix::from_fn(train.len(), classes.len(), |r, c| if train[r].0 == c { 1.0 } else { -1.0 });
    let gram = x.transpose() * &x + DMatrix::identity(d + 1, d + 1) * 1e-3;
    let w = gram.cholesky().expect("ridge system is positive definite").solve(&(x.transpose() * y));

    let scores = design(&test) * w;
    let correct = (0..test.len())
        .filter(|&r| {
            let row: DVector<f64> = scores.row(r).transpose();
            row.argmax().0 == test[r].0
        })
        .count();
    correct as f64 / test.len() as f64
}

/// A model and a random batch for the end-to-end gradient check.
pub fn random_model_and_batch(seed: u64, b: usize) -> (Model, Batch) {
    let config = ModelConfig { seed, dropout: 0.1, ..ModelConfig::default() };
    let model = Model::new(config, Scene::Rain, FrontEndConfig::test_preset(), 16_000).expect("model");
    let mut rng = rng_from_seed(seed ^ 0x5eed);
    let words = ["add", "remove", "make", "louder", "lower", "thunder", "dog", "bark", "rain", "footsteps"];
    let texts: Vec<String> = (0..b)
        .map(|i| (0..3).map(|j| words[(i * 7 + j * 3 + seed as usize) % words.len()]).collect::<Vec<_>>().join(" "))
        .collect();
    let text = model.text_backbone(&texts).expect("text backbone");
    let dim = model.config().audio_backbone_dim;
    let batch = Batch {
        audio_a: Tensor::uniform(&[b, dim], 1.0, &mut rng),
        audio_b: Tensor::uniform(&[b, dim], 1.0, &mut rng),
        text: Some(text),
        labels_a: random_labels(b, &mut rng),
        labels_b: random_labels(b, &mut rng),
    };
    (model, batch)
}

fn random_labels(b: usize, rng: &mut Rng) -> Tensor {
    use rand::Rng as _;
    Tensor::matrix(b, 5, (0..b * 5).map(|_| rng.gen_bool(0.5) as u8 as f64).collect()).expect("labels")
}

/// Maximum relative error between the analytic total-loss gradient (dropout
/// off) and fourth-order central differences at h = 1e-3, for one loss
/// configuration. Some projection weights carry gradients near 1e-8, where
/// the two-point difference at h = 1e-5 is dominated by rounding.
pub fn total_loss_grad_error(model: &Model, batch: &Batch, cfg: &LossConfig, max_coords: usize, seed: u64) -> f64 {
    let mut store = model.store().clone();
    let batch = match cfg.variant {
        Variant::Baseline => Batch { text: None, ..batch.clone() },
        Variant::Proposed => batch.clone(),
    };
    let (_, grads) = total_loss(model, &store, &batch, cfg, None, true).expect("loss");
    for (name, g) in &grads {
        store.accumulate_grad(name, g).expect("grad");
    }
    let loss = |s: &ParamStore| total_loss(model, s, &batch, cfg, None, false).map_or(f64::NAN, |r| r.0.l_total);
    finite_diff_check(&store, loss, GradCheckOptions { h: 1e-3, max_coords, seed, fourth_order: true })
        .expect("gradient check")
        .max_rel_error
}
