//! Finite-difference check of the full training loss (dropout off) for
//! each loss variant on a tiny random model.
//!
//! cargo run --release --example gradient_check

use querymod::dsp::FrontEndConfig;
use querymod::encoders::{Model, ModelConfig};
use querymod::nn::{finite_diff_check, GradCheckOptions, ParamStore, Tensor};
use querymod::objective::{total_loss, Batch, LossConfig, Variant};
use querymod::seed::rng_from_seed;
use querymod::synth::Scene;

fn main() -> querymod::Result<()> {
    let config = ModelConfig { embed_dim: 8, hidden_dim: 12, audio_backbone_dim: 6, token_dim: 5, dropout: 0.1, seed: 1 };
    let model = Model::new(config, Scene::Rain, FrontEndConfig::test_preset(), 16_000)?;
    let mut rng = rng_from_seed(2);
    let texts = ["add thunder", "remove dog bark", "make footsteps louder", "increase the sound of rain"];
    let batch = Batch {
        audio_a: Tensor::uniform(&[4, 6], 1.0, &mut rng),
        audio_b: Tensor::uniform(&[4, 6], 1.0, &mut rng),
        text: Some(model.text_backbone(&texts)?),
        labels_a: Tensor::matrix(4, 5, (0..20).map(|i| (i % 3 == 0) as u8 as f64).collect())?,
        labels_b: Tensor::matrix(4, 5, (0..20).map(|i| (i % 2 == 0) as u8 as f64).collect())?,
    };

    for (variant, rho) in [(Variant::Baseline, 0.0), (Variant::Proposed, 0.0), (Variant::Proposed, 1.0)] {
        let cfg = LossConfig { variant, rho, tau: 0.0 };
        let mut store = model.store().clone();
        let (report, grads) = total_loss(&model, &store, &batch, &cfg, None, true)?;
        for (name, g) in &grads {
            store.accumulate_grad(name, g)?;
        }
        let loss = |s: &ParamStore| total_loss(&model, s, &batch, &cfg, None, false).map(|r| r.0.l_total).unwrap_or(f64::NAN);
        let check = finite_diff_check(&store, loss, GradCheckOptions { max_coords: 2000, ..Default::default() })?;
        println!(
            "{variant:?} rho={rho}: L={:.6} checked {} coords, max rel err {:.2e} at {:?}",
            report.l_total, check.checked, check.max_rel_error, check.worst
        );
    }
    Ok(())
}
