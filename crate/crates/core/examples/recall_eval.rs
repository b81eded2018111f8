//! Train the three compared methods on one corpus and report Recall@K and
//! per-class R@1 for each.
//!
//! cargo run --release --example recall_eval -- [epochs] [rain|traffic]

use querymod::dsp::{FrontEnd, FrontEndConfig};
use querymod::encoders::{Model, ModelConfig};
use querymod::retrieval::{per_class_recall, recall_at_k, retrieve_all, target_ranks, EmbeddingIndex};
use querymod::synth::{Scene, Split, SynthConfig};
use querymod::trainer::{train, FeatureSet, Method, TrainConfig};

fn main() -> querymod::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(60);
    let scene: Scene = args.next().as_deref().unwrap_or("rain").parse()?;

    let synth = SynthConfig::test_preset();
    let frontend = FrontEnd::new(FrontEndConfig::test_preset())?;
    let dev = FeatureSet::render(scene, &synth, 2, Split::Dev, 600, &frontend)?;
    let eval = FeatureSet::render(scene, &synth, 2, Split::Eval, 100, &frontend)?;

    println!("{:<13} {:>6} {:>6} {:>6}   per-class R@1", "method", "R@1", "R@5", "R@10");
    for method in Method::ALL {
        let model = Model::new(ModelConfig { seed: 2, ..Default::default() }, scene, *frontend.config(), synth.clip_samples())?;
        let cfg = TrainConfig { epochs, seed: 2, ..TrainConfig::for_method(method) };
        let best = train(model, &dev, &cfg)?.best;
        let index = EmbeddingIndex::build(&best, &eval)?;
        let ranks = target_ranks(&retrieve_all(&best, &index, &eval, cfg.variant, 10)?);
        let classes: Vec<String> = per_class_recall(&ranks, &eval.ops, scene, 1)
            .iter()
            .map(|c| format!("{}={}", c.bucket, c.recall.map_or("N/A".into(), |v| format!("{v:.2}"))))
            .collect();
        println!(
            "{:<13} {:>6.3} {:>6.3} {:>6.3}   {}",
            method.name(),
            recall_at_k(&ranks, 1),
            recall_at_k(&ranks, 5),
            recall_at_k(&ranks, 10),
            classes.join(" ")
        );
    }
    Ok(())
}
