//! Project `A(b) - A(a)` for "add thunder" / "add dog bark" probe pairs and
//! the two description embeddings to 2-D, for a baseline and a fully
//! trained model.
//!
//! cargo run --release --example export_diffs -- [out_dir]

use std::path::PathBuf;

use querymod::dsp::{FrontEnd, FrontEndConfig};
use querymod::encoders::{Model, ModelConfig};
use querymod::retrieval::{export_embedding_diffs, ProbeSpec};
use querymod::synth::{Scene, Split, SynthConfig};
use querymod::trainer::{train, FeatureSet, Method, TrainConfig};

fn main() -> querymod::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "example_diffs".into()));
    std::fs::create_dir_all(&out)?;
    let synth = SynthConfig::test_preset();
    let frontend = FrontEnd::new(FrontEndConfig::test_preset())?;
    let dev = FeatureSet::render(Scene::Rain, &synth, 4, Split::Dev, 400, &frontend)?;
    let spec: ProbeSpec = "thunder:60,dog:60".parse()?;

    for method in [Method::Baseline, Method::WithClassif] {
        let model = Model::new(ModelConfig { seed: 4, ..Default::default() }, Scene::Rain, *frontend.config(), synth.clip_samples())?;
        let cfg = TrainConfig { epochs: 60, seed: 4, ..TrainConfig::for_method(method) };
        let best = train(model, &dev, &cfg)?.best;
        let export = export_embedding_diffs(&best, &synth, &spec, 4)?;
        let path = out.join(format!("{}.csv", method.name()));
        std::fs::write(&path, export.to_csv())?;
        let s = &export.stats;
        println!(
            "{:<13} centroid distance {:.3}  mean radius {:.3}  texts matched {:?}  -> {}",
            method.name(),
            s.centroid_distance,
            s.mean_radius,
            s.text_matches,
            path.display()
        );
    }
    Ok(())
}
