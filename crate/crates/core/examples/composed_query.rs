//! Train briefly, then run the same query clip with different difference
//! descriptions and watch the ranking move.
//!
//! cargo run --release --example composed_query

use querymod::dsp::{FrontEnd, FrontEndConfig};
use querymod::encoders::{Model, ModelConfig};
use querymod::retrieval::{query, EmbeddingIndex};
use querymod::synth::{render_example, wav::pcm16_roundtrip, Scene, Split, SynthConfig};
use querymod::trainer::{train, FeatureSet, Method, TrainConfig};

fn main() -> querymod::Result<()> {
    let scene = Scene::Traffic;
    let synth = SynthConfig::test_preset();
    let frontend = FrontEnd::new(FrontEndConfig::test_preset())?;
    let dev = FeatureSet::render(scene, &synth, 5, Split::Dev, 400, &frontend)?;
    let eval = FeatureSet::render(scene, &synth, 5, Split::Eval, 60, &frontend)?;

    let model = Model::new(ModelConfig { seed: 5, ..Default::default() }, scene, *frontend.config(), synth.clip_samples())?;
    let cfg = TrainConfig { epochs: 60, seed: 5, ..TrainConfig::for_method(Method::WithClassif) };
    let model = train(model, &dev, &cfg)?.best;
    let index = EmbeddingIndex::build(&model, &eval)?;

    let ex = render_example(scene, &synth, 5, Split::Eval, 0)?;
    println!("query clip {}: true difference \"{}\"", ex.id, ex.text);
    let audio = pcm16_roundtrip(&ex.audio_a);
    for text in ["", ex.text.as_str(), "add church bells", "decrease the sound of car sound"] {
        let r = query(&model, &index, &audio, text, 3)?;
        let shown = if text.is_empty() { "(audio only)" } else { text };
        let hits: Vec<String> = r.hits.iter().map(|h| format!("{} {:.3}", h.id, h.score)).collect();
        println!("{shown:<35} -> {}", hits.join(", "));
    }
    Ok(())
}
