//! Train one method on an in-memory corpus and save the checkpoints and
//! training log.
//!
//! cargo run --release --example train -- [baseline|no-classif|with-classif] [epochs] [out_dir]

use std::path::PathBuf;

use querymod::dsp::{FrontEnd, FrontEndConfig};
use querymod::encoders::{Model, ModelConfig};
use querymod::synth::{Scene, Split, SynthConfig};
use querymod::trainer::{train, FeatureSet, Method, TrainConfig};

fn main() -> querymod::Result<()> {
    let mut args = std::env::args().skip(1);
    let method: Method = args.next().as_deref().unwrap_or("with-classif").parse()?;
    let epochs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(60);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "example_run".into()));

    let synth = SynthConfig::test_preset();
    let frontend = FrontEnd::new(FrontEndConfig::test_preset())?;
    let dev = FeatureSet::render(Scene::Rain, &synth, 3, Split::Dev, 400, &frontend)?;

    let model = Model::new(ModelConfig { seed: 3, ..Default::default() }, Scene::Rain, *frontend.config(), synth.clip_samples())?;
    let cfg = TrainConfig { epochs, seed: 3, progress_every: 10, ..TrainConfig::for_method(method) };
    let outcome = train(model, &dev, &cfg)?;
    outcome.save(&out)?;

    let first = &outcome.log.records[0];
    let best = outcome.log.best();
    println!("{}: {} train / {} val pairs", method.name(), outcome.train_ids.len(), outcome.val_ids.len());
    println!("epoch 1: train_cont {:.3}, val_total {:.3}", first.train_cont, first.val_total);
    println!("best epoch {}: train_cont {:.3}, val_total {:.3}", best.epoch, best.train_cont, best.val_total);
    println!("wrote best.ckpt, final.ckpt and train_log.csv to {}", out.display());
    Ok(())
}
