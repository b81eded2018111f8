//! Render a small paired corpus to disk and print a few of its rows.
//!
//! cargo run --release --example synth_corpus -- [out_dir] [scene] [seed]

use std::path::PathBuf;

use querymod::synth::{build_dataset, load_manifest, Scene, SynthConfig, MANIFEST_FILE};

fn main() -> querymod::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "example_corpus".into()));
    let scene: Scene = args.next().as_deref().unwrap_or("rain").parse()?;
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);

    let cfg = SynthConfig::test_preset();
    let manifest = build_dataset(scene, 40, 10, &cfg, seed, &out)?;
    println!("{} dev / {} eval pairs in {}", manifest.splits.dev, manifest.splits.eval, out.display());

    let loaded = load_manifest(&out.join(MANIFEST_FILE))?;
    for ex in loaded.manifest.examples.iter().take(6) {
        println!("{:<11} v={:?} w={:?}  \"{}\"", ex.id, ex.labels_a, ex.labels_b, ex.text);
    }
    Ok(())
}
