//! Log-mel front end on a synthesized clip: spectrogram shape, the loudest
//! mel bands, and the pooled statistics the audio encoder consumes.
//!
//! cargo run --release --example log_mel_features -- [class]

use querymod::dsp::{pool_stats, FrontEnd, FrontEndConfig};
use querymod::synth::{synthesize_source, SoundClass};

fn main() -> querymod::Result<()> {
    let class: SoundClass = std::env::args().nth(1).as_deref().unwrap_or("car_horn").parse()?;
    let cfg = FrontEndConfig::desk();
    let frontend = FrontEnd::new(cfg)?;
    let clip = synthesize_source(class, 2.0, cfg.sample_rate_hz, 11)?;

    let patch = frontend.log_mel(&clip)?;
    println!("{}: {} frames x {} mel bands, hop {} s", class.name(), patch.n_frames, patch.n_mels, patch.hop_s);

    let pooled = pool_stats(&patch)?;
    let (max, mean) = pooled.split_at(cfg.n_mels);
    let mut bands: Vec<usize> = (0..cfg.n_mels).collect();
    bands.sort_by(|&a, &b| mean[b].total_cmp(&mean[a]));
    println!("loudest bands by mean log power:");
    for &m in &bands[..5] {
        println!("  band {m:>2}: mean {:>8.3}  max {:>8.3}", mean[m], max[m]);
    }
    println!("pooled feature length: {}", pooled.len());
    Ok(())
}
