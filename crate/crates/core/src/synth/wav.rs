//! Mono 16-bit PCM WAV I/O.

use std::path::Path;

use crate::error::{invalid, Result};

const FULL_SCALE: f64 = 32767.0;

/// Clamp to [-1, 1], scale, round half away from zero.
pub fn to_pcm16(x: f64) -> i16 {
    (x.clamp(-1.0, 1.0) * FULL_SCALE).round() as i16
}

pub fn from_pcm16(s: i16) -> f64 {
    s as f64 / FULL_SCALE
}

/// The waveform as it reads back from a 16-bit file.
pub fn pcm16_roundtrip(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| from_pcm16(to_pcm16(v))).collect()
}

pub fn write_wav(path: &Path, samples: &[f64], sample_rate_hz: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let tmp = path.with_extension("wav.tmp");
    {
        let mut w = hound::WavWriter::create(&tmp, spec)?;
        let mut w16 = w.get_i16_writer(samples.len() as u32);
        for &v in samples {
            w16.write_sample(to_pcm16(v));
        }
        w16.flush()?;
        w.finalize()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a mono 16-bit file; returns samples and sample rate.
pub fn read_wav(path: &Path) -> Result<(Vec<f64>, u32)> {
    let mut r = hound::WavReader::open(path)?;
    let spec = r.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(invalid(format!("{} is not mono 16-bit PCM", path.display())));
    }
    let samples = r.samples::<i16>().map(|s| s.map(from_pcm16)).collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((samples, spec.sample_rate))
}
