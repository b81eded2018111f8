use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StftConfig {
    pub fft_size: usize,
    pub hop: usize,
    /// Hann window length; frames are zero-padded up to `fft_size`.
    pub win_length: usize,
}

impl StftConfig {
    pub fn new(fft_size: usize, hop: usize, win_length: usize) -> Result<Self> {
        let cfg = Self { fft_size, hop, win_length };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.fft_size.is_power_of_two() || self.fft_size < 2 {
            return Err(invalid(format!("fft_size {} is not a power of two", self.fft_size)));
        }
        if self.hop == 0 || self.hop > self.fft_size {
            return Err(invalid(format!("hop {} must be in 1..={}", self.hop, self.fft_size)));
        }
        if self.win_length == 0 || self.win_length > self.fft_size {
            return Err(invalid(format!(
                "win_length {} must be in 1..={}",
                self.win_length, self.fft_size
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Frame count for a waveform of `len` samples (non-centered framing).
    pub fn n_frames(&self, len: usize) -> usize {
        if len < self.win_length {
            0
        } else {
            1 + (len - self.win_length) / self.hop
        }
    }
}

/// Power spectrogram, row-major `[n_frames x n_bins]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    pub frames: Vec<f64>,
    pub n_frames: usize,
    pub n_bins: usize,
    pub hop_s: f64,
    pub win_s: f64,
    pub sample_rate_hz: u32,
}

impl Spectrogram {
    pub fn frame(&self, i: usize) -> &[f64] {
        &self.frames[i * self.n_bins..(i + 1) * self.n_bins]
    }
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Reusable STFT plan (window + FFT).
#[derive(Clone)]
pub(crate) struct StftPlan {
    cfg: StftConfig,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl StftPlan {
    pub(crate) fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let fft = FftPlanner::new().plan_fft_forward(cfg.fft_size);
        Ok(Self { cfg, window: hann(cfg.win_length), fft })
    }

    pub(crate) fn run(&self, waveform: &[f64], sample_rate_hz: u32) -> Result<Spectrogram> {
        let cfg = self.cfg;
        if waveform.len() < cfg.fft_size {
            return Err(invalid(format!(
                "waveform of {} samples is shorter than fft_size {}",
                waveform.len(),
                cfg.fft_size
            )));
        }
        let n_frames = cfg.n_frames(waveform.len());
        let n_bins = cfg.n_bins();
        let mut frames = vec![0.0; n_frames * n_bins];
        let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for (f, out) in frames.chunks_exact_mut(n_bins).enumerate() {
            let start = f * cfg.hop;
            let seg = &waveform[start..start + cfg.win_length];
            for (slot, (&x, &w)) in buf.iter_mut().zip(seg.iter().zip(&self.window)) {
                *slot = Complex::new(x * w, 0.0);
            }
            buf[cfg.win_length..].fill(Complex::new(0.0, 0.0));
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (o, c) in out.iter_mut().zip(&buf) {
                *o = c.norm_sqr();
            }
        }
        let sr = sample_rate_hz as f64;
        Ok(Spectrogram {
            frames,
            n_frames,
            n_bins,
            hop_s: cfg.hop as f64 / sr,
            win_s: cfg.win_length as f64 / sr,
            sample_rate_hz,
        })
    }
}

/// Hann-windowed, non-centered power spectrogram `|DFT|^2`.
pub fn stft_power(waveform: &[f64], cfg: StftConfig, sample_rate_hz: u32) -> Result<Spectrogram> {
    StftPlan::new(cfg)?.run(waveform, sample_rate_hz)
}
