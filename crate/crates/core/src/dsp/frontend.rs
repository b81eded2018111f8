use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::mel::{log_mel, mel_filterbank, LogMelPatch, MelFilterbank, LOG_FLOOR};
use super::stft::{StftConfig, StftPlan};
use super::pool_stats;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontEndConfig {
    pub sample_rate_hz: u32,
    pub fft_size: usize,
    pub hop: usize,
    pub win_length: usize,
    pub n_mels: usize,
    pub f_min: f64,
    /// Upper filterbank edge; `None` means Nyquist.
    pub f_max: Option<f64>,
}

impl FrontEndConfig {
    /// 25 ms / 10 ms framing at 16 kHz with 64 mel bands.
    pub fn desk() -> Self {
        Self { sample_rate_hz: 16_000, fft_size: 512, hop: 160, win_length: 400, n_mels: 64, f_min: 60.0, f_max: None }
    }

    /// Same band layout at 8 kHz.
    pub fn test_preset() -> Self {
        Self { sample_rate_hz: 8_000, fft_size: 512, hop: 80, win_length: 200, n_mels: 64, f_min: 60.0, f_max: None }
    }

    pub fn stft(&self) -> StftConfig {
        StftConfig { fft_size: self.fft_size, hop: self.hop, win_length: self.win_length }
    }

    pub fn f_max_hz(&self) -> f64 {
        self.f_max.unwrap_or(self.sample_rate_hz as f64 / 2.0)
    }

    /// Length of the pooled feature vector.
    pub fn feature_dim(&self) -> usize {
        2 * self.n_mels
    }
}

/// Waveform -> log-mel -> pooled statistics, with the FFT plan and
/// filterbank built once.
#[derive(Clone)]
pub struct FrontEnd {
    config: FrontEndConfig,
    plan: StftPlan,
    filterbank: MelFilterbank,
}

impl FrontEnd {
    pub fn new(config: FrontEndConfig) -> Result<Self> {
        let plan = StftPlan::new(config.stft())?;
        let filterbank = mel_filterbank(
            config.n_mels,
            config.fft_size,
            config.sample_rate_hz,
            config.f_min,
            config.f_max_hz(),
        )?;
        Ok(Self { config, plan, filterbank })
    }

    pub fn config(&self) -> &FrontEndConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    pub fn log_mel(&self, waveform: &[f64]) -> Result<LogMelPatch> {
        let spec = self.plan.run(waveform, self.config.sample_rate_hz)?;
        log_mel(&spec, &self.filterbank, LOG_FLOOR)
    }

    /// Pooled log-mel statistics (`2 * n_mels` values).
    pub fn features(&self, waveform: &[f64]) -> Result<Vec<f64>> {
        pool_stats(&self.log_mel(waveform)?)
    }
}
