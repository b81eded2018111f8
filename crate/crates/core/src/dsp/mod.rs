//! Log-mel front end: STFT power spectra, HTK mel filterbanks, log
//! compression, temporal pooling and level utilities.
//!
//! Every function here is pure and safe to call from many threads.

mod cache;
mod frontend;
mod level;
mod mel;
mod stft;

pub use cache::{read_patch, write_patch};
pub use frontend::{FrontEnd, FrontEndConfig};
pub use level::{mix_at_snr, rms, rms_db, snr_gain};
pub use mel::{hz_to_mel, log_mel, mel_filterbank, mel_to_hz, LogMelPatch, MelFilterbank, LOG_FLOOR};
pub use stft::{hann, stft_power, Spectrogram, StftConfig};

/// Per-mel-bin temporal max followed by per-mel-bin temporal mean
/// (length `2 * n_mels`).
pub fn pool_stats(patch: &LogMelPatch) -> crate::Result<Vec<f64>> {
    let (n_frames, n_mels) = (patch.n_frames, patch.n_mels);
    if n_frames == 0 || n_mels == 0 {
        return Err(crate::error::invalid("pool_stats on an empty patch"));
    }
    let mut out = vec![0.0; 2 * n_mels];
    let (max, mean) = out.split_at_mut(n_mels);
    max.fill(f64::NEG_INFINITY);
    for frame in patch.values.chunks_exact(n_mels) {
        for ((mx, mn), &v) in max.iter_mut().zip(mean.iter_mut()).zip(frame) {
            if v > *mx {
                *mx = v;
            }
            *mn += v;
        }
    }
    let inv = 1.0 / n_frames as f64;
    mean.iter_mut().for_each(|m| *m *= inv);
    Ok(out)
}
