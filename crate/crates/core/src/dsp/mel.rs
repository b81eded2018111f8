use crate::error::{invalid, shape, Result};

use super::Spectrogram;

/// Floor applied before the logarithm.
pub const LOG_FLOOR: f64 = 1e-10;

/// HTK mel scale.
pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filterbank, row-major `[n_mels x n_bins]`.
///
/// Each row also records the half-open range of bins where it is nonzero so
/// projection only touches the support.
#[derive(Clone, Debug, PartialEq)]
pub struct MelFilterbank {
    pub n_mels: usize,
    pub n_bins: usize,
    pub weights: Vec<f64>,
    support: Vec<(usize, usize)>,
}

impl MelFilterbank {
    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    /// Total weight landing on each FFT bin.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_bins];
        for m in 0..self.n_mels {
            for (s, w) in sums.iter_mut().zip(self.row(m)) {
                *s += w;
            }
        }
        sums
    }

    fn project_frame(&self, power: &[f64], out: &mut [f64]) {
        for (m, o) in out.iter_mut().enumerate() {
            let (lo, hi) = self.support[m];
            let row = &self.row(m)[lo..hi];
            *o = row.iter().zip(&power[lo..hi]).map(|(w, p)| w * p).sum();
        }
    }
}

pub fn mel_filterbank(
    n_mels: usize,
    fft_size: usize,
    sample_rate_hz: u32,
    f_min: f64,
    f_max: f64,
) -> Result<MelFilterbank> {
    let nyquist = sample_rate_hz as f64 / 2.0;
    if n_mels < 2 {
        return Err(invalid(format!("n_mels must be at least 2, got {n_mels}")));
    }
    if !(0.0 <= f_min && f_min < f_max && f_max <= nyquist) {
        return Err(invalid(format!(
            "need 0 <= f_min < f_max <= {nyquist}, got f_min={f_min} f_max={f_max}"
        )));
    }
    let n_bins = fft_size / 2 + 1;
    let (mel_lo, mel_hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = sample_rate_hz as f64 / fft_size as f64;

    let mut weights = vec![0.0; n_mels * n_bins];
    let mut support = Vec::with_capacity(n_mels);
    for m in 0..n_mels {
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let row = &mut weights[m * n_bins..(m + 1) * n_bins];
        let (mut lo, mut hi) = (n_bins, 0);
        for (k, w) in row.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            let v = if f > left && f <= center {
                (f - left) / (center - left)
            } else if f > center && f < right {
                (right - f) / (right - center)
            } else {
                0.0
            };
            if v > 0.0 {
                *w = v;
                lo = lo.min(k);
                hi = hi.max(k + 1);
            }
        }
        if hi == 0 {
            return Err(invalid(format!(
                "mel filter {m} ({left:.1}-{right:.1} Hz) covers no FFT bin; \
                 too many mels ({n_mels}) for fft_size {fft_size}"
            )));
        }
        support.push((lo, hi));
    }
    Ok(MelFilterbank { n_mels, n_bins, weights, support })
}

/// Log-mel patch, row-major `[n_frames x n_mels]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogMelPatch {
    pub values: Vec<f64>,
    pub n_frames: usize,
    pub n_mels: usize,
    pub hop_s: f64,
}

impl LogMelPatch {
    pub fn frame(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_mels..(i + 1) * self.n_mels]
    }
}

/// `ln(max(spec * fb^T, floor))`.
pub fn log_mel(spec: &Spectrogram, fb: &MelFilterbank, floor: f64) -> Result<LogMelPatch> {
    if spec.n_bins != fb.n_bins {
        return Err(shape(format!(
            "spectrogram has {} bins but filterbank expects {}",
            spec.n_bins, fb.n_bins
        )));
    }
    let mut values = vec![0.0; spec.n_frames * fb.n_mels];
    for (f, out) in values.chunks_exact_mut(fb.n_mels).enumerate() {
        fb.project_frame(spec.frame(f), out);
        out.iter_mut().for_each(|v| *v = v.max(floor).ln());
    }
    Ok(LogMelPatch { values, n_frames: spec.n_frames, n_mels: fb.n_mels, hop_s: spec.hop_s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{stft_power, StftConfig};

    #[test]
    fn htk_mel_closed_forms() {
        assert_eq!(hz_to_mel(0.0), 0.0);
        let expected = 2595.0 * 2f64.log10();
        assert!((hz_to_mel(700.0) - expected).abs() < 1e-12);
        assert!((hz_to_mel(700.0) - 781.17).abs() < 0.01);
        for f in [0.0, 60.0, 1000.0, 7999.0] {
            assert!((mel_to_hz(hz_to_mel(f)) - f).abs() < 1e-9);
        }
    }

    #[test]
    fn filterbank_has_no_interior_holes() {
        for (sr, fft, n_mels) in [(16000, 512, 64), (8000, 512, 64), (16000, 1024, 40)] {
            let fmax = sr as f64 / 2.0;
            let fb = mel_filterbank(n_mels, fft, sr, 60.0, fmax).unwrap();
            let sums = fb.column_sums();
            let bin_hz = sr as f64 / fft as f64;
            for (k, s) in sums.iter().enumerate() {
                let f = k as f64 * bin_hz;
                if f > 60.0 && f < fmax {
                    assert!(*s > 0.0, "hole at bin {k} ({f} Hz)");
                }
            }
            for m in 0..n_mels {
                assert!(fb.row(m).iter().all(|&w| w >= 0.0));
                assert!(fb.row(m).iter().any(|&w| w > 0.0));
            }
        }
    }

    #[test]
    fn infeasible_filterbank_is_rejected() {
        assert!(mel_filterbank(128, 64, 8000, 0.0, 4000.0).is_err());
        assert!(mel_filterbank(1, 512, 8000, 0.0, 4000.0).is_err());
        assert!(mel_filterbank(16, 512, 8000, 100.0, 50.0).is_err());
        assert!(mel_filterbank(16, 512, 8000, 0.0, 5000.0).is_err());
    }

    #[test]
    fn zero_spectrogram_hits_the_floor() {
        let cfg = StftConfig::new(256, 128, 256).unwrap();
        let s = stft_power(&[0.0; 1024], cfg, 8000).unwrap();
        let fb = mel_filterbank(16, 256, 8000, 0.0, 4000.0).unwrap();
        let p = log_mel(&s, &fb, LOG_FLOOR).unwrap();
        for v in &p.values {
            assert!((v - (-23.025850929940457)).abs() < 1e-12);
        }
    }

    #[test]
    fn doubling_amplitude_shifts_by_ln4() {
        let cfg = StftConfig::new(256, 128, 200).unwrap();
        let mut rng = crate::seed::rng_from_seed(5);
        let x: Vec<f64> = (0..2048).map(|_| rand::Rng::gen_range(&mut rng, -0.4..0.4)).collect();
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let fb = mel_filterbank(24, 256, 8000, 60.0, 4000.0).unwrap();
        let a = log_mel(&stft_power(&x, cfg, 8000).unwrap(), &fb, LOG_FLOOR).unwrap();
        let b = log_mel(&stft_power(&x2, cfg, 8000).unwrap(), &fb, LOG_FLOOR).unwrap();
        for (u, v) in a.values.iter().zip(&b.values) {
            if *u > LOG_FLOOR.ln() + 1.0 {
                assert!((v - u - 4f64.ln()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn bin_count_mismatch_is_rejected() {
        let cfg = StftConfig::new(256, 128, 256).unwrap();
        let s = stft_power(&[0.0; 1024], cfg, 8000).unwrap();
        let fb = mel_filterbank(16, 512, 8000, 0.0, 4000.0).unwrap();
        assert!(matches!(log_mel(&s, &fb, LOG_FLOOR), Err(crate::Error::Shape(_))));
    }
}
