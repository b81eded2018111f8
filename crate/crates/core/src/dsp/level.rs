use crate::error::{invalid, shape, Result};

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// RMS level in dB (full scale 1.0). Silence maps to negative infinity.
pub fn rms_db(x: &[f64]) -> f64 {
    20.0 * rms(x).log10()
}

/// Gain that puts `layer` exactly `snr_db` below `base` in RMS terms.
/// A silent layer gets gain 0.
pub fn snr_gain(base: &[f64], layer: &[f64], snr_db: f64) -> Result<f64> {
    let base_rms = rms(base);
    if base_rms == 0.0 {
        return Err(invalid("cannot mix at an SNR against a silent base"));
    }
    let layer_rms = rms(layer);
    if layer_rms == 0.0 {
        return Ok(0.0);
    }
    Ok(base_rms / layer_rms * 10f64.powf(-snr_db / 20.0))
}

/// `base + g * layer` where `g` puts the layer `snr_db` below the base.
pub fn mix_at_snr(base: &[f64], layer: &[f64], snr_db: f64) -> Result<Vec<f64>> {
    if base.len() != layer.len() {
        return Err(shape(format!("base has {} samples, layer {}", base.len(), layer.len())));
    }
    let g = snr_gain(base, layer, snr_db)?;
    Ok(base.iter().zip(layer).map(|(b, l)| b + g * l).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(n: usize, amp: f64, period: f64) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * i as f64 / period).sin())
            .collect()
    }

    #[test]
    fn equal_rms_at_zero_snr_is_unit_gain() {
        let a = tone(1000, 0.5, 50.0);
        let b = tone(1000, 0.5, 20.0);
        assert!((snr_gain(&a, &b, 0.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn twenty_db_is_a_factor_of_ten() {
        let base = tone(800, 0.8, 40.0);
        let layer = tone(800, 0.3, 13.0);
        let g = snr_gain(&base, &layer, 20.0).unwrap();
        let scaled: Vec<f64> = layer.iter().map(|v| v * g).collect();
        assert!((rms(&base) / rms(&scaled) - 10.0).abs() < 1e-12);
        assert!((rms_db(&base) - rms_db(&scaled) - 20.0).abs() < 1e-10);
    }

    #[test]
    fn zero_layer_returns_base() {
        let base = tone(100, 0.3, 10.0);
        assert_eq!(mix_at_snr(&base, &[0.0; 100], 3.0).unwrap(), base);
    }

    #[test]
    fn silent_base_is_rejected() {
        assert!(mix_at_snr(&[0.0; 10], &[1.0; 10], 0.0).is_err());
        assert!(rms_db(&[0.0; 4]).is_infinite());
    }
}
