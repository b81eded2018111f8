//! Procedural stand-ins for recorded source audio. Each class has a
//! distinctive spectral/temporal signature; per-seed parameters vary the
//! details so two renderings of one class are similar but not identical.

use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seed::{rng_from_seed, Rng};

use super::SoundClass;

/// Peak level every rendered source is normalized to.
pub const SOURCE_PEAK: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Dev,
    Eval,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Dev => "dev",
            Split::Eval => "eval",
        }
    }

    /// Forces the top bit of a raw seed so dev and eval source seeds can
    /// never coincide.
    pub fn tag_seed(self, raw: u64) -> u64 {
        match self {
            Split::Dev => raw & !(1 << 63),
            Split::Eval => raw | (1 << 63),
        }
    }

    pub fn owns_seed(self, seed: u64) -> bool {
        self.tag_seed(seed) == seed
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceClip {
    pub class_id: SoundClass,
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
    pub source_seed: u64,
    pub split: Split,
}

impl SourceClip {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

/// Renders `duration_s` seconds of class `class_id`. Bit-identical for equal
/// arguments.
pub fn synthesize_source(
    class_id: SoundClass,
    duration_s: f64,
    sample_rate_hz: u32,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(invalid(format!("duration must be positive, got {duration_s}")));
    }
    if sample_rate_hz < 4000 {
        return Err(invalid(format!("sample rate {sample_rate_hz} Hz is below 4 kHz")));
    }
    let n = (duration_s * sample_rate_hz as f64).round() as usize;
    if n == 0 {
        return Err(invalid("duration rounds to zero samples"));
    }
    let mut rng = rng_from_seed(seed);
    let sr = sample_rate_hz as f64;
    let mut x = match class_id {
        SoundClass::Rain => rain(n, sr, &mut rng),
        SoundClass::CarPassingBy => car_passing(n, sr, &mut rng),
        SoundClass::Dog => dog(n, sr, &mut rng),
        SoundClass::ChirpingBirds => birds(n, sr, &mut rng),
        SoundClass::Thunder => thunder(n, sr, &mut rng),
        SoundClass::Footsteps => footsteps(n, sr, &mut rng),
        SoundClass::CarHorn => car_horn(n, sr, &mut rng),
        SoundClass::ChurchBells => bells(n, sr, &mut rng),
    };
    peak_normalize(&mut x, SOURCE_PEAK);
    Ok(x)
}

/// [`synthesize_source`] wrapped with provenance.
pub fn synthesize_clip(
    class_id: SoundClass,
    duration_s: f64,
    sample_rate_hz: u32,
    seed: u64,
    split: Split,
) -> Result<SourceClip> {
    let samples = synthesize_source(class_id, duration_s, sample_rate_hz, seed)?;
    Ok(SourceClip { class_id, samples, sample_rate_hz, source_seed: seed, split })
}

pub(crate) fn peak_normalize(x: &mut [f64], peak: f64) {
    let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m > 0.0 {
        let g = peak / m;
        x.iter_mut().for_each(|v| *v *= g);
    }
}

/// RBJ biquad, direct form I.
#[derive(Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    x: [f64; 2],
    y: [f64; 2],
}

impl Biquad {
    fn from_coeffs(b: [f64; 3], a0: f64, a: [f64; 2]) -> Self {
        Self { b: b.map(|v| v / a0), a: a.map(|v| v / a0), x: [0.0; 2], y: [0.0; 2] }
    }

    fn lowpass(f: f64, q: f64, sr: f64) -> Self {
        let w = 2.0 * PI * f.min(0.45 * sr) / sr;
        let (s, c) = w.sin_cos();
        let al = s / (2.0 * q);
        Self::from_coeffs([(1.0 - c) / 2.0, 1.0 - c, (1.0 - c) / 2.0], 1.0 + al, [-2.0 * c, 1.0 - al])
    }

    fn highpass(f: f64, q: f64, sr: f64) -> Self {
        let w = 2.0 * PI * f.min(0.45 * sr) / sr;
        let (s, c) = w.sin_cos();
        let al = s / (2.0 * q);
        Self::from_coeffs([(1.0 + c) / 2.0, -(1.0 + c), (1.0 + c) / 2.0], 1.0 + al, [-2.0 * c, 1.0 - al])
    }

    fn bandpass(f: f64, q: f64, sr: f64) -> Self {
        let w = 2.0 * PI * f.min(0.45 * sr) / sr;
        let (s, c) = w.sin_cos();
        let al = s / (2.0 * q);
        Self::from_coeffs([al, 0.0, -al], 1.0 + al, [-2.0 * c, 1.0 - al])
    }

    fn tick(&mut self, x0: f64) -> f64 {
        let y0 = self.b[0] * x0 + self.b[1] * self.x[0] + self.b[2] * self.x[1]
            - self.a[0] * self.y[0]
            - self.a[1] * self.y[1];
        self.x = [x0, self.x[0]];
        self.y = [y0, self.y[0]];
        y0
    }

    fn run(mut self, x: &mut [f64]) {
        x.iter_mut().for_each(|v| *v = self.tick(*v));
    }
}

fn white(n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Paul Kellet's economy pink-noise filter.
fn pink(n: usize, rng: &mut Rng) -> Vec<f64> {
    let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
    (0..n)
        .map(|_| {
            let w: f64 = rng.gen_range(-1.0..1.0);
            b0 = 0.99765 * b0 + w * 0.0990460;
            b1 = 0.96300 * b1 + w * 0.2965164;
            b2 = 0.57000 * b2 + w * 1.0526913;
            b0 + b1 + b2 + w * 0.1848
        })
        .collect()
}

/// Attack/decay envelope of `len` samples.
fn burst_env(len: usize, attack: usize, decay_tau: f64) -> impl Iterator<Item = f64> {
    (0..len).map(move |i| {
        let a = if i < attack { i as f64 / attack as f64 } else { 1.0 };
        a * (-((i.saturating_sub(attack)) as f64) / decay_tau).exp()
    })
}

fn rain(n: usize, sr: f64, rng: &mut Rng) -> Vec<f64> {
    let cutoff = rng.gen_range(1500.0..5000.0);
    let tint_f = rng.gen_range(600.0..3000.0);
    let tint_g = rng.gen_range(0.0..0.6);
    let mod_rate = rng.gen_range(0.15..1.5);
    let depth = rng.gen_range(0.2..0.6);
    let phase = rng.gen_range(0.0..2.0 * PI);

    let mut body = pink(n, rng);
    Biquad::lowpass(cutoff, 0.707, sr).run(&mut body);
    let mut tint = white(n, rng);
    Biquad::bandpass(tint_f, 2.0, sr).run(&mut tint);
    body.iter_mut()
        .zip(&tint)
        .enumerate()
        .map(|(i, (b, t))| {
            let am = 1.0 + depth * (2.0 * PI * mod_rate * i as f64 / sr + phase).sin();
            (*b + tint_g * 4.0 * t) * am
        })
        .collect()
}

fn car_passing(n: usize, sr: f64, rng: &mut Rng) -> Vec<f64> {
    let center = rng.gen_range(250.0..900.0);
    let q = rng.gen_range(0.7..1.5);
    let floor = rng.gen_range(0.08..0.25);
    let dur = n as f64 / sr;
    let mut passes = Vec::new();
    let mut t = rng.gen_range(-1.0..2.0);
    while t < dur + 1.0 {
        passes.push((t, rng.gen_range(0.6..1.5), rng.gen_range(0.5..1.0)));
        t += rng.gen_range(2.5..6.0);
    }
    let mut x = white(n, rng);
    Biquad::bandpass(center, q, sr).run(&mut x);
    let mut rumble = white(n, rng);
    Biquad::lowpass(110.0, 0.707, sr).run(&mut rumble);
    x.iter()
        .zip(&rumble)
        .enumerate()
        .map(|(i, (v, r))| {
            let ti = i as f64 / sr;
            let env: f64 = floor
                + passes
                    .iter()
                    .map(|&(c, w, a)| a * (-((ti - c) / w).powi(2)).exp())
                    .sum::<f64>();
            env * (v + 0.5 * r)
        })
        .collect()
}

fn dog(n: usize, sr: f64, rng: &mut Rng) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let center = rng.gen_range(450.0..650.0);
    let mut pos = (rng.gen_range(0.0..0.15) * sr) as usize;
    while pos < n {
        let len = (rng.gen_range(0.12..0.25) * sr) as usize;
        let mut burst = white(len, rng);
        let mut hp = Biquad::highpass(300.0, 0.707, sr);
        let mut lp = Biquad::lowpass(900.0, 0.707, sr);
        let mut bp = Biquad::bandpass(center, 1.2, sr);
        let tau = len as f64 / 3.0;
        for (b, e) in burst.iter_mut().zip(burst_env(len, (0.01 * sr) as usize, tau)) {
            let v = lp.tick(hp.tick(*b));
            *b = (v + 1.5 * bp.tick(v)) * e;
        }
        for (o, b) in out[pos..].iter_mut().zip(&burst) {
            *o += b;
        }
        pos += len + (rng.gen_range(0.2..0.45) * sr) as usize;
    }
    out
}

fn birds(n: usize, sr: f64, rng: &mut Rng) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let f_hi = 6000f64.min(0.45 * sr);
    let f_lo = 2000.0;
    let mut pos = (rng.gen_range(0.0..0.1) * sr) as usize;
    while pos < n {
        let len = (rng.gen_range(0.06..0.15) * sr) as usize;
        let start = rng.gen_range(f_lo..(f_lo + 0.3 * (f_hi - f_lo)));
        let mut phase = 0.0;
        for (i, o) in out[pos..].iter_mut().take(len).enumerate() {
            let frac = i as f64 / len as f64;
            let f = start + (f_hi - start) * frac;
            phase += 2.0 * PI * f / sr;
            *o += (PI * frac).sin() * phase.sin();
        }
        pos += len + (rng.gen_range(0.05..0.25) * sr) as usize;
    }
    out
}

fn thunder(n: usize, sr: f64, rng: &mut Rng) -> Vec<f64> {
    let mut x = white(n, rng);
    let cutoff = rng.gen_range(70.0..120.0);
    Biquad::lowpass(cutoff, 0.707, sr).run(&mut x);
    Biquad::lowpass(cutoff, 0.707, sr).run(&mut x);
    Biquad::lowpass(cutoff, 0.707, sr).run(&mut x);
    let onset = (rng.gen_range(0.0..0.1) * n as f64) as usize;
    let tau = rng.gen_range(0.35..0.6) * n as f64;
    let attack = (0.08 * sr) as usize;
    for (i, v) in x.iter_mut().enumerate() {
        let env = if i < onset {
            0.0
        } else {
            let k = i - onset;
            let a = if k < attack { k as f64 / attack as f64 } else { 1.0 };
            a * (-(k as f64) / tau).exp()
        };
        *v *= env;
    }
    x
}

fn footsteps(n: usize, sr: f64, rng: &mut Rng) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let period = rng.gen_range(0.45..0.65);
    let f = rng.gen_range(90.0..180.0);
    let mut t = rng.gen_range(0.0..0.2);
    while ((t * sr) as usize) < n {
        let pos = (t * sr) as usize;
        let len = ((0.15 * sr) as usize).min(n - pos);
        let mut click = white(len, rng);
        Biquad::lowpass(1000.0, 0.707, sr).run(&mut click);
        let gain = rng.gen_range(0.7..1.0);
        for (i, o) in out[pos..pos + len].iter_mut().enumerate() {
            let ti = i as f64 / sr;
            let thump = (2.0 * PI * f * ti).sin() * (-ti / 0.025).exp();
            *o += gain * (thump + 0.6 * click[i] * (-ti / 0.005).exp());
        }
        t += period * rng.gen_range(0.92..1.08);
    }
    out
}

fn car_horn(n: usize, sr: f64, rng: &mut Rng) -> Vec<f64> {
    const F0: f64 = 440.0;
    let dur = n as f64 / sr;
    // one long honk or two shorter ones, always covering most of the clip
    let honks: Vec<(f64, f64)> = if rng.gen_bool(0.5) || dur < 0.6 {
        vec![(0.0, dur)]
    } else {
        let split = dur * rng.gen_range(0.4..0.6);
        let gap = (0.1f64).min(0.2 * dur);
        vec![(0.0, split), (split + gap, dur)]
    };
    let ramp = 0.02 * sr;
    let max_h = ((0.45 * sr) / F0).floor().min(5.0) as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let env = honks
                .iter()
                .filter(|(s, e)| t >= *s && t < *e)
                .map(|(s, e)| {
                    let a = ((t - s) * sr / ramp).min(1.0);
                    let r = ((e - t) * sr / ramp).min(1.0);
                    a.min(r)
                })
                .sum::<f64>();
            let tone: f64 = (1..=max_h)
                .map(|k| (2.0 * PI * F0 * k as f64 * t).sin() / k as f64)
                .sum();
            env * tone
        })
        .collect()
}

fn bells(n: usize, sr: f64, rng: &mut Rng) -> Vec<f64> {
    const RATIOS: [f64; 7] = [0.5, 1.0, 1.19, 1.5, 2.0, 2.74, 3.0];
    let f0 = rng.gen_range(350.0..550.0);
    let mut out = vec![0.0; n];
    let mut t = rng.gen_range(0.0..0.1);
    while ((t * sr) as usize) < n {
        let pos = (t * sr) as usize;
        for (k, &r) in RATIOS.iter().enumerate() {
            let f = f0 * r;
            if f >= 0.45 * sr {
                continue;
            }
            let tau = 1.5 / r;
            let amp = 1.0 / (1.0 + k as f64 * 0.5);
            let ph = rng.gen_range(0.0..2.0 * PI);
            for (i, o) in out[pos..].iter_mut().enumerate() {
                let ti = i as f64 / sr;
                *o += amp * (2.0 * PI * f * ti + ph).sin() * (-ti / tau).exp();
            }
        }
        t += rng.gen_range(1.2..2.0);
    }
    out
}
