use std::fmt::Write as _;
use std::path::Path;

use crate::dsp::FrontEndConfig;
use crate::encoders::ModelConfig;
use crate::error::{Error, Result};
use crate::retrieval::ProbeSpec;
use crate::synth::{Scene, SynthConfig};
use crate::trainer::{Method, TrainConfig};

/// Named bundle of corpus and front-end defaults.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// 10 s clips at 16 kHz, 2000 dev / 200 eval pairs.
    Desk,
    /// 2 s clips at 8 kHz, 200 dev / 50 eval pairs.
    Test,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Desk => "desk",
            Preset::Test => "test",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "test" => Ok(Preset::Test),
            _ => Err(Error::Config(format!("unknown preset `{s}` (expected desk or test)"))),
        }
    }
}

/// Every setting of a run. Files use one `key = value` per line; `#`
/// starts a comment. The `preset` key selects the defaults every other
/// key overrides, wherever it appears.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub scene: Scene,
    pub seed: u64,
    pub n_dev: usize,
    pub n_eval: usize,
    pub synth: SynthConfig,
    pub frontend: FrontEndConfig,
    pub model: ModelConfig,
    pub method: Method,
    pub train: TrainConfig,
    pub topk: usize,
    pub probes: ProbeSpec,
}

/// Keys accepted in a config file, with a one-line description.
pub const KEYS: [(&str, &str); 30] = [
    ("preset", "desk | test: defaults for everything below"),
    ("scene", "rain | traffic"),
    ("seed", "master seed for synthesis, initialization and shuffling"),
    ("n_dev", "development pairs (desk 2000, test 200)"),
    ("n_eval", "evaluation pairs (desk 200, test 50)"),
    ("clip_seconds", "clip length (desk 10, test 2)"),
    ("sample_rate_hz", "corpus and front-end rate (desk 16000, test 8000)"),
    ("event_seconds", "event source length (desk 2.5, test 0.6)"),
    ("background_source_seconds", "background source length (desk 20, test 4)"),
    ("p_two_ops", "probability of two differences per pair (0.5)"),
    ("fft_size", "STFT size (512)"),
    ("hop", "STFT hop in samples (desk 160, test 80)"),
    ("win_length", "Hann window length (desk 400, test 200)"),
    ("n_mels", "mel bands (64)"),
    ("f_min", "lowest mel edge in Hz (60)"),
    ("embed_dim", "shared embedding dimension D (128)"),
    ("hidden_dim", "projection hidden width H (256)"),
    ("audio_backbone_dim", "frozen audio projection width (128)"),
    ("token_dim", "frozen token table width (64)"),
    ("dropout", "projection-block dropout (0.1)"),
    ("variant", "baseline | no-classif | with-classif (with-classif)"),
    ("batch_size", "training batch size (64)"),
    ("epochs", "training epochs (300)"),
    ("lr", "Adam learning rate (0.001)"),
    ("validation_fraction", "held-out share of the dev split (0.1)"),
    ("tau", "fixed logit temperature (0)"),
    ("progress_every", "epochs between progress lines, 0 for none (10)"),
    ("topk", "results per query (10)"),
    ("probes", "embedding-difference probes (thunder:100,dog:100)"),
    ("model_seed", "initialization seed, defaults to seed"),
];

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let (synth, frontend, n_dev, n_eval) = match preset {
            Preset::Desk => (SynthConfig::desk(), FrontEndConfig::desk(), 2000, 200),
            Preset::Test => (SynthConfig::test_preset(), FrontEndConfig::test_preset(), 200, 50),
        };
        Self {
            preset,
            scene: Scene::Rain,
            seed: 0,
            n_dev,
            n_eval,
            synth,
            frontend,
            model: ModelConfig::default(),
            method: Method::WithClassif,
            train: TrainConfig { progress_every: 10, ..TrainConfig::for_method(Method::WithClassif) },
            topk: 10,
            probes: ProbeSpec::default(),
        }
    }

    /// Builds a config from `(key, value)` pairs applied in order over the
    /// defaults of the last `preset` among them.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let preset = match pairs.iter().rev().find(|(k, _)| k == "preset") {
            Some((_, v)) => v.parse()?,
            None => Preset::Desk,
        };
        let mut cfg = Self::preset(preset);
        let mut model_seed = None;
        for (k, v) in pairs {
            if k == "model_seed" {
                model_seed = Some(parse(k, v)?);
            } else if k != "preset" {
                cfg.set(k, v)?;
            }
        }
        cfg.model.seed = model_seed.unwrap_or(cfg.seed);
        cfg.train.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Splits config text into `(key, value)` pairs, rejecting unknown keys.
    pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.iter().any(|(key, _)| *key == k) {
                return Err(Error::Config(format!("line {}: unknown key `{k}`", n + 1)));
            }
            out.push((k.to_string(), v.to_string()));
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_pairs(&Self::parse_pairs(text)?)
    }

    pub fn read_pairs(path: &Path) -> Result<Vec<(String, String)>> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_pairs(&text)
    }

    fn set(&mut self, k: &str, v: &str) -> Result<()> {
        match k {
            "scene" => self.scene = v.parse().map_err(|_| Error::Config(format!("unknown scene `{v}`")))?,
            "seed" => self.seed = parse(k, v)?,
            "n_dev" => self.n_dev = parse(k, v)?,
            "n_eval" => self.n_eval = parse(k, v)?,
            "clip_seconds" => self.synth.clip_seconds = parse(k, v)?,
            "sample_rate_hz" => {
                self.synth.sample_rate_hz = parse(k, v)?;
                self.frontend.sample_rate_hz = self.synth.sample_rate_hz;
            }
            "event_seconds" => self.synth.event_seconds = parse(k, v)?,
            "background_source_seconds" => self.synth.background_source_seconds = parse(k, v)?,
            "p_two_ops" => self.synth.p_two_ops = parse(k, v)?,
            "fft_size" => self.frontend.fft_size = parse(k, v)?,
            "hop" => self.frontend.hop = parse(k, v)?,
            "win_length" => self.frontend.win_length = parse(k, v)?,
            "n_mels" => self.frontend.n_mels = parse(k, v)?,
            "f_min" => self.frontend.f_min = parse(k, v)?,
            "embed_dim" => self.model.embed_dim = parse(k, v)?,
            "hidden_dim" => self.model.hidden_dim = parse(k, v)?,
            "audio_backbone_dim" => self.model.audio_backbone_dim = parse(k, v)?,
            "token_dim" => self.model.token_dim = parse(k, v)?,
            "dropout" => self.model.dropout = parse(k, v)?,
            "variant" => {
                self.method = v.parse()?;
                self.train.variant = self.method.variant();
                self.train.rho = self.method.rho();
            }
            "batch_size" => self.train.batch_size = parse(k, v)?,
            "epochs" => self.train.epochs = parse(k, v)?,
            "lr" => self.train.lr = parse(k, v)?,
            "validation_fraction" => self.train.validation_fraction = parse(k, v)?,
            "tau" => self.train.tau = parse(k, v)?,
            "progress_every" => self.train.progress_every = parse(k, v)?,
            "topk" => self.topk = parse(k, v)?,
            "probes" => self.probes = v.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            _ => return Err(Error::Config(format!("unknown key `{k}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        self.synth.validate().map_err(cfg)?;
        self.frontend.stft().validate().map_err(cfg)?;
        crate::dsp::FrontEnd::new(self.frontend).map_err(cfg)?;
        self.model.validate()?;
        self.train.validate()?;
        self.probes.validate().map_err(cfg)?;
        if self.n_dev == 0 || self.n_eval == 0 {
            return Err(Error::Config("n_dev and n_eval must be positive".into()));
        }
        if self.topk == 0 {
            return Err(Error::Config("topk must be positive".into()));
        }
        if self.synth.clip_samples() < self.frontend.fft_size {
            return Err(Error::Config("clips are shorter than one STFT frame".into()));
        }
        Ok(())
    }

    /// The resolved configuration in file syntax.
    pub fn to_text(&self) -> String {
        let s = &self.synth;
        let f = &self.frontend;
        let m = &self.model;
        let t = &self.train;
        let probes: Vec<String> = self.probes.entries.iter().map(|(c, n)| format!("{}:{n}", c.name())).collect();
        let mut out = String::new();
        let rows: Vec<(&str, String)> = vec![
            ("preset", self.preset.name().into()),
            ("scene", self.scene.name().into()),
            ("seed", self.seed.to_string()),
            ("n_dev", self.n_dev.to_string()),
            ("n_eval", self.n_eval.to_string()),
            ("clip_seconds", s.clip_seconds.to_string()),
            ("sample_rate_hz", s.sample_rate_hz.to_string()),
            ("event_seconds", s.event_seconds.to_string()),
            ("background_source_seconds", s.background_source_seconds.to_string()),
            ("p_two_ops", s.p_two_ops.to_string()),
            ("fft_size", f.fft_size.to_string()),
            ("hop", f.hop.to_string()),
            ("win_length", f.win_length.to_string()),
            ("n_mels", f.n_mels.to_string()),
            ("f_min", f.f_min.to_string()),
            ("embed_dim", m.embed_dim.to_string()),
            ("hidden_dim", m.hidden_dim.to_string()),
            ("audio_backbone_dim", m.audio_backbone_dim.to_string()),
            ("token_dim", m.token_dim.to_string()),
            ("dropout", m.dropout.to_string()),
            ("model_seed", m.seed.to_string()),
            ("variant", self.method.name().into()),
            ("batch_size", t.batch_size.to_string()),
            ("epochs", t.epochs.to_string()),
            ("lr", t.lr.to_string()),
            ("validation_fraction", t.validation_fraction.to_string()),
            ("tau", t.tau.to_string()),
            ("progress_every", t.progress_every.to_string()),
            ("topk", self.topk.to_string()),
            ("probes", probes.join(",")),
        ];
        for (k, v) in rows {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::preset(Preset::Desk)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::Variant;

    #[test]
    fn defaults_and_overrides() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.train.epochs, 300);
        let c = RunConfig::parse("epochs = 5\n# comment\nscene=traffic  # trailing\npreset = test\n").unwrap();
        assert_eq!(c.preset, Preset::Test);
        assert_eq!(c.synth.sample_rate_hz, 8000);
        assert_eq!(c.train.epochs, 5);
        assert_eq!(c.scene, Scene::Traffic);
    }

    #[test]
    fn variant_sets_loss() {
        let c = RunConfig::parse("variant = baseline").unwrap();
        assert_eq!((c.train.variant, c.train.rho), (Variant::Baseline, 0.0));
        let c = RunConfig::parse("variant = no-classif").unwrap();
        assert_eq!((c.train.variant, c.train.rho), (Variant::Proposed, 0.0));
    }

    #[test]
    fn rejects_bad_input() {
        for text in ["colour = red", "epochs", "epochs = many", "scene = forest", "validation_fraction = 1.5", "preset = huge"] {
            assert!(matches!(RunConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn text_round_trip() {
        let c = RunConfig::parse("preset = test\nseed = 9\nmodel_seed = 4\nprobes = dog:3,thunder:2").unwrap();
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
        assert_eq!(c.model.seed, 4);
        assert_eq!(c.train.seed, 9);
    }
}
