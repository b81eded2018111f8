use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::dsp::{FrontEnd, FrontEndConfig};
use crate::error::{invalid, shape, Error, Result};
use crate::nn::ops::{linear, sigmoid};
use crate::nn::{load_checkpoint, matmul, save_checkpoint, CheckpointData, ParamStore, Tensor};
use crate::seed::{derive_seed, rng_from_seed, Rng};
use crate::synth::Scene;

use super::projection::ProjectionBlock;
use super::vocab::TextVocab;

pub const AUDIO_MEAN: &str = "audio_backbone.mean";
pub const AUDIO_SCALE: &str = "audio_backbone.scale";
pub const AUDIO_R: &str = "audio_backbone.r";
pub const TOKEN_TABLE: &str = "text_backbone.table";
pub const CLASSIFIER_W: &str = "classifier.w";
pub const CLASSIFIER_B: &str = "classifier.b";

/// Number of multi-hot label slots (background plus four events).
pub const N_LABELS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Shared embedding dimension `D`.
    pub embed_dim: usize,
    /// Projection-block hidden width `H`.
    pub hidden_dim: usize,
    /// Output width of the frozen audio backbone.
    pub audio_backbone_dim: usize,
    /// Width of the frozen token table.
    pub token_dim: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { embed_dim: 128, hidden_dim: 256, audio_backbone_dim: 128, token_dim: 64, dropout: 0.1, seed: 0 }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.hidden_dim == 0 || self.audio_backbone_dim == 0 || self.token_dim == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} must be in [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Audio encoder `A`, text encoder `T` and classifier head `C`.
///
/// The audio path is waveform -> pooled log-mel statistics -> frozen
/// standardization and random projection -> `audio_proj` block. The text
/// path is tokens -> mean of frozen token-table rows (including `[CLS]`) ->
/// `text_proj` block. One audio block serves both query and target clips.
pub struct Model {
    config: ModelConfig,
    scene: Scene,
    clip_samples: usize,
    frontend: FrontEnd,
    vocab: TextVocab,
    audio_block: ProjectionBlock,
    text_block: ProjectionBlock,
    store: ParamStore,
    tags: BTreeMap<String, String>,
    text_calls: AtomicU64,
}

impl Clone for Model {
    fn clone(&self) -> Self {
        Self {
            config: self.config,
            scene: self.scene,
            clip_samples: self.clip_samples,
            frontend: self.frontend.clone(),
            vocab: self.vocab.clone(),
            audio_block: self.audio_block.clone(),
            text_block: self.text_block.clone(),
            store: self.store.clone(),
            tags: self.tags.clone(),
            text_calls: AtomicU64::new(self.text_calls()),
        }
    }
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("config", &self.config)
            .field("scene", &self.scene)
            .field("clip_samples", &self.clip_samples)
            .field("frontend", self.frontend.config())
            .finish_non_exhaustive()
    }
}

impl Model {
    pub fn new(config: ModelConfig, scene: Scene, frontend: FrontEndConfig, clip_samples: usize) -> Result<Self> {
        config.validate()?;
        let frontend = FrontEnd::new(frontend)?;
        let vocab = TextVocab::from_grammar();
        let mut model = Self::assemble(config, scene, frontend, clip_samples, vocab, ParamStore::new());
        model.init_params();
        Ok(model)
    }

    fn assemble(
        config: ModelConfig,
        scene: Scene,
        frontend: FrontEnd,
        clip_samples: usize,
        vocab: TextVocab,
        store: ParamStore,
    ) -> Self {
        let audio_block =
            ProjectionBlock::new("audio_proj", config.audio_backbone_dim, config.hidden_dim, config.embed_dim, config.dropout);
        let text_block =
            ProjectionBlock::new("text_proj", config.token_dim, config.hidden_dim, config.embed_dim, config.dropout);
        Self {
            config,
            scene,
            clip_samples,
            frontend,
            vocab,
            audio_block,
            text_block,
            store,
            tags: BTreeMap::new(),
            text_calls: AtomicU64::new(0),
        }
    }

    fn init_params(&mut self) {
        let c = self.config;
        let f_in = self.frontend.config().feature_dim();
        let rng = |tag: &str| rng_from_seed(derive_seed(c.seed, tag, 0));
        let s = &mut self.store;
        s.insert_frozen(AUDIO_MEAN, Tensor::zeros(&[f_in]));
        s.insert_frozen(AUDIO_SCALE, Tensor::vector(vec![1.0; f_in]));
        s.insert_frozen(AUDIO_R, Tensor::uniform(&[f_in, c.audio_backbone_dim], 1.0 / (f_in as f64).sqrt(), &mut rng("audio_backbone")));
        s.insert_frozen(TOKEN_TABLE, Tensor::uniform(&[self.vocab.len(), c.token_dim], 1.0, &mut rng("text_backbone")));
        self.audio_block.init(s, &mut rng("audio_proj"));
        self.text_block.init(s, &mut rng("text_proj"));
        let sc = 1.0 / (c.embed_dim as f64).sqrt();
        s.insert(CLASSIFIER_W, Tensor::uniform(&[c.embed_dim, N_LABELS], sc, &mut rng("classifier")));
        s.insert(CLASSIFIER_B, Tensor::zeros(&[N_LABELS]));
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn scene(&self) -> Scene {
        self.scene
    }

    pub fn clip_samples(&self) -> usize {
        self.clip_samples
    }

    pub fn frontend(&self) -> &FrontEnd {
        &self.frontend
    }

    pub fn vocab(&self) -> &TextVocab {
        &self.vocab
    }

    pub fn audio_block(&self) -> &ProjectionBlock {
        &self.audio_block
    }

    pub fn text_block(&self) -> &ProjectionBlock {
        &self.text_block
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Free-form metadata persisted with the checkpoint.
    pub fn tag(&self, key: &str) -> Option<&str> {
        self.tags.get(key).map(String::as_str)
    }

    pub fn set_tag(&mut self, key: &str, value: &str) {
        self.tags.insert(key.to_string(), value.to_string());
    }

    /// Names of the tensors that no optimizer step may touch.
    pub fn backbone_names() -> [&'static str; 4] {
        [AUDIO_MEAN, AUDIO_SCALE, AUDIO_R, TOKEN_TABLE]
    }

    /// How many times any part of the text encoder has run.
    pub fn text_calls(&self) -> u64 {
        self.text_calls.load(Ordering::Relaxed)
    }

    /// Sets the frozen per-feature standardization of the audio backbone
    /// from pooled features (one row per clip).
    pub fn fit_audio_normalization(&mut self, pooled: &Tensor) -> Result<()> {
        let f = self.frontend.config().feature_dim();
        if pooled.shape().len() != 2 || pooled.cols() != f || pooled.rows() == 0 {
            return Err(shape(format!("expected [N x {f}] pooled features, got {:?}", pooled.shape())));
        }
        let n = pooled.rows() as f64;
        let mean = pooled.sum_rows().map(|v| v / n);
        let mut var = vec![0.0; f];
        for r in 0..pooled.rows() {
            for (j, v) in pooled.row(r).iter().enumerate() {
                var[j] += (v - mean.data()[j]).powi(2) / n;
            }
        }
        let scale = var.iter().map(|v| 1.0 / v.sqrt().max(1e-6)).collect();
        *self.store.value_mut(AUDIO_MEAN)? = mean;
        *self.store.value_mut(AUDIO_SCALE)? = Tensor::vector(scale);
        Ok(())
    }

    /// Pooled log-mel statistics of one clip.
    pub fn pooled_features(&self, waveform: &[f64]) -> Result<Vec<f64>> {
        if waveform.len() != self.clip_samples {
            return Err(invalid(format!("clip has {} samples, model expects {}", waveform.len(), self.clip_samples)));
        }
        self.frontend.features(waveform)
    }

    /// Frozen audio backbone over pooled features, `[N x F_in] -> [N x F]`.
    pub fn audio_backbone(&self, pooled: &Tensor) -> Result<Tensor> {
        let mean = self.store.value(AUDIO_MEAN)?;
        let scale = self.store.value(AUDIO_SCALE)?;
        if pooled.shape().len() != 2 || pooled.cols() != mean.len() {
            return Err(shape(format!("expected [N x {}] pooled features, got {:?}", mean.len(), pooled.shape())));
        }
        let mut x = pooled.clone();
        let f = x.cols();
        for row in x.data_mut().chunks_exact_mut(f) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - mean.data()[j]) * scale.data()[j];
            }
        }
        matmul(&x, false, self.store.value(AUDIO_R)?, false)
    }

    /// Frozen text backbone: mean of token-table rows per text, summed in
    /// id order so that word order cannot change the result.
    pub fn text_backbone<S: AsRef<str>>(&self, texts: &[S]) -> Result<Tensor> {
        self.text_calls.fetch_add(1, Ordering::Relaxed);
        let table = self.store.value(TOKEN_TABLE)?;
        let d = table.cols();
        let mut out = Tensor::zeros(&[texts.len(), d]);
        for (i, t) in texts.iter().enumerate() {
            let mut ids = self.vocab.encode(t.as_ref())?;
            ids.sort_unstable();
            let row = out.row_mut(i);
            for &id in &ids {
                row.iter_mut().zip(table.row(id)).for_each(|(o, v)| *o += v);
            }
            row.iter_mut().for_each(|o| *o /= ids.len() as f64);
        }
        Ok(out)
    }

    /// Text projection block; counted as a text-encoder call.
    pub fn text_head(
        &self,
        store: &ParamStore,
        x: &Tensor,
        rng: Option<&mut Rng>,
    ) -> Result<(Tensor, super::projection::BlockCache)> {
        self.text_calls.fetch_add(1, Ordering::Relaxed);
        self.text_block.forward(store, x, rng)
    }

    /// Classifier logits `e W + b` (before the sigmoid).
    pub fn classifier_logits(&self, store: &ParamStore, e: &Tensor) -> Result<Tensor> {
        linear(e, store.value(CLASSIFIER_W)?, store.value(CLASSIFIER_B)?)
    }

    /// Eval-mode audio embeddings from backbone outputs.
    pub fn embed_audio(&self, backbone_out: &Tensor) -> Result<Tensor> {
        Ok(self.audio_block.forward(&self.store, backbone_out, None)?.0)
    }

    /// Eval-mode text embeddings from backbone outputs.
    pub fn embed_text(&self, backbone_out: &Tensor) -> Result<Tensor> {
        Ok(self.text_head(&self.store, backbone_out, None)?.0)
    }

    pub fn encode_audio(&self, waveform: &[f64]) -> Result<Vec<f64>> {
        let pooled = Tensor::matrix(1, self.frontend.config().feature_dim(), self.pooled_features(waveform)?)?;
        Ok(self.embed_audio(&self.audio_backbone(&pooled)?)?.into_data())
    }

    pub fn encode_text(&self, text: &str) -> Result<Vec<f64>> {
        Ok(self.embed_text(&self.text_backbone(&[text])?)?.into_data())
    }

    /// Per-class presence probabilities for one audio embedding.
    pub fn classify(&self, e: &[f64]) -> Result<Vec<f64>> {
        let e = Tensor::matrix(1, e.len(), e.to_vec())?;
        Ok(sigmoid(&self.classifier_logits(&self.store, &e)?).into_data())
    }

    pub fn to_checkpoint(&self) -> Result<CheckpointData> {
        let mut meta = vec![
            ("model_config".to_string(), serde_json::to_string(&self.config)?),
            ("frontend".to_string(), serde_json::to_string(self.frontend.config())?),
            ("scene".to_string(), self.scene.name().to_string()),
            ("clip_samples".to_string(), self.clip_samples.to_string()),
        ];
        meta.extend(self.tags.iter().map(|(k, v)| (format!("tag.{k}"), v.clone())));
        Ok(CheckpointData { store: self.store.clone(), vocab: self.vocab.tokens().to_vec(), meta })
    }

    pub fn from_checkpoint(ckpt: CheckpointData) -> Result<Self> {
        let get = |k: &str| {
            ckpt.meta
                .iter()
                .find(|(key, _)| key == k)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::Checkpoint(format!("missing metadata `{k}`")))
        };
        let config: ModelConfig = serde_json::from_str(get("model_config")?)?;
        let frontend: FrontEndConfig = serde_json::from_str(get("frontend")?)?;
        let scene: Scene = get("scene")?.parse()?;
        let clip_samples: usize =
            get("clip_samples")?.parse().map_err(|_| Error::Checkpoint("bad `clip_samples`".into()))?;
        let vocab = TextVocab::from_tokens(ckpt.vocab.clone())?;
        let reference = Self::new(config, scene, frontend, clip_samples)?;
        for (name, p) in reference.store.iter() {
            let got = ckpt.store.value(name).map_err(|_| Error::Checkpoint(format!("missing parameter `{name}`")))?;
            let want = if name == TOKEN_TABLE { vec![vocab.len(), config.token_dim] } else { p.value.shape().to_vec() };
            if got.shape() != want.as_slice() {
                return Err(Error::Checkpoint(format!("parameter `{name}` has shape {:?}", got.shape())));
            }
        }
        for name in Self::backbone_names() {
            if !ckpt.store.is_frozen(name)? {
                return Err(Error::Checkpoint(format!("backbone tensor `{name}` is not frozen")));
            }
        }
        let tags = ckpt
            .meta
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("tag.").map(|k| (k.to_string(), v.clone())))
            .collect();
        let mut model = Self::assemble(config, scene, FrontEnd::new(frontend)?, clip_samples, vocab, ckpt.store);
        model.tags = tags;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_checkpoint(path, &self.to_checkpoint()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(load_checkpoint(path)?)
    }
}

/// `A(a) + T(t)`, no normalization.
pub fn compose_query(audio: &[f64], text: &[f64]) -> Result<Vec<f64>> {
    if audio.len() != text.len() {
        return Err(shape(format!("audio embedding has {} dims, text has {}", audio.len(), text.len())));
    }
    Ok(audio.iter().zip(text).map(|(a, t)| a + t).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{adam_step, AdamConfig};
    use crate::synth::{render_example, SynthConfig, Split};

    fn small() -> Model {
        let cfg = SynthConfig::test_preset();
        let c = ModelConfig { embed_dim: 16, hidden_dim: 24, audio_backbone_dim: 20, token_dim: 8, dropout: 0.1, seed: 4 };
        Model::new(c, Scene::Rain, FrontEndConfig::test_preset(), cfg.clip_samples()).unwrap()
    }

    fn clip(index: usize) -> Vec<f64> {
        render_example(Scene::Rain, &SynthConfig::test_preset(), 1, Split::Dev, index).unwrap().audio_a
    }

    #[test]
    fn audio_encoding_is_deterministic_and_checks_length() {
        let m = small();
        let x = clip(0);
        let e = m.encode_audio(&x).unwrap();
        assert_eq!(e.len(), 16);
        assert_eq!(e, m.encode_audio(&x).unwrap());
        assert!(m.encode_audio(&x[1..]).is_err());
    }

    #[test]
    fn text_encoding() {
        let m = small();
        assert_eq!(m.encode_text("add thunder").unwrap(), m.encode_text("thunder add").unwrap());
        assert_ne!(m.encode_text("add thunder").unwrap(), m.encode_text("add dog bark").unwrap());
        assert!(m.encode_text("add zither").is_ok());
        assert!(m.encode_text("").is_err());
        assert!(m.text_calls() >= 4);
    }

    #[test]
    fn classifier_range_and_zero_weights() {
        let mut m = small();
        let p = m.classify(&[1e3; 16]).unwrap();
        assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
        m.store_mut().value_mut(CLASSIFIER_W).unwrap().data_mut().fill(0.0);
        assert_eq!(m.classify(&[3.0; 16]).unwrap(), vec![0.5; N_LABELS]);
    }

    #[test]
    fn compose() {
        let a = [1.0, -2.0, 0.5];
        let t = [0.25, 1.0, -0.5];
        assert_eq!(compose_query(&a, &[0.0; 3]).unwrap(), a.to_vec());
        assert_eq!(compose_query(&a, &t).unwrap(), compose_query(&t, &a).unwrap());
        assert!(compose_query(&a, &t[..2]).is_err());
    }

    #[test]
    fn backbones_survive_optimizer_steps() {
        let mut m = small();
        let before: Vec<Tensor> = Model::backbone_names().iter().map(|n| m.store().value(n).unwrap().clone()).collect();
        let names: Vec<String> = m.store().names().map(str::to_string).collect();
        for _ in 0..3 {
            m.store_mut().zero_grads();
            for n in &names {
                let g = m.store().value(n).unwrap().map(|v| v + 1.0);
                m.store_mut().accumulate_grad(n, &g).unwrap();
            }
            adam_step(m.store_mut(), &AdamConfig::default()).unwrap();
        }
        for (n, b) in Model::backbone_names().iter().zip(&before) {
            assert_eq!(m.store().value(n).unwrap(), b);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut m = small();
        let pooled = Tensor::from_rows(&[m.pooled_features(&clip(0)).unwrap(), m.pooled_features(&clip(1)).unwrap()]).unwrap();
        m.fit_audio_normalization(&pooled).unwrap();
        m.set_tag("variant", "baseline");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        m.save(&path).unwrap();
        let back = Model::load(&path).unwrap();
        assert_eq!(back.encode_audio(&clip(2)).unwrap(), m.encode_audio(&clip(2)).unwrap());
        assert_eq!(back.encode_text("remove dog bark").unwrap(), m.encode_text("remove dog bark").unwrap());
        assert_eq!(back.config(), m.config());
        assert_eq!(back.vocab(), m.vocab());
        assert_eq!(back.tag("variant"), Some("baseline"));
    }
}
