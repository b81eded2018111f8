//! Deterministic training: validation split, feature precomputation,
//! shuffled mini-batches with Adam, and best-on-validation selection.

mod features;

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::encoders::{Model, CLASSIFIER_B, CLASSIFIER_W};
use crate::error::{invalid, Error, Result};
use crate::nn::{adam_step, AdamConfig, ParamStore, Tensor};
use crate::objective::{total_loss, Batch, LossConfig, LossReport, Variant};
use crate::seed::{derive_seed, rng_from_seed};

pub use features::FeatureSet;

/// The three compared systems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Audio-only query, no classification loss.
    Baseline,
    /// Audio + text query, `rho = 0`.
    NoClassif,
    /// Audio + text query, `rho = 1`.
    WithClassif,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Baseline, Method::NoClassif, Method::WithClassif];

    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::NoClassif => "no-classif",
            Method::WithClassif => "with-classif",
        }
    }

    pub fn variant(self) -> Variant {
        match self {
            Method::Baseline => Variant::Baseline,
            _ => Variant::Proposed,
        }
    }

    pub fn rho(self) -> f64 {
        match self {
            Method::WithClassif => 1.0,
            _ => 0.0,
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}` (expected baseline, no-classif or with-classif)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub rho: f64,
    pub validation_fraction: f64,
    pub seed: u64,
    pub variant: Variant,
    pub tau: f64,
    /// Print a progress line to standard error every this many epochs
    /// (0 disables).
    pub progress_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            epochs: 300,
            lr: 1e-3,
            rho: 1.0,
            validation_fraction: 0.1,
            seed: 0,
            variant: Variant::Proposed,
            tau: 0.0,
            progress_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn for_method(method: Method) -> Self {
        Self { variant: method.variant(), rho: method.rho(), ..Self::default() }
    }

    pub fn loss(&self) -> LossConfig {
        LossConfig { variant: self.variant, rho: self.rho, tau: self.tau }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!("validation_fraction {} must be in (0, 1)", self.validation_fraction)));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !self.rho.is_finite() || self.rho < 0.0 {
            return Err(Error::Config("lr must be positive and rho nonnegative".into()));
        }
        if self.batch_size == 1 {
            eprintln!("warning: batch_size 1 gives the contrastive loss no negatives");
        }
        Ok(())
    }
}

/// Splits ids into `(train, val)` with `round(fraction * N)` validation
/// items chosen by a seeded shuffle. Both lists keep the input order.
pub fn split_validation(ids: &[String], fraction: f64, seed: u64) -> Result<(Vec<String>, Vec<String>)> {
    let n = ids.len();
    let n_val = (fraction * n as f64).round() as usize;
    if !(fraction > 0.0 && fraction < 1.0) || n_val == 0 || n_val >= n {
        return Err(invalid(format!("cannot hold out fraction {fraction} of {n} examples")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(derive_seed(seed, "validation", 0)));
    let mut is_val = vec![false; n];
    order[..n_val].iter().for_each(|&i| is_val[i] = true);
    let (val, train): (Vec<_>, Vec<_>) = ids.iter().cloned().zip(is_val).partition(|(_, v)| *v);
    Ok((train.into_iter().map(|p| p.0).collect(), val.into_iter().map(|p| p.0).collect()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_cont: f64,
    pub train_classif: f64,
    pub val_total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub wall_clock_s: f64,
}

impl TrainLog {
    pub const CSV_HEADER: &'static str = "epoch,train_cont,train_classif,val_total";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.records {
            let _ = writeln!(s, "{},{},{},{}", r.epoch, r.train_cont, r.train_classif, r.val_total);
        }
        s
    }

    pub fn best(&self) -> &EpochRecord {
        &self.records[self.best_epoch - 1]
    }
}

/// Backbone outputs for a feature set, ready for batching.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub audio_a: Tensor,
    pub audio_b: Tensor,
    pub text: Option<Tensor>,
    pub labels_a: Tensor,
    pub labels_b: Tensor,
}

impl Prepared {
    /// Runs the frozen backbones once; text only for the proposed variant.
    pub fn new(model: &Model, features: &FeatureSet, variant: Variant) -> Result<Self> {
        Ok(Self {
            audio_a: model.audio_backbone(&features.pooled_a)?,
            audio_b: model.audio_backbone(&features.pooled_b)?,
            text: match variant {
                Variant::Baseline => None,
                Variant::Proposed => Some(model.text_backbone(&features.texts)?),
            },
            labels_a: features.labels_a.clone(),
            labels_b: features.labels_b.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.audio_a.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn batch(&self, idx: &[usize]) -> Batch {
        Batch {
            audio_a: self.audio_a.gather_rows(idx),
            audio_b: self.audio_b.gather_rows(idx),
            text: self.text.as_ref().map(|t| t.gather_rows(idx)),
            labels_a: self.labels_a.gather_rows(idx),
            labels_b: self.labels_b.gather_rows(idx),
        }
    }
}

/// Deterministic loss over `data` in consecutive chunks of `batch_size`
/// (the last chunk may be shorter), averaged over chunks. Dropout is off.
pub fn validation_loss(model: &Model, store: &ParamStore, data: &Prepared, cfg: &TrainConfig) -> Result<f64> {
    if data.is_empty() {
        return Err(invalid("validation set is empty"));
    }
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut total = 0.0;
    let mut chunks = 0;
    for c in idx.chunks(cfg.batch_size) {
        let (r, _) = total_loss(model, store, &data.batch(c), &cfg.loss(), None, false)?;
        total += r.l_total;
        chunks += 1;
    }
    Ok(total / chunks as f64)
}

/// Validation loss of `model` on the listed examples of `features`.
pub fn evaluate_validation(model: &Model, features: &FeatureSet, val_ids: &[String], cfg: &TrainConfig) -> Result<f64> {
    if val_ids.is_empty() {
        return Err(invalid("validation set is empty"));
    }
    let subset = features.subset_ids(val_ids)?;
    let data = Prepared::new(model, &subset, cfg.variant)?;
    validation_loss(model, model.store(), &data, cfg)
}

pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub best: Model,
    pub last: Model,
    pub log: TrainLog,
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
}

impl TrainOutcome {
    /// Writes `best.ckpt`, `final.ckpt` and `train_log.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.best.save(&dir.join("best.ckpt"))?;
        self.last.save(&dir.join("final.ckpt"))?;
        crate::io::write_atomic(&dir.join("train_log.csv"), self.log.to_csv().as_bytes())
    }
}

fn freeze_unused(model: &mut Model, cfg: &TrainConfig) -> Result<()> {
    let text: Vec<String> = model.text_block().param_names();
    let store = model.store_mut();
    for n in &text {
        store.set_frozen(n, cfg.variant == Variant::Baseline)?;
    }
    for n in [CLASSIFIER_W, CLASSIFIER_B] {
        store.set_frozen(n, cfg.rho == 0.0)?;
    }
    Ok(())
}

/// Trains the projection blocks (and the classifier when `rho > 0`) of a
/// freshly initialized `model` on the dev features. The frozen audio
/// standardization is fitted on the training portion first. Parameters not
/// reached by the loss (text block for the baseline, classifier when
/// `rho = 0`) are frozen.
pub fn train(mut model: Model, dev: &FeatureSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let (train_ids, val_ids) = split_validation(&dev.ids, cfg.validation_fraction, cfg.seed)?;
    let train_set = dev.subset_ids(&train_ids)?;
    let val_set = dev.subset_ids(&val_ids)?;
    if train_set.len() < cfg.batch_size {
        return Err(invalid(format!("{} training examples cannot fill a batch of {}", train_set.len(), cfg.batch_size)));
    }
    model.fit_audio_normalization(&Tensor::vstack(&train_set.pooled_a, &train_set.pooled_b)?)?;
    freeze_unused(&mut model, cfg)?;
    model.set_tag("variant", variant_name(cfg.variant));
    model.set_tag("rho", &cfg.rho.to_string());
    let train_data = Prepared::new(&model, &train_set, cfg.variant)?;
    let val_data = Prepared::new(&model, &val_set, cfg.variant)?;
    let adam = AdamConfig::with_lr(cfg.lr);
    let loss_cfg = cfg.loss();

    let mut records = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng_from_seed(derive_seed(cfg.seed, "shuffle", epoch as u64)));
        let mut dropout_rng = rng_from_seed(derive_seed(cfg.seed, "dropout", epoch as u64));
        let (mut sum_cont, mut sum_classif, mut n_batches) = (0.0, 0.0, 0);
        for (bi, idx) in order.chunks_exact(cfg.batch_size).enumerate() {
            let batch = train_data.batch(idx);
            let (report, grads) = total_loss(&model, model.store(), &batch, &loss_cfg, Some(&mut dropout_rng), true)?;
            check_finite(&report, epoch, bi + 1)?;
            let store = model.store_mut();
            store.zero_grads();
            for (n, g) in &grads {
                store.accumulate_grad(n, g)?;
            }
            adam_step(store, &adam)?;
            sum_cont += report.l_cont;
            sum_classif += report.l_classif;
            n_batches += 1;
        }
        let val_total = validation_loss(&model, model.store(), &val_data, cfg)?;
        if !val_total.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: 0 });
        }
        let rec = EpochRecord {
            epoch,
            train_cont: sum_cont / n_batches as f64,
            train_classif: sum_classif / n_batches as f64,
            val_total,
        };
        if best.as_ref().is_none_or(|(v, _, _)| val_total < *v) {
            best = Some((val_total, epoch, model.store().clone()));
        }
        if cfg.progress_every > 0 && (epoch % cfg.progress_every == 0 || epoch == cfg.epochs) {
            eprintln!(
                "epoch {epoch:>4}/{}  train_cont {:.4}  train_classif {:.4}  val_total {:.4}",
                cfg.epochs, rec.train_cont, rec.train_classif, rec.val_total
            );
        }
        records.push(rec);
    }
    let (_, best_epoch, best_store) = best.expect("at least one epoch");
    let mut best_model = model.clone();
    *best_model.store_mut() = best_store;
    let log = TrainLog { records, best_epoch, wall_clock_s: start.elapsed().as_secs_f64() };
    Ok(TrainOutcome { best: best_model, last: model, log, train_ids, val_ids })
}

pub fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Baseline => "baseline",
        Variant::Proposed => "proposed",
    }
}

/// Variant recorded in a trained model's tags.
pub fn model_variant(model: &Model) -> Option<Variant> {
    match model.tag("variant")? {
        "baseline" => Some(Variant::Baseline),
        "proposed" => Some(Variant::Proposed),
        _ => None,
    }
}

fn check_finite(report: &LossReport, epoch: usize, batch: usize) -> Result<()> {
    if report.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteLoss { epoch, batch })
    }
}
