use serde::{Deserialize, Serialize};

use crate::encoders::{Grads, Model, CLASSIFIER_B, CLASSIFIER_W};
use crate::error::{invalid, shape, Result};
use crate::nn::ops::{linear_backward, sigmoid_bce};
use crate::nn::{ParamStore, Tensor};
use crate::seed::Rng;

use super::contrastive::{contrastive_loss, pairwise_logits_cached, pairwise_logits_backward};

/// Which similarity feeds the contrastive loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `z = cos(A(a_k), A(b_l))`; the text encoder is never run.
    Baseline,
    /// `z = cos(A(a_k) + T(t_k), A(b_l))`.
    Proposed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub variant: Variant,
    /// Weight of the classification loss.
    pub rho: f64,
    /// Fixed logit temperature.
    pub tau: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { variant: Variant::Proposed, rho: 1.0, tau: 0.0 }
    }
}

/// One batch of backbone outputs. `text` is required by the proposed
/// variant and ignored by the baseline.
#[derive(Clone, Debug)]
pub struct Batch {
    pub audio_a: Tensor,
    pub audio_b: Tensor,
    pub text: Option<Tensor>,
    pub labels_a: Tensor,
    pub labels_b: Tensor,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.audio_a.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossReport {
    pub l_cont: f64,
    pub l_classif: f64,
    pub l_total: f64,
    pub rho: f64,
    pub batch_size: usize,
}

impl LossReport {
    pub fn per_example(&self) -> f64 {
        self.l_total / self.batch_size as f64
    }

    pub fn is_finite(&self) -> bool {
        self.l_cont.is_finite() && self.l_classif.is_finite() && self.l_total.is_finite()
    }
}

/// Forward pass of `L = L_cont + rho * L_classif` and, when `want_grads`,
/// the gradients of every projection-block and classifier parameter.
/// Dropout is active only when `rng` is given. `L_classif` is always
/// reported; its gradient is produced only when `rho != 0`.
pub fn total_loss(
    model: &Model,
    store: &ParamStore,
    batch: &Batch,
    cfg: &LossConfig,
    mut rng: Option<&mut Rng>,
    want_grads: bool,
) -> Result<(LossReport, Grads)> {
    let b = batch.len();
    if b == 0 || batch.audio_b.rows() != b || batch.labels_a.rows() != b || batch.labels_b.rows() != b {
        return Err(shape(format!("inconsistent batch of {b} rows")));
    }
    let audio_ab = Tensor::vstack(&batch.audio_a, &batch.audio_b)?;
    let (e_ab, audio_cache) = model.audio_block().forward(store, &audio_ab, rng.as_deref_mut())?;
    let e_a = e_ab.slice_rows(0, b);
    let e_b = e_ab.slice_rows(b, 2 * b);

    let (query, text_state) = match cfg.variant {
        Variant::Baseline => (e_a.clone(), None),
        Variant::Proposed => {
            let text = batch.text.as_ref().ok_or_else(|| invalid("proposed variant needs text features"))?;
            if text.rows() != b {
                return Err(shape(format!("{} text rows for a batch of {b}", text.rows())));
            }
            let (e_t, cache) = model.text_head(store, text, rng)?;
            let mut q = e_a.clone();
            q.add_assign(&e_t)?;
            (q, Some(cache))
        }
    };
    let (logits, cos_cache) = pairwise_logits_cached(&query, &e_b, cfg.tau)?;
    let (l_cont, dz) = contrastive_loss(&logits)?;

    let labels = Tensor::vstack(&batch.labels_a, &batch.labels_b)?;
    let class_logits = model.classifier_logits(store, &e_ab)?;
    // sigmoid_bce averages over all 2B rows; the loss is a sum of two B-row means.
    let (mean_bce, dlogits) = sigmoid_bce(&class_logits, &labels)?;
    let l_classif = 2.0 * mean_bce;
    let report = LossReport { l_cont, l_classif, l_total: l_cont + cfg.rho * l_classif, rho: cfg.rho, batch_size: b };
    if !want_grads {
        return Ok((report, Vec::new()));
    }

    let (dq, de_b) = pairwise_logits_backward(&cos_cache, &dz)?;
    let mut de_ab = Tensor::vstack(&dq, &de_b)?;
    let mut grads = Vec::new();
    if cfg.rho != 0.0 {
        let dl = dlogits.map(|g| 2.0 * cfg.rho * g);
        let lg = linear_backward(&e_ab, store.value(CLASSIFIER_W)?, &dl)?;
        de_ab.add_assign(&lg.dx)?;
        grads.push((CLASSIFIER_W.to_string(), lg.dw));
        grads.push((CLASSIFIER_B.to_string(), lg.db));
    }
    if let Some(cache) = text_state {
        let (_, g) = model.text_block().backward(store, &cache, &dq)?;
        grads.extend(g);
    }
    let (_, g) = model.audio_block().backward(store, &audio_cache, &de_ab)?;
    grads.extend(g);
    Ok((report, grads))
}
