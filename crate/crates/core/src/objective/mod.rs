//! Cosine logits, the symmetric contrastive loss, the classification loss
//! and their weighted total.

mod contrastive;
mod total;

pub use contrastive::{
    classification_loss, classification_loss_backward, contrastive_loss, pairwise_logits, pairwise_logits_backward,
    pairwise_logits_cached, BatchLogits, CosineCache,
};
pub use total::{total_loss, Batch, LossConfig, LossReport, Variant};
