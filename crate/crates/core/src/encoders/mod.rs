//! Audio encoder, text encoder and classifier head over frozen random
//! backbones with trainable projection blocks.

mod model;
mod projection;
mod vocab;

pub use model::{
    compose_query, Model, ModelConfig, AUDIO_MEAN, AUDIO_R, AUDIO_SCALE, CLASSIFIER_B, CLASSIFIER_W, N_LABELS, TOKEN_TABLE,
};
pub use projection::{BlockCache, Grads, ProjectionBlock};
pub use vocab::{tokenize, TextVocab, CLS, UNK};
