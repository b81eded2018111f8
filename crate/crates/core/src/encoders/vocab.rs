use std::collections::{BTreeSet, HashMap};

use crate::error::{invalid, Result};
use crate::synth::{describe, DiffKind, DifferenceOp, SoundClass};

pub const CLS: &str = "[CLS]";
pub const UNK: &str = "[UNK]";

/// Closed vocabulary of the description grammar. `[CLS]` is index 0,
/// `[UNK]` index 1, then every grammar token in sorted order.
#[derive(Clone, Debug, PartialEq)]
pub struct TextVocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

/// Lowercases, splits on whitespace and trims surrounding ASCII punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| c.is_ascii_punctuation()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

impl TextVocab {
    pub fn from_grammar() -> Self {
        let mut words = BTreeSet::new();
        for class in SoundClass::ALL {
            let kinds: &[DiffKind] =
                if class.is_background() { &[DiffKind::IncBg, DiffKind::DecBg] } else { &DiffKind::EVENT_KINDS };
            for &kind in kinds {
                let a = DifferenceOp::new(kind, class, 0.0);
                let text = describe(&[a, a]).expect("two operations are describable");
                words.extend(tokenize(&text));
            }
        }
        let tokens = [CLS.to_string(), UNK.to_string()].into_iter().chain(words).collect();
        Self::from_tokens(tokens).expect("grammar vocabulary is well formed")
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[0] != CLS || tokens[1] != UNK {
            return Err(invalid("vocabulary must start with [CLS], [UNK]"));
        }
        let index: HashMap<String, usize> = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        if index.len() != tokens.len() {
            return Err(invalid("vocabulary has duplicate tokens"));
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(1)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// `[CLS]` followed by the token ids of `text`.
    pub fn encode(&self, text: &str) -> Result<Vec<usize>> {
        let words = tokenize(text);
        if words.is_empty() {
            return Err(invalid("text is empty"));
        }
        Ok(std::iter::once(0).chain(words.iter().map(|w| self.id(w))).collect())
    }
}
