use std::cmp::Ordering;
use std::collections::HashSet;

use crate::encoders::{compose_query, Model};
use crate::error::{invalid, shape, Error, Result};
use crate::nn::Tensor;
use crate::objective::Variant;
use crate::trainer::FeatureSet;

#[derive(Clone, Debug, PartialEq)]
pub struct Hit {
    pub id: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetrievalResult {
    pub query_id: Option<String>,
    /// Top hits, best first.
    pub hits: Vec<Hit>,
    /// 1-based rank of the ground-truth target over the whole index.
    pub rank_of_target: Option<usize>,
}

/// Target embeddings with cached row norms, searched exhaustively by cosine
/// similarity. Ties are broken by ascending id.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingIndex {
    ids: Vec<String>,
    embeddings: Tensor,
    norms: Vec<f64>,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl EmbeddingIndex {
    pub fn new(ids: Vec<String>, embeddings: Tensor) -> Result<Self> {
        if embeddings.shape().len() != 2 || embeddings.rows() != ids.len() {
            return Err(shape(format!("{} ids for embeddings of shape {:?}", ids.len(), embeddings.shape())));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::DuplicateId(dup.clone()));
        }
        let norms: Vec<f64> = (0..ids.len()).map(|i| norm(embeddings.row(i))).collect();
        if let Some(i) = norms.iter().position(|&n| n == 0.0 || !n.is_finite()) {
            return Err(Error::ZeroNorm(ids[i].clone()));
        }
        Ok(Self { ids, embeddings, norms })
    }

    /// Eval-mode `A(b)` for every example in `features`.
    pub fn build(model: &Model, features: &FeatureSet) -> Result<Self> {
        let e = model.embed_audio(&model.audio_backbone(&features.pooled_b)?)?;
        Self::new(features.ids.clone(), e)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn embeddings(&self) -> &Tensor {
        &self.embeddings
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// Cosine similarity of `query` with every row.
    pub fn scores(&self, query: &[f64]) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Err(invalid("index is empty"));
        }
        if query.len() != self.embeddings.cols() {
            return Err(shape(format!("query has {} dims, index has {}", query.len(), self.embeddings.cols())));
        }
        let qn = norm(query);
        if qn == 0.0 || !qn.is_finite() {
            return Err(Error::ZeroNorm("query".into()));
        }
        Ok((0..self.len()).map(|i| dot(query, self.embeddings.row(i)) / (qn * self.norms[i])).collect())
    }

    fn order(&self, scores: &[f64]) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| match scores[b].total_cmp(&scores[a]) {
            Ordering::Equal => self.ids[a].cmp(&self.ids[b]),
            o => o,
        });
        order
    }

    /// Top-`k` rows for `query`; with `target`, also its rank over all rows.
    pub fn search(&self, query: &[f64], k: usize, target: Option<&str>) -> Result<RetrievalResult> {
        if k == 0 || k > self.len() {
            return Err(invalid(format!("top-k of {k} from an index of {}", self.len())));
        }
        let scores = self.scores(query)?;
        let order = self.order(&scores);
        let rank_of_target = match target {
            Some(t) => Some(
                order.iter().position(|&i| self.ids[i] == t).ok_or_else(|| Error::UnknownId(t.to_string()))? + 1,
            ),
            None => None,
        };
        let hits = order[..k].iter().map(|&i| Hit { id: self.ids[i].clone(), score: scores[i] }).collect();
        Ok(RetrievalResult { query_id: None, hits, rank_of_target })
    }
}

/// Eval-mode query embeddings for every example: `A(a) + T(t)`, or `A(a)`
/// alone for the baseline.
pub fn query_embeddings(model: &Model, features: &FeatureSet, variant: Variant) -> Result<Tensor> {
    let mut q = model.embed_audio(&model.audio_backbone(&features.pooled_a)?)?;
    if variant == Variant::Proposed {
        q.add_assign(&model.embed_text(&model.text_backbone(&features.texts)?)?)?;
    }
    Ok(q)
}

/// Runs every example of `features` as a query against `index`, whose
/// ground truth is the index row with the same id.
pub fn retrieve_all(
    model: &Model,
    index: &EmbeddingIndex,
    features: &FeatureSet,
    variant: Variant,
    k: usize,
) -> Result<Vec<RetrievalResult>> {
    let q = query_embeddings(model, features, variant)?;
    features
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let mut r = index.search(q.row(i), k, Some(id))?;
            r.query_id = Some(id.clone());
            Ok(r)
        })
        .collect()
}

/// One composed query from raw audio. An empty `text` runs the audio-only
/// path and never touches the text encoder.
pub fn query(model: &Model, index: &EmbeddingIndex, audio_a: &[f64], text: &str, k: usize) -> Result<RetrievalResult> {
    let a = model.encode_audio(audio_a)?;
    let q = if text.trim().is_empty() { a } else { compose_query(&a, &model.encode_text(text)?)? };
    index.search(&q, k, None)
}
