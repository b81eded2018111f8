use rayon::prelude::*;

use crate::dsp::FrontEnd;
use crate::error::{invalid, Error, Result};
use crate::nn::Tensor;
use crate::synth::wav::{pcm16_roundtrip, read_wav};
use crate::synth::{render_example, DifferenceOp, LoadedManifest, Scene, Split, SynthConfig};

/// Pooled log-mel statistics and metadata for a set of pairs; the audio
/// itself is not kept.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    pub ids: Vec<String>,
    /// `[N x 2*n_mels]` pooled statistics of the `a` clips.
    pub pooled_a: Tensor,
    pub pooled_b: Tensor,
    pub texts: Vec<String>,
    pub ops: Vec<Vec<DifferenceOp>>,
    pub labels_a: Tensor,
    pub labels_b: Tensor,
}

struct Row {
    id: String,
    a: Vec<f64>,
    b: Vec<f64>,
    text: String,
    ops: Vec<DifferenceOp>,
    labels_a: Vec<u8>,
    labels_b: Vec<u8>,
}

fn labels_tensor(rows: &[Row], pick: impl Fn(&Row) -> &[u8]) -> Result<Tensor> {
    let l: Vec<Vec<f64>> = rows.iter().map(|r| pick(r).iter().map(|&v| v as f64).collect()).collect();
    Tensor::from_rows(&l)
}

impl FeatureSet {
    fn from_rows(rows: Vec<Row>) -> Result<Self> {
        if rows.is_empty() {
            return Err(invalid("feature set is empty"));
        }
        let pooled_a = Tensor::from_rows(&rows.iter().map(|r| r.a.clone()).collect::<Vec<_>>())?;
        let pooled_b = Tensor::from_rows(&rows.iter().map(|r| r.b.clone()).collect::<Vec<_>>())?;
        let labels_a = labels_tensor(&rows, |r| &r.labels_a)?;
        let labels_b = labels_tensor(&rows, |r| &r.labels_b)?;
        Ok(Self {
            ids: rows.iter().map(|r| r.id.clone()).collect(),
            pooled_a,
            pooled_b,
            texts: rows.iter().map(|r| r.text.clone()).collect(),
            ops: rows.into_iter().map(|r| r.ops).collect(),
            labels_a,
            labels_b,
        })
    }

    /// Renders examples `0..n` of `split` in memory. Each clip goes through
    /// the same 16-bit quantization as a written corpus, so the features
    /// equal those of [`FeatureSet::from_manifest`] on that corpus.
    pub fn render(
        scene: Scene,
        synth: &SynthConfig,
        master_seed: u64,
        split: Split,
        n: usize,
        frontend: &FrontEnd,
    ) -> Result<Self> {
        synth.validate()?;
        if frontend.config().sample_rate_hz != synth.sample_rate_hz {
            return Err(invalid("front end and corpus sample rates differ"));
        }
        let rows = (0..n)
            .into_par_iter()
            .map(|i| {
                let ex = render_example(scene, synth, master_seed, split, i)?;
                Ok(Row {
                    a: frontend.features(&pcm16_roundtrip(&ex.audio_a))?,
                    b: frontend.features(&pcm16_roundtrip(&ex.audio_b))?,
                    id: ex.id,
                    text: ex.text,
                    ops: ex.ops,
                    labels_a: ex.labels_a,
                    labels_b: ex.labels_b,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(rows)
    }

    /// Reads every example of `split` from a corpus on disk.
    pub fn from_manifest(corpus: &LoadedManifest, split: Split, frontend: &FrontEnd) -> Result<Self> {
        let sr = frontend.config().sample_rate_hz;
        if corpus.manifest.sample_rate_hz != sr {
            return Err(invalid(format!("corpus is {} Hz, front end expects {sr} Hz", corpus.manifest.sample_rate_hz)));
        }
        let records: Vec<_> = corpus.manifest.examples_in(split).collect();
        let rows = records
            .par_iter()
            .map(|rec| {
                let load = |rel: &str| -> Result<Vec<f64>> {
                    let path = corpus.audio_path(rel);
                    if !path.exists() {
                        return Err(Error::MissingAudio { id: rec.id.clone(), path });
                    }
                    frontend.features(&read_wav(&path)?.0)
                };
                Ok(Row {
                    id: rec.id.clone(),
                    a: load(&rec.audio_a)?,
                    b: load(&rec.audio_b)?,
                    text: rec.text.clone(),
                    ops: rec.ops.clone(),
                    labels_a: rec.labels_a.clone(),
                    labels_b: rec.labels_b.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(rows)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.ids.iter().position(|x| x == id).ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    /// Rows `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            pooled_a: self.pooled_a.gather_rows(idx),
            pooled_b: self.pooled_b.gather_rows(idx),
            texts: idx.iter().map(|&i| self.texts[i].clone()).collect(),
            ops: idx.iter().map(|&i| self.ops[i].clone()).collect(),
            labels_a: self.labels_a.gather_rows(idx),
            labels_b: self.labels_b.gather_rows(idx),
        }
    }

    pub fn subset_ids(&self, ids: &[String]) -> Result<Self> {
        let idx = ids.iter().map(|id| self.index_of(id)).collect::<Result<Vec<_>>>()?;
        Ok(self.subset(&idx))
    }
}
