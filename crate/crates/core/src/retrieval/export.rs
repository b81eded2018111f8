use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::encoders::Model;
use crate::error::{invalid, shape, Error, Result};
use crate::nn::Tensor;
use crate::synth::{describe, DiffKind, DifferenceOp, Scene, SoundClass, SynthConfig};

use super::probes::render_add_probe;

/// Event classes to probe with "add <class>" pairs, and how many of each.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSpec {
    pub entries: Vec<(SoundClass, usize)>,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self { entries: vec![(SoundClass::Thunder, 100), (SoundClass::Dog, 100)] }
    }
}

impl FromStr for ProbeSpec {
    type Err = Error;

    /// `class:count[,class:count...]`, e.g. `thunder:100,dog:100`.
    fn from_str(s: &str) -> Result<Self> {
        let entries = s
            .split(',')
            .map(|part| {
                let (c, n) = part.trim().split_once(':').ok_or_else(|| invalid(format!("bad probe entry `{part}`")))?;
                let n: usize = n.trim().parse().map_err(|_| invalid(format!("bad probe count in `{part}`")))?;
                Ok((c.trim().parse::<SoundClass>()?, n))
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = Self { entries };
        spec.validate()?;
        Ok(spec)
    }
}

impl ProbeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.entries.len() < 2 || self.entries.iter().any(|&(_, n)| n == 0) {
            return Err(invalid("a probe spec needs at least two classes with positive counts"));
        }
        let mut classes: Vec<_> = self.entries.iter().map(|e| e.0).collect();
        classes.sort();
        classes.dedup();
        if classes.len() != self.entries.len() {
            return Err(invalid("probe classes must be distinct"));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.entries.iter().map(|e| e.1).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointKind {
    AudioDiff,
    Text,
}

impl PointKind {
    pub fn name(self) -> &'static str {
        match self {
            PointKind::AudioDiff => "audio_diff",
            PointKind::Text => "text",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiffPoint {
    pub kind: PointKind,
    pub label: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeparationStats {
    /// Smallest distance between two audio-difference cluster centroids.
    pub centroid_distance: f64,
    /// Mean distance of audio-difference points to their own centroid.
    pub mean_radius: f64,
    /// For each text point: its label and whether its nearest centroid
    /// carries the same label.
    pub text_matches: Vec<(String, bool)>,
}

impl SeparationStats {
    pub fn clusters_separated(&self) -> bool {
        self.centroid_distance > self.mean_radius
    }

    pub fn texts_match(&self) -> bool {
        !self.text_matches.is_empty() && self.text_matches.iter().all(|t| t.1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiffExport {
    pub points: Vec<DiffPoint>,
    pub stats: SeparationStats,
}

impl DiffExport {
    /// `kind,label,x,y`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("kind,label,x,y\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{},{:.9},{:.9}", p.kind.name(), p.label, p.x, p.y);
        }
        s
    }
}

/// Projects rows onto their top two principal axes. Each axis is signed so
/// that its largest-magnitude component is positive.
pub fn pca_2d(rows: &Tensor) -> Result<Tensor> {
    if rows.shape().len() != 2 || rows.rows() < 2 || rows.cols() < 2 {
        return Err(shape(format!("PCA needs at least a 2x2 matrix, got {:?}", rows.shape())));
    }
    let (n, d) = (rows.rows(), rows.cols());
    let mut x = DMatrix::from_row_slice(n, d, rows.data());
    let mean = x.row_mean();
    for mut r in x.row_iter_mut() {
        r -= &mean;
    }
    let cov = x.transpose() * &x / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut out = Vec::with_capacity(n * 2);
    let axes: Vec<_> = order[..2]
        .iter()
        .map(|&i| {
            let v = eig.eigenvectors.column(i).into_owned();
            let pivot = v.iter().copied().fold(0.0f64, |m, c| if c.abs() > m.abs() { c } else { m });
            if pivot < 0.0 {
                -v
            } else {
                v
            }
        })
        .collect();
    for r in x.row_iter() {
        for a in &axes {
            out.push(r.dot(&a.transpose()));
        }
    }
    Tensor::matrix(n, 2, out)
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Cluster statistics of the audio-difference points and the nearest-
/// centroid label of each text point.
pub fn separation_stats(points: &[DiffPoint]) -> Result<SeparationStats> {
    let mut labels: Vec<&str> =
        points.iter().filter(|p| p.kind == PointKind::AudioDiff).map(|p| p.label.as_str()).collect();
    labels.sort();
    labels.dedup();
    if labels.len() < 2 {
        return Err(invalid("separation needs at least two audio-difference clusters"));
    }
    let centroids: Vec<(f64, f64)> = labels
        .iter()
        .map(|l| {
            let members: Vec<_> = points.iter().filter(|p| p.kind == PointKind::AudioDiff && p.label == *l).collect();
            let k = members.len() as f64;
            (members.iter().map(|p| p.x).sum::<f64>() / k, members.iter().map(|p| p.y).sum::<f64>() / k)
        })
        .collect();
    let mut centroid_distance = f64::INFINITY;
    for i in 0..centroids.len() {
        for j in i + 1..centroids.len() {
            centroid_distance = centroid_distance.min(dist(centroids[i], centroids[j]));
        }
    }
    let audio: Vec<_> = points.iter().filter(|p| p.kind == PointKind::AudioDiff).collect();
    let mean_radius = audio
        .iter()
        .map(|p| dist((p.x, p.y), centroids[labels.iter().position(|l| *l == p.label).expect("own label")]))
        .sum::<f64>()
        / audio.len() as f64;
    let text_matches = points
        .iter()
        .filter(|p| p.kind == PointKind::Text)
        .map(|p| {
            let nearest = (0..labels.len())
                .min_by(|&a, &b| dist((p.x, p.y), centroids[a]).total_cmp(&dist((p.x, p.y), centroids[b])))
                .expect("nonempty");
            (p.label.clone(), labels[nearest] == p.label)
        })
        .collect();
    Ok(SeparationStats { centroid_distance, mean_radius, text_matches })
}

/// `A(b) - A(a)` for every probe pair plus `T(t)` for each distinct probe
/// description, projected together to 2-D.
pub fn export_embedding_diffs(
    model: &Model,
    synth: &SynthConfig,
    spec: &ProbeSpec,
    seed: u64,
) -> Result<DiffExport> {
    spec.validate()?;
    let scene: Scene = model.scene();
    let jobs: Vec<(SoundClass, usize)> =
        spec.entries.iter().flat_map(|&(c, n)| (0..n).map(move |i| (c, i))).collect();
    let pooled = jobs
        .par_iter()
        .map(|&(c, i)| {
            let (a, b) = render_add_probe(scene, synth, seed, c, i)?;
            Ok((model.pooled_features(&a)?, model.pooled_features(&b)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let pa = Tensor::from_rows(&pooled.iter().map(|p| p.0.clone()).collect::<Vec<_>>())?;
    let pb = Tensor::from_rows(&pooled.iter().map(|p| p.1.clone()).collect::<Vec<_>>())?;
    let ea = model.embed_audio(&model.audio_backbone(&pa)?)?;
    let mut diffs = model.embed_audio(&model.audio_backbone(&pb)?)?;
    diffs.data_mut().iter_mut().zip(ea.data()).for_each(|(b, a)| *b -= a);

    let label = |c: SoundClass| describe(&[DifferenceOp::new(DiffKind::AddEvent, c, 0.0)]);
    let texts = spec.entries.iter().map(|&(c, _)| label(c)).collect::<Result<Vec<_>>>()?;
    let text_emb = model.embed_text(&model.text_backbone(&texts)?)?;
    let xy = pca_2d(&Tensor::vstack(&diffs, &text_emb)?)?;

    let mut points = Vec::with_capacity(xy.rows());
    for (r, &(c, _)) in jobs.iter().enumerate() {
        points.push(DiffPoint { kind: PointKind::AudioDiff, label: label(c)?, x: xy.row(r)[0], y: xy.row(r)[1] });
    }
    for (i, t) in texts.iter().enumerate() {
        let r = jobs.len() + i;
        points.push(DiffPoint { kind: PointKind::Text, label: t.clone(), x: xy.row(r)[0], y: xy.row(r)[1] });
    }
    let stats = separation_stats(&points)?;
    Ok(DiffExport { points, stats })
}
