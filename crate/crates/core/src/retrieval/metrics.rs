use std::fmt::Write as _;

use crate::synth::{DifferenceOp, Scene, SoundClass};

use super::index::RetrievalResult;

/// Fraction of ranks that are `<= k`; 0 for no queries.
pub fn recall_at_k(ranks: &[usize], k: usize) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64
}

/// Target ranks of results that have one.
pub fn target_ranks(results: &[RetrievalResult]) -> Vec<usize> {
    results.iter().filter_map(|r| r.rank_of_target).collect()
}

/// Per-class columns of the breakdown table: background operations
/// first, then every event class of either scene.
pub const CLASS_BUCKETS: [&str; 7] =
    ["background", "dog", "chirping_birds", "thunder", "footsteps", "car_horn", "church_bells"];

#[derive(Clone, Debug, PartialEq)]
pub struct ClassRecall {
    pub bucket: &'static str,
    /// Queries with at least one operation in this bucket.
    pub queries: usize,
    pub hits: usize,
    /// `None` when the bucket is not part of the scene or has no queries.
    pub recall: Option<f64>,
}

fn bucket_of(class: SoundClass) -> &'static str {
    if class.is_background() {
        "background"
    } else {
        class.name()
    }
}

/// R@k per bucket. A query counts once in every bucket one of its
/// operations touches.
pub fn per_class_recall(ranks: &[usize], ops: &[Vec<DifferenceOp>], scene: Scene, k: usize) -> Vec<ClassRecall> {
    let in_scene: Vec<&str> = scene.classes().iter().map(|&c| bucket_of(c)).collect();
    CLASS_BUCKETS
        .iter()
        .map(|&bucket| {
            let (mut queries, mut hits) = (0, 0);
            for (rank, example_ops) in ranks.iter().zip(ops) {
                if example_ops.iter().any(|op| bucket_of(op.class_id) == bucket) {
                    queries += 1;
                    hits += (*rank <= k) as usize;
                }
            }
            let recall = (in_scene.contains(&bucket) && queries > 0).then(|| hits as f64 / queries as f64);
            ClassRecall { bucket, queries, hits, recall }
        })
        .collect()
}

/// `query_id,target_id,rank,score`, one row per returned hit.
pub fn results_csv(results: &[RetrievalResult]) -> String {
    let mut s = String::from("query_id,target_id,rank,score\n");
    for r in results {
        let q = r.query_id.as_deref().unwrap_or("");
        for (i, h) in r.hits.iter().enumerate() {
            let _ = writeln!(s, "{q},{},{},{:.9}", h.id, i + 1, h.score);
        }
    }
    s
}

pub const RECALL_KS: [usize; 3] = [1, 5, 10];

/// `R@1,R@5,R@10` header and one row of values.
pub fn recall_csv(ranks: &[usize]) -> String {
    let vals: Vec<String> = RECALL_KS.iter().map(|&k| format!("{:.6}", recall_at_k(ranks, k))).collect();
    format!("R@1,R@5,R@10\n{}\n", vals.join(","))
}

/// `class,queries,R@1` with `N/A` for buckets outside the scene.
pub fn per_class_csv(rows: &[ClassRecall]) -> String {
    let mut s = String::from("class,queries,R@1\n");
    for r in rows {
        let v = r.recall.map_or_else(|| "N/A".to_string(), |v| format!("{v:.6}"));
        let _ = writeln!(s, "{},{},{v}", r.bucket, r.queries);
    }
    s
}
