//! Exhaustive cosine retrieval over target embeddings, Recall@K, per-class
//! breakdowns, probe sets and the 2-D embedding-difference export.

mod export;
mod index;
mod metrics;
mod probes;

pub use export::{
    export_embedding_diffs, pca_2d, separation_stats, DiffExport, DiffPoint, PointKind, ProbeSpec, SeparationStats,
};
pub use index::{query, query_embeddings, retrieve_all, EmbeddingIndex, Hit, RetrievalResult};
pub use metrics::{
    per_class_csv, per_class_recall, recall_at_k, recall_csv, results_csv, target_ranks, ClassRecall, CLASS_BUCKETS,
    RECALL_KS,
};
pub use probes::{render_add_probe, render_contrast_pair, ContrastPair, ContrastProbeSet};
