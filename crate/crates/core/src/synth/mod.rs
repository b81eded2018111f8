//! Paired-audio corpus synthesis: procedural sources, the six difference
//! operations, descriptions, multi-hot labels and the persisted manifest.

mod dataset;
mod describe;
mod difference;
mod manifest;
mod scene;
mod source;
pub mod wav;

pub use dataset::{
    build_dataset, example_id, example_seed, labels_for, render_example, sample_ops, PairExample, SynthConfig,
};
pub use describe::describe;
pub use difference::{
    apply_difference, crop_background, difference_layers, DiffKind, DifferenceLayers, DifferenceOp, Layer,
    SourceBank,
};
pub use manifest::{load_manifest, ExampleRecord, LoadedManifest, Manifest, SplitSizes, GENERATOR_VERSION};
pub use scene::{Scene, SceneSpec, SoundClass};
pub use source::{synthesize_clip, synthesize_source, SourceClip, Split, SOURCE_PEAK};

/// File name of the manifest inside a corpus directory.
pub const MANIFEST_FILE: &str = "manifest.json";
