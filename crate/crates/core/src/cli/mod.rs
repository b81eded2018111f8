//! Command-line surface: `synth`, `train`, `eval`, `query` and
//! `export-diffs`, sharing one flat config file plus flag overrides.

mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::encoders::Model;
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::retrieval::{
    export_embedding_diffs, per_class_csv, per_class_recall, query, recall_at_k, recall_csv, results_csv,
    retrieve_all, target_ranks, EmbeddingIndex, RECALL_KS,
};
use crate::synth::wav::read_wav;
use crate::synth::{build_dataset, load_manifest, LoadedManifest, Split, MANIFEST_FILE};
use crate::trainer::{model_variant, train, FeatureSet};

pub use config::{Preset, RunConfig, KEYS};

#[derive(Parser, Debug)]
#[command(name = "querymod", version, about = "Audio retrieval with text query modifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// rain or traffic.
    #[arg(long)]
    pub scene: Option<String>,
    /// baseline, no-classif or with-classif.
    #[arg(long)]
    pub variant: Option<String>,
    /// desk or test.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub topk: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render a paired corpus and its manifest.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Train on the dev split of a corpus; writes best.ckpt, final.ckpt, train_log.csv.
    Train {
        #[command(flatten)]
        common: Common,
        /// Corpus directory.
        #[arg(long, default_value = "corpus")]
        data: PathBuf,
    },
    /// Recall@K over the eval split; writes recall.csv, per_class.csv, results.csv, summary.txt.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "corpus")]
        data: PathBuf,
        #[arg(long, default_value = "run/best.ckpt")]
        checkpoint: PathBuf,
    },
    /// Rank the eval-split targets for one WAV clip and one description.
    Query {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "corpus")]
        data: PathBuf,
        #[arg(long, default_value = "run/best.ckpt")]
        checkpoint: PathBuf,
        #[arg(long)]
        wav: PathBuf,
        /// Difference description; empty runs the audio-only query.
        #[arg(long, default_value = "")]
        text: String,
    },
    /// Write 2-D projections of embedding differences and text embeddings.
    ExportDiffs {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "run/best.ckpt")]
        checkpoint: PathBuf,
        /// class:count list, e.g. thunder:100,dog:100.
        #[arg(long)]
        probes: Option<String>,
    },
}

/// 2 for configuration problems, 3 for missing inputs, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::UnknownClass(_) => 2,
        Error::MissingAudio { .. } => 3,
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 3,
        _ => 1,
    }
}

fn resolve(common: &Common, extra: &[(&str, Option<String>)]) -> Result<RunConfig> {
    let mut pairs = match &common.config {
        Some(p) => RunConfig::read_pairs(p)?,
        None => Vec::new(),
    };
    let flags = [
        ("seed", common.seed.map(|v| v.to_string())),
        ("scene", common.scene.clone()),
        ("variant", common.variant.clone()),
        ("preset", common.preset.clone()),
        ("topk", common.topk.map(|v| v.to_string())),
    ];
    for (k, v) in flags.iter().chain(extra) {
        if let Some(v) = v {
            pairs.push((k.to_string(), v.clone()));
        }
    }
    RunConfig::from_pairs(&pairs)
}

fn missing(what: &str, path: &Path) -> Error {
    Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, format!("{what} not found: {}", path.display())))
}

fn require(what: &str, path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(missing(what, path))
    }
}

fn open_corpus(dir: &Path) -> Result<LoadedManifest> {
    let path = dir.join(MANIFEST_FILE);
    require("manifest", &path)?;
    load_manifest(&path)
}

fn open_model(path: &Path) -> Result<Model> {
    require("checkpoint", path)?;
    Model::load(path)
}

fn write(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            let kind = match code {
                2 => "configuration error",
                3 => "missing artifact",
                _ => "runtime error",
            };
            eprintln!("querymod: {kind}: {e}");
            code
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Synth { common } => synth_cmd(&common),
        Command::Train { common, data } => train_cmd(&common, &data),
        Command::Eval { common, data, checkpoint } => eval_cmd(&common, &data, &checkpoint),
        Command::Query { common, data, checkpoint, wav, text } => query_cmd(&common, &data, &checkpoint, &wav, &text),
        Command::ExportDiffs { common, checkpoint, probes } => export_cmd(&common, &checkpoint, probes),
    }
}

fn synth_cmd(common: &Common) -> Result<()> {
    let cfg = resolve(common, &[])?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("corpus"));
    let manifest = build_dataset(cfg.scene, cfg.n_dev, cfg.n_eval, &cfg.synth, cfg.seed, &out)?;
    write(&out.join("run_config.txt"), &cfg.to_text())?;
    println!(
        "wrote {} dev + {} eval pairs ({} scene) to {}",
        manifest.splits.dev,
        manifest.splits.eval,
        cfg.scene.name(),
        out.display()
    );
    Ok(())
}

fn check_corpus(cfg: &RunConfig, common: &Common, corpus: &LoadedManifest) -> Result<()> {
    let m = &corpus.manifest;
    if common.scene.is_some() && m.scene.name != cfg.scene {
        return Err(Error::Config(format!("--scene {} but the corpus is {}", cfg.scene.name(), m.scene.name.name())));
    }
    if m.sample_rate_hz != cfg.frontend.sample_rate_hz {
        return Err(Error::Config(format!(
            "corpus is {} Hz but the front end runs at {} Hz (check --preset)",
            m.sample_rate_hz, cfg.frontend.sample_rate_hz
        )));
    }
    Ok(())
}

fn train_cmd(common: &Common, data: &Path) -> Result<()> {
    let cfg = resolve(common, &[])?;
    let corpus = open_corpus(data)?;
    check_corpus(&cfg, common, &corpus)?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("run"));
    let clip_samples = (corpus.manifest.clip_seconds * corpus.manifest.sample_rate_hz as f64).round() as usize;
    let model = Model::new(cfg.model, corpus.manifest.scene.name, cfg.frontend, clip_samples)?;
    let dev = FeatureSet::from_manifest(&corpus, Split::Dev, model.frontend())?;
    let outcome = train(model, &dev, &cfg.train)?;
    outcome.save(&out)?;
    write(&out.join("run_config.txt"), &cfg.to_text())?;
    let best = outcome.log.best();
    println!(
        "{}: best epoch {} (val_total {:.6}); checkpoints and train_log.csv in {}",
        cfg.method.name(),
        best.epoch,
        best.val_total,
        out.display()
    );
    Ok(())
}

fn eval_cmd(common: &Common, data: &Path, checkpoint: &Path) -> Result<()> {
    let cfg = resolve(common, &[])?;
    let model = open_model(checkpoint)?;
    let corpus = open_corpus(data)?;
    let variant = model_variant(&model).unwrap_or(cfg.train.variant);
    let eval = FeatureSet::from_manifest(&corpus, Split::Eval, model.frontend())?;
    let index = EmbeddingIndex::build(&model, &eval)?;
    let k = cfg.topk.max(*RECALL_KS.last().expect("nonempty")).min(index.len());
    let results = retrieve_all(&model, &index, &eval, variant, k)?;
    let ranks = target_ranks(&results);
    let per_class = per_class_recall(&ranks, &eval.ops, corpus.manifest.scene.name, 1);
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("run/eval"));
    std::fs::create_dir_all(&out)?;
    write(&out.join("recall.csv"), &recall_csv(&ranks))?;
    write(&out.join("per_class.csv"), &per_class_csv(&per_class))?;
    write(&out.join("results.csv"), &results_csv(&results))?;
    let mut summary = format!(
        "checkpoint: {}\nscene: {}\nvariant: {}\nqueries: {}\n",
        checkpoint.display(),
        corpus.manifest.scene.name.name(),
        crate::trainer::variant_name(variant),
        ranks.len()
    );
    for kk in RECALL_KS {
        let _ = writeln!(summary, "R@{kk}: {:.4}", recall_at_k(&ranks, kk));
    }
    let _ = writeln!(summary, "per-class R@1:");
    for r in &per_class {
        let v = r.recall.map_or_else(|| "N/A".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(summary, "  {:<15} {v} ({} queries)", r.bucket, r.queries);
    }
    write(&out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn query_cmd(common: &Common, data: &Path, checkpoint: &Path, wav: &Path, text: &str) -> Result<()> {
    let cfg = resolve(common, &[])?;
    let model = open_model(checkpoint)?;
    let corpus = open_corpus(data)?;
    require("query audio", wav)?;
    let (audio, sr) = read_wav(wav)?;
    if sr != model.frontend().config().sample_rate_hz {
        return Err(Error::Config(format!("query audio is {sr} Hz, model expects {}", model.frontend().config().sample_rate_hz)));
    }
    let eval = FeatureSet::from_manifest(&corpus, Split::Eval, model.frontend())?;
    let index = EmbeddingIndex::build(&model, &eval)?;
    if text.trim().is_empty() {
        println!("baseline mode: no text given, querying with audio only");
    } else {
        println!("composed query: audio + \"{}\"", text.trim());
    }
    let r = query(&model, &index, &audio, text, cfg.topk.min(index.len()))?;
    for (i, h) in r.hits.iter().enumerate() {
        println!("{:>3}  {}  {:.9}", i + 1, h.id, h.score);
    }
    Ok(())
}

fn export_cmd(common: &Common, checkpoint: &Path, probes: Option<String>) -> Result<()> {
    let cfg = resolve(common, &[("probes", probes)])?;
    let model = open_model(checkpoint)?;
    let mut synth = cfg.synth.clone();
    synth.sample_rate_hz = model.frontend().config().sample_rate_hz;
    if synth.clip_samples() != model.clip_samples() {
        return Err(Error::Config(format!(
            "probe clips would have {} samples, model expects {} (check --preset)",
            synth.clip_samples(),
            model.clip_samples()
        )));
    }
    let export = export_embedding_diffs(&model, &synth, &cfg.probes, cfg.seed)?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("run"));
    std::fs::create_dir_all(&out)?;
    let path = out.join("embedding_diffs.csv");
    write(&path, &export.to_csv())?;
    let s = &export.stats;
    println!("wrote {} points to {}", export.points.len(), path.display());
    println!("centroid distance {:.4}, mean within-cluster radius {:.4}", s.centroid_distance, s.mean_radius);
    for (label, ok) in &s.text_matches {
        println!("text \"{label}\" nearest to its own cluster: {}", if *ok { "yes" } else { "no" });
    }
    Ok(())
}
