//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. The desk-scale training criteria dominate the runtime.

mod common;

use std::path::Path;
use std::time::Instant;

use rand::Rng as _;

use querymod::dsp::{FrontEnd, FrontEndConfig};
use querymod::encoders::{Model, ModelConfig};
use querymod::nn::ops::{gelu, gelu_backward, layer_norm, layer_norm_backward, linear, linear_backward, sigmoid_bce};
use querymod::nn::{finite_diff_check, GradCheckOptions, ParamStore, Tensor};
use querymod::objective::{
    classification_loss, classification_loss_backward, contrastive_loss, pairwise_logits, pairwise_logits_backward,
    pairwise_logits_cached, BatchLogits, LossConfig, Variant,
};
use querymod::retrieval::{
    export_embedding_diffs, recall_at_k, retrieve_all, target_ranks, ContrastProbeSet, EmbeddingIndex, ProbeSpec,
};
use querymod::seed::rng_from_seed;
use querymod::synth::{
    apply_difference, build_dataset, crop_background, render_example, DiffKind, DifferenceOp, Scene, Split,
    SynthConfig,
};
use querymod::trainer::{train, FeatureSet, Method, TrainConfig};

type Criterion = (usize, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn report(n: usize, name: &str, o: &Outcome, secs: f64) -> bool {
    println!("criterion {n} {name:<28} {} ({:.0}s) {}", if o.pass { "PASS" } else { "FAIL" }, secs, o.detail);
    o.pass
}

// ---- 1: gradient suite ----

/// Runs `finite_diff_check` on a store whose gradients were filled by `fill`.
fn check_store(mut store: ParamStore, fill: impl Fn(&ParamStore) -> Vec<(&'static str, Tensor)>, f: impl Fn(&ParamStore) -> f64) -> f64 {
    for (name, g) in fill(&store) {
        store.accumulate_grad(name, &g).expect("grad");
    }
    finite_diff_check(&store, f, GradCheckOptions { max_coords: 400, ..Default::default() }).expect("check").max_rel_error
}

/// `sum(y * r)` for a fixed random `r` turns a tensor-valued op into a scalar.
fn projector(shape: &[usize], seed: u64) -> Tensor {
    Tensor::uniform(shape, 1.0, &mut rng_from_seed(seed))
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn primitive_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = rng_from_seed(seed);
    let (b, d, h) = (4, 6, 5);
    let mut out = Vec::new();

    let mut s = ParamStore::new();
    s.insert("x", Tensor::uniform(&[b, d], 1.0, &mut rng));
    s.insert("w", Tensor::uniform(&[d, h], 1.0, &mut rng));
    s.insert("b", Tensor::uniform(&[h], 1.0, &mut rng));
    let r = projector(&[b, h], seed + 1);
    let f = |s: &ParamStore| dot(&linear(s.value("x").unwrap(), s.value("w").unwrap(), s.value("b").unwrap()).unwrap(), &r);
    let fill = |s: &ParamStore| {
        let g = linear_backward(s.value("x").unwrap(), s.value("w").unwrap(), &r).unwrap();
        vec![("x", g.dx), ("w", g.dw), ("b", g.db)]
    };
    out.push(("linear", check_store(s, fill, f)));

    let mut s = ParamStore::new();
    s.insert("x", Tensor::uniform(&[b, d], 2.0, &mut rng));
    let r = projector(&[b, d], seed + 2);
    let f = |s: &ParamStore| dot(&gelu(s.value("x").unwrap()), &r);
    let fill = |s: &ParamStore| vec![("x", gelu_backward(s.value("x").unwrap(), &r).unwrap())];
    out.push(("gelu", check_store(s, fill, f)));

    let mut s = ParamStore::new();
    s.insert("x", Tensor::uniform(&[b, d], 1.0, &mut rng));
    s.insert("gamma", Tensor::uniform(&[d], 1.0, &mut rng));
    s.insert("beta", Tensor::uniform(&[d], 1.0, &mut rng));
    let r = projector(&[b, d], seed + 3);
    let ln = |s: &ParamStore| layer_norm(s.value("x").unwrap(), s.value("gamma").unwrap(), s.value("beta").unwrap(), 1e-5).unwrap();
    let f = |s: &ParamStore| dot(&ln(s).0, &r);
    let fill = |s: &ParamStore| {
        let (_, cache) = ln(s);
        let (dx, dg, db) = layer_norm_backward(&cache, s.value("gamma").unwrap(), &r).unwrap();
        vec![("x", dx), ("gamma", dg), ("beta", db)]
    };
    out.push(("layer_norm", check_store(s, fill, f)));

    let mut s = ParamStore::new();
    s.insert("z", Tensor::uniform(&[b, 5], 3.0, &mut rng));
    let y = Tensor::matrix(b, 5, (0..b * 5).map(|_| rng.gen_bool(0.5) as u8 as f64).collect()).unwrap();
    let f = |s: &ParamStore| sigmoid_bce(s.value("z").unwrap(), &y).unwrap().0;
    let fill = |s: &ParamStore| vec![("z", sigmoid_bce(s.value("z").unwrap(), &y).unwrap().1)];
    out.push(("sigmoid_bce", check_store(s, fill, f)));

    let mut s = ParamStore::new();
    s.insert("pa", Tensor::uniform(&[b, 5], 0.3, &mut rng).map(|v| 0.5 + v.clamp(-0.45, 0.45)));
    s.insert("pb", Tensor::uniform(&[b, 5], 0.3, &mut rng).map(|v| 0.5 + v.clamp(-0.45, 0.45)));
    let v = Tensor::matrix(b, 5, (0..b * 5).map(|_| rng.gen_bool(0.5) as u8 as f64).collect()).unwrap();
    let w = Tensor::matrix(b, 5, (0..b * 5).map(|_| rng.gen_bool(0.5) as u8 as f64).collect()).unwrap();
    let f = |s: &ParamStore| classification_loss(s.value("pa").unwrap(), &v, s.value("pb").unwrap(), &w).unwrap();
    let fill = |s: &ParamStore| {
        let (ga, gb) = classification_loss_backward(s.value("pa").unwrap(), &v, s.value("pb").unwrap(), &w).unwrap();
        vec![("pa", ga), ("pb", gb)]
    };
    out.push(("classification_loss", check_store(s, fill, f)));

    let mut s = ParamStore::new();
    s.insert("q", Tensor::uniform(&[b, d], 1.0, &mut rng));
    s.insert("t", Tensor::uniform(&[b, d], 1.0, &mut rng));
    let f = |s: &ParamStore| {
        contrastive_loss(&pairwise_logits(s.value("q").unwrap(), s.value("t").unwrap(), 0.0).unwrap()).unwrap().0
    };
    let fill = |s: &ParamStore| {
        let (z, cache) = pairwise_logits_cached(s.value("q").unwrap(), s.value("t").unwrap(), 0.0).unwrap();
        let (_, dz) = contrastive_loss(&z).unwrap();
        let (dq, dt) = pairwise_logits_backward(&cache, &dz).unwrap();
        vec![("q", dq), ("t", dt)]
    };
    out.push(("cosine_logits+contrastive", check_store(s, fill, f)));
    out
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst_model: f64 = 0.0;
    for seed in [11u64, 22, 33] {
        let (model, batch) = common::random_model_and_batch(seed, 6);
        for (variant, rho) in [(Variant::Baseline, 0.0), (Variant::Proposed, 0.0), (Variant::Proposed, 1.0)] {
            let cfg = LossConfig { variant, rho, tau: 0.0 };
            worst_model = worst_model.max(common::total_loss_grad_error(&model, &batch, &cfg, 600, seed));
        }
    }
    let mut worst_prim: (&str, f64) = ("", 0.0);
    for seed in [1u64, 2, 3] {
        for (name, e) in primitive_errors(seed) {
            if e >= worst_prim.1 {
                worst_prim = (name, e);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_model < 1e-4 && worst_prim.1 < 1e-5 && secs < 120.0,
        format!(
            "total_loss max rel err {worst_model:.2e} (< 1e-4), primitives max {:.2e} in {} (< 1e-5), {secs:.1}s (< 120s)",
            worst_prim.1, worst_prim.0
        ),
    )
}

// ---- 2: closed forms ----

fn criterion_2() -> Outcome {
    let loss = |z: Tensor| contrastive_loss(&BatchLogits { z, tau: 0.0 }).unwrap().0;
    let mut worst: f64 = 0.0;
    let b1 = loss(Tensor::matrix(1, 1, vec![0.7]).unwrap());
    let exact_b1 = b1 == 0.0;
    for b in [2usize, 4, 8] {
        worst = worst.max((loss(Tensor::zeros(&[b, b])) - b as f64 * (b as f64).ln()).abs());
    }
    for s in [0.0f64, 1.0, 5.0] {
        let z = Tensor::matrix(2, 2, vec![s, 0.0, 0.0, s]).unwrap();
        worst = worst.max((loss(z) - 2.0 * (1.0 + (-s).exp()).ln()).abs());
    }
    outcome(exact_b1 && worst <= 1e-12, format!("B=1 loss {b1}, max deviation from closed forms {worst:.1e} (<= 1e-12)"))
}

// ---- 3: retrieval oracle ----

fn criterion_3() -> Outcome {
    let mut rng = rng_from_seed(3030);
    let mut mismatches = 0;
    for inst in 0..50 {
        let n = rng.gen_range(1..=500);
        let d = rng.gen_range(2..=32);
        let mut rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        for i in 0..n / 10 {
            let src = rng.gen_range(0..n);
            rows[(i * 7 + 3) % n] = rows[src].clone();
        }
        let mut ids: Vec<String> = (0..n).map(|i| format!("item_{i:04}")).collect();
        ids.reverse();
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let index = EmbeddingIndex::new(ids.clone(), Tensor::matrix(n, d, flat).unwrap()).unwrap();
        let q: Vec<f64> = if inst % 5 == 0 { rows[0].clone() } else { (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let got: Vec<String> = index.search(&q, n, None).unwrap().hits.into_iter().map(|h| h.id).collect();
        if got != common::brute_force_order(&ids, &rows, &q) {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches}/50 instances differ from the brute-force cosine sort"))
}

// ---- 4, 5, 6: desk-scale training ----

struct SeedRun {
    r1: [f64; 3],
    probe: [f64; 3],
    minutes: f64,
    models: Vec<Model>,
}

fn desk_seed(seed: u64) -> SeedRun {
    let start = Instant::now();
    let scene = Scene::Rain;
    let synth = SynthConfig::desk();
    let frontend = FrontEnd::new(FrontEndConfig::desk()).unwrap();
    let dev = FeatureSet::render(scene, &synth, seed, Split::Dev, 2000, &frontend).unwrap();
    let eval = FeatureSet::render(scene, &synth, seed, Split::Eval, 200, &frontend).unwrap();
    let probes = ContrastProbeSet::render(scene, &synth, seed, 200, &frontend).unwrap();
    let mut run = SeedRun { r1: [0.0; 3], probe: [0.0; 3], minutes: 0.0, models: Vec::new() };
    for (m, method) in Method::ALL.into_iter().enumerate() {
        let model = Model::new(ModelConfig { seed, ..Default::default() }, scene, *frontend.config(), synth.clip_samples()).unwrap();
        let cfg = TrainConfig { seed, progress_every: 0, ..TrainConfig::for_method(method) };
        let best = train(model, &dev, &cfg).unwrap().best;
        let index = EmbeddingIndex::build(&best, &eval).unwrap();
        let ranks = target_ranks(&retrieve_all(&best, &index, &eval, cfg.variant, 10).unwrap());
        run.r1[m] = recall_at_k(&ranks, 1);
        run.probe[m] = probes.recall_at_1(&best, cfg.variant).unwrap();
        println!(
            "  seed {seed} {:<13} R@1 {:.3} R@5 {:.3} R@10 {:.3} probe R@1 {:.3}",
            method.name(),
            run.r1[m],
            recall_at_k(&ranks, 5),
            recall_at_k(&ranks, 10),
            run.probe[m]
        );
        run.models.push(best);
    }
    run.minutes = start.elapsed().as_secs_f64() / 60.0;
    run
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn criterion_4(runs: &[SeedRun]) -> Outcome {
    let m: Vec<f64> = (0..3).map(|k| mean(runs.iter().map(|r| r.r1[k]))).collect();
    let slowest = runs.iter().map(|r| r.minutes).fold(0.0, f64::max);
    outcome(
        m[2] >= m[1] && m[1] >= m[0] && m[2] - m[0] >= 0.05 && slowest < 15.0,
        format!(
            "mean R@1 baseline {:.3}, no-classif {:.3}, with-classif {:.3}; gap {:.3} (>= 0.05); slowest seed {slowest:.1} min (< 15)",
            m[0], m[1], m[2], m[2] - m[0]
        ),
    )
}

fn criterion_5(runs: &[SeedRun]) -> Outcome {
    let base = mean(runs.iter().map(|r| r.probe[0]));
    let with = mean(runs.iter().map(|r| r.probe[2]));
    outcome(
        base <= 0.6 && with >= base + 0.2,
        format!("probe R@1 baseline {base:.3} (<= 0.6), with-classif {with:.3} (>= baseline + 0.2)"),
    )
}

fn criterion_6(runs: &[SeedRun]) -> Outcome {
    let synth = SynthConfig::desk();
    let spec = ProbeSpec::default();
    let trained = export_embedding_diffs(&runs[0].models[2], &synth, &spec, 1).unwrap().stats;
    let baseline = export_embedding_diffs(&runs[0].models[0], &synth, &spec, 1).unwrap().stats;
    let ok = trained.clusters_separated() && trained.texts_match();
    outcome(
        ok,
        format!(
            "with-classif: centroid distance {:.3} vs mean radius {:.3}, text points matched {:?}; baseline: distance {:.3}, radius {:.3}, text points matched {:?}",
            trained.centroid_distance,
            trained.mean_radius,
            trained.text_matches,
            baseline.centroid_distance,
            baseline.mean_radius,
            baseline.text_matches
        ),
    )
}

// ---- 7: dataset suite ----

fn criterion_7() -> Outcome {
    let mut problems = Vec::new();

    let cfg = SynthConfig::test_preset();
    let mut swaps = 0;
    for scene in [Scene::Rain, Scene::Traffic] {
        let bank = cfg.source_bank(scene, Split::Dev);
        for trial in 0..10u64 {
            let mut rng = rng_from_seed(trial);
            let bg = bank.background(&mut rng).unwrap();
            let (alpha, beta) = crop_background(&bg, cfg.clip_samples(), &mut rng).unwrap();
            let ev = scene.events()[trial as usize % 4];
            let pairs = [
                (DiffKind::IncBg, DiffKind::DecBg, scene.background()),
                (DiffKind::AddEvent, DiffKind::RemoveEvent, ev),
                (DiffKind::IncEvent, DiffKind::DecEvent, ev),
            ];
            for (first, second, class) in pairs {
                let mag = 3.0 + trial as f64 * 0.5;
                let (x_a, x_b) =
                    apply_difference(&alpha, &beta, &DifferenceOp::new(first, class, mag), &bank, &mut rng_from_seed(trial + 100)).unwrap();
                let (y_a, y_b) =
                    apply_difference(&beta, &alpha, &DifferenceOp::new(second, class, mag), &bank, &mut rng_from_seed(trial + 100)).unwrap();
                if x_a != y_b || x_b != y_a {
                    problems.push(format!("swap {first:?}/{second:?} differs"));
                }
                swaps += 1;
            }
        }
    }

    let mut unsound = 0;
    for scene in [Scene::Rain, Scene::Traffic] {
        for i in 0..250 {
            let ex = render_example(scene, &cfg, 70, Split::Dev, i).unwrap();
            if let Err(e) = common::labels_sound(scene, &ex.ops, &ex.labels_a, &ex.labels_b) {
                unsound += 1;
                problems.push(format!("{}: {e}", ex.id));
            }
        }
    }

    let dir = tempfile::tempdir().unwrap();
    build_dataset(Scene::Traffic, 30, 10, &cfg, 99, &dir.path().join("x")).unwrap();
    build_dataset(Scene::Traffic, 30, 10, &cfg, 99, &dir.path().join("y")).unwrap();
    let identical = same_tree(&dir.path().join("x"), &dir.path().join("y"));
    if !identical {
        problems.push("regenerated corpus differs".into());
    }

    let acc = common::source_class_separability(100);
    let pass = problems.is_empty() && acc >= 0.9;
    outcome(
        pass,
        format!(
            "{swaps} swap pairs, 500 examples label-checked ({unsound} unsound), regeneration identical: {identical}, source-class accuracy {acc:.3} (>= 0.9){}",
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    )
}

fn same_tree(a: &Path, b: &Path) -> bool {
    let list = |p: &Path| {
        let mut v: Vec<_> = walk(p).into_iter().map(|f| f.strip_prefix(p).unwrap().to_path_buf()).collect();
        v.sort();
        v
    };
    let (la, lb) = (list(a), list(b));
    la == lb && la.iter().all(|f| std::fs::read(a.join(f)).unwrap() == std::fs::read(b.join(f)).unwrap())
}

fn walk(p: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(p).unwrap() {
        let path = e.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out
}

// ---- 8: recall properties ----

fn criterion_8() -> Outcome {
    let hand = [1usize, 3, 2, 4];
    let got: Vec<f64> = (1..=4).map(|k| recall_at_k(&hand, k)).collect();
    let hand_ok = got == [0.25, 0.5, 0.75, 1.0];
    let mut rng = rng_from_seed(88);
    let mut props_ok = true;
    for _ in 0..200 {
        let n = rng.gen_range(1..=300);
        let ranks: Vec<usize> = (0..rng.gen_range(1..=100)).map(|_| rng.gen_range(1..=n)).collect();
        let curve: Vec<f64> = (1..=n).map(|k| recall_at_k(&ranks, k)).collect();
        props_ok &= curve.windows(2).all(|w| w[0] <= w[1]) && curve[n - 1] == 1.0;
    }
    outcome(hand_ok && props_ok, format!("hand example {got:?}; monotone and R@N = 1 over 200 random rank sets: {props_ok}"))
}

// ---- 9: determinism ----

fn pipeline(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let cfg_path = dir.join("run.cfg");
    std::fs::write(&cfg_path, "preset = test\nn_dev = 160\nn_eval = 40\nepochs = 40\nprogress_every = 0\n").unwrap();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let corpus = s(&dir.join("corpus"));
    let run = s(&dir.join("run"));
    let eval = s(&dir.join("eval"));
    let ckpt = s(&dir.join("run/best.ckpt"));
    let cfg = s(&cfg_path);
    let steps: [Vec<&str>; 3] = [
        vec!["querymod", "synth", "--config", &cfg, "--seed", "9", "--out", &corpus],
        vec!["querymod", "train", "--config", &cfg, "--seed", "9", "--data", &corpus, "--out", &run],
        vec!["querymod", "eval", "--config", &cfg, "--data", &corpus, "--checkpoint", &ckpt, "--out", &eval],
    ];
    for args in steps {
        assert_eq!(querymod::cli::run(args.clone()), 0, "{args:?}");
    }
    ["recall.csv", "per_class.csv", "results.csv"]
        .iter()
        .map(|f| (f.to_string(), std::fs::read(dir.join("eval").join(f)).unwrap()))
        .collect()
}

fn criterion_9() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = pipeline(a.path());
    let second = pipeline(b.path());
    let differing: Vec<&str> = first.iter().zip(&second).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0.as_str()).collect();
    outcome(
        differing.is_empty(),
        format!("synth -> train -> eval twice with seed 9; differing metric files: {differing:?}"),
    )
}

/// Criterion numbers given on the command line select a subset; none runs
/// everything.
fn main() {
    let picked: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |n: usize| picked.is_empty() || picked.contains(&n);
    let simple: Vec<Criterion> = vec![
        (1, "gradient suite", criterion_1),
        (2, "closed-form losses", criterion_2),
        (3, "retrieval oracle", criterion_3),
        (7, "dataset suite", criterion_7),
        (8, "recall properties", criterion_8),
        (9, "pipeline determinism", criterion_9),
    ];
    let mut all = true;
    for (n, name, f) in simple.into_iter().filter(|c| want(c.0)) {
        let t = Instant::now();
        let o = f();
        all &= report(n, name, &o, t.elapsed().as_secs_f64());
    }

    if want(4) || want(5) || want(6) {
        let t = Instant::now();
        let runs: Vec<SeedRun> = [1u64, 2, 3].into_iter().map(desk_seed).collect();
        let secs = t.elapsed().as_secs_f64();
        all &= report(4, "method ordering", &criterion_4(&runs), secs);
        all &= report(5, "text-necessity probe", &criterion_5(&runs), 0.0);
        let t = Instant::now();
        all &= report(6, "difference-embedding layout", &criterion_6(&runs), t.elapsed().as_secs_f64());
    }

    println!("acceptance: {}", if all { "all criteria passed" } else { "FAILED" });
    if !all {
        std::process::exit(1);
    }
}
