use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_querymod"))
}

fn run(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let out = bin().current_dir(dir).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into(), String::from_utf8_lossy(&out.stderr).into())
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let (code, stdout, stderr) = run(dir, args);
    assert_eq!(code, 0, "{args:?}\nstdout: {stdout}\nstderr: {stderr}");
    stdout
}

#[test]
fn full_pipeline_on_the_test_preset() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("run.cfg"), "# small run\npreset = test\nn_dev = 128\nn_eval = 30\nepochs = 8\nprogress_every = 0\n").unwrap();

    ok(dir, &["synth", "--config", "run.cfg", "--seed", "3", "--scene", "traffic"]);
    assert!(dir.join("corpus/manifest.json").exists());
    assert!(dir.join("corpus/run_config.txt").exists());

    ok(dir, &["train", "--config", "run.cfg", "--seed", "3", "--variant", "with-classif"]);
    for f in ["best.ckpt", "final.ckpt", "train_log.csv", "run_config.txt"] {
        assert!(dir.join("run").join(f).exists(), "{f}");
    }
    let log = std::fs::read_to_string(dir.join("run/train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 9);

    let summary = ok(dir, &["eval", "--config", "run.cfg"]);
    assert!(summary.contains("R@1:"));
    let recall = std::fs::read_to_string(dir.join("run/eval/recall.csv")).unwrap();
    let mut lines = recall.lines();
    assert_eq!(lines.next(), Some("R@1,R@5,R@10"));
    let values: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(values.len(), 3);
    assert!(values.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(lines.next(), None);
    let per_class = std::fs::read_to_string(dir.join("run/eval/per_class.csv")).unwrap();
    assert_eq!(per_class.lines().next(), Some("class,queries,R@1"));
    assert_eq!(per_class.lines().count(), 8);
    let results = std::fs::read_to_string(dir.join("run/eval/results.csv")).unwrap();
    assert_eq!(results.lines().next(), Some("query_id,target_id,rank,score"));
    assert_eq!(results.lines().count(), 1 + 30 * 10);

    let audio_only = ok(dir, &["query", "--config", "run.cfg", "--wav", "corpus/audio/eval_00000_a.wav", "--topk", "3"]);
    assert!(audio_only.contains("baseline mode: no text given, querying with audio only"));
    assert_eq!(audio_only.lines().filter(|l| l.contains("eval_")).count(), 3);
    let composed = ok(dir, &["query", "--config", "run.cfg", "--wav", "corpus/audio/eval_00000_a.wav", "--text", "add dog bark"]);
    assert!(composed.contains("composed query"));

    ok(dir, &["export-diffs", "--config", "run.cfg", "--probes", "dog:12,car_horn:12"]);
    let diffs = std::fs::read_to_string(dir.join("run/embedding_diffs.csv")).unwrap();
    assert_eq!(diffs.lines().next(), Some("kind,label,x,y"));
    assert_eq!(diffs.lines().count(), 1 + 24 + 2);
}

#[test]
fn errors_map_to_distinct_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let (code, _, stderr) = run(dir, &["eval", "--preset", "test"]);
    assert_eq!(code, 3, "{stderr}");
    assert!(stderr.contains("missing artifact"), "{stderr}");

    std::fs::write(dir.join("bad.cfg"), "no_such_key = 1\n").unwrap();
    let (code, _, stderr) = run(dir, &["synth", "--config", "bad.cfg"]);
    assert_eq!(code, 2, "{stderr}");

    let (code, _, _) = run(dir, &["synth", "--scene", "desert"]);
    assert_eq!(code, 2);

    let (code, _, _) = run(dir, &["frobnicate"]);
    assert_eq!(code, 2);

    let (code, stdout, _) = run(dir, &["--help"]);
    assert_eq!(code, 0);
    for sub in ["synth", "train", "eval", "query", "export-diffs"] {
        assert!(stdout.contains(sub), "{sub} missing from help");
    }
}
