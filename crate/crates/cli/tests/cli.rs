use std::fs;
use std::path::Path;

use evprof_cli::{dispatch, RunManifest};

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["evprof"];
    argv.extend_from_slice(args);
    dispatch(argv)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn manifest(path: &Path) -> RunManifest {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_writes_sessions_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.jsonl");
    assert_eq!(run(&["synth", "--evs", "5", "--sessions", "10", "--seed", "1", "--out", p(&out)]), 0);
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 50);
    let m = manifest(&dir.path().join("s.jsonl.manifest.json"));
    assert_eq!(m.command, "synth");
    assert_eq!(m.seed, Some(1));
    assert_eq!(m.stages[0].rows, 50);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["experiment", "binary", "--out", "x"]), 2);
    assert_eq!(run(&["frobnicate"]), 2);
    assert_eq!(run(&[]), 2);
    assert_eq!(run(&["--workers", "many", "synth"]), 2);
}

#[test]
fn domain_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["report", "--in", p(dir.path())]), 1);
    fs::write(
        dir.path().join("cells.csv"),
        "suite,config,repetition,target,classifier,params,status,accuracy,macro_f1,positive_f1,error\n",
    )
    .unwrap();
    assert_eq!(run(&["report", "--in", p(dir.path())]), 1);
    let missing = dir.path().join("nope.jsonl");
    assert_eq!(run(&["extract", "--sessions", p(&missing), "--out", p(&dir.path().join("o"))]), 1);
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "unknown_key = 1\n").unwrap();
    assert_eq!(run(&["--config", p(&cfg), "synth", "--evs", "1", "--sessions", "1", "--out", "x"]), 1);
}

#[test]
fn ingest_applies_filters() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.jsonl");
    assert_eq!(run(&["synth", "--evs", "3", "--sessions", "4", "--out", p(&s)]), 0);
    let out = dir.path().join("kept.csv");
    let code = run(&[
        "ingest", "--input", p(&s), "--format", "acn-json", "--min-points", "100",
        "--min-sessions", "5", "--out-format", "csv", "--out", p(&out),
    ]);
    assert_eq!(code, 0);
    // every EV has only four sessions
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 1);
    let m = manifest(&dir.path().join("kept.csv.manifest.json"));
    assert_eq!(m.stages[1].rejected, 12);
    assert!(m.verify_inputs().unwrap());
}

fn pipeline(dir: &Path, workers: &str) -> String {
    let s = dir.join("s.jsonl");
    let seg = dir.join("seg.jsonl");
    let feats = dir.join("f.csv");
    let out = dir.join("exp");
    let cfg = dir.join("run.toml");
    fs::write(&cfg, "seed = 7\n[experiment]\nreps = 2\nk_folds = 2\n").unwrap();
    let c = p(&cfg);
    assert_eq!(
        run(&["--config", c, "synth", "--evs", "3", "--sessions", "60", "--separation", "overlapping", "--out", p(&s)]),
        0
    );
    assert_eq!(
        run(&["--config", c, "extract", "--sessions", p(&s), "--out", p(&seg), "--rejects", p(&dir.join("rej.csv"))]),
        0
    );
    assert_eq!(run(&["--config", c, "featurize", "--segments", p(&seg), "--out", p(&feats)]), 0);
    let code = run(&[
        "--config", c, "--workers", workers, "experiment", "binary", "--features", p(&feats),
        "--classifiers", "dt", "--values", "1,2", "--nof", "20", "--out", p(&out),
    ]);
    assert_eq!(code, 0);
    assert_eq!(run(&["report", "--in", p(&out)]), 0);
    fs::read_to_string(out.join("summary.csv")).unwrap()
}

#[test]
fn pipeline_is_deterministic_across_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = pipeline(a.path(), "1");
    let second = pipeline(b.path(), "3");
    assert_eq!(first, second);
    assert!(first.contains("binary,q-prime=1,decision-tree,2,"));

    let exp = a.path().join("exp");
    let m = manifest(&exp.join("manifest.json"));
    assert_eq!(m.seed, Some(7));
    assert_eq!(m.config["experiment.reps"], "2");
    assert_eq!(m.config["selection.nof"], "20");
    assert!(m.verify_inputs().unwrap());
    for name in ["f1_vs_qprime.csv", "accuracy_grid.csv", "summary.md", "manifest.json"] {
        assert!(exp.join("report").join(name).is_file(), "{name}");
    }
    let f1 = fs::read_to_string(exp.join("report/f1_vs_qprime.csv")).unwrap();
    assert_eq!(f1.lines().count(), 3);
}
