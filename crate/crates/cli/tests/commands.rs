use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use relstab_core::checkpoint::load_checkpoint;
use relstab_core::model::build_default_model;
use tempfile::TempDir;

const SMALL: [&str; 4] = ["--set", "count_class0=30", "--set", "count_class1=30"];

fn relstab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relstab")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn run_ok(args: &[&str]) -> Output {
    let out = relstab(args);
    assert_eq!(code(&out), 0, "{args:?} failed: {}", stderr(&out));
    out
}

fn small_corpus(dir: &Path) -> PathBuf {
    let corpus = dir.join("corpus");
    let mut args = vec!["--out", s(&corpus)];
    args.extend(SMALL);
    args.push("generate");
    run_ok(&args);
    corpus
}

fn train_small(dir: &Path, corpus: &Path, name: &str, epochs: &str) -> PathBuf {
    let out = dir.join(name);
    run_ok(&["--out", s(&out), "train", "--corpus", s(corpus), "--epochs", epochs]);
    out
}

/// Every file under `dir`, relative path and bytes, sorted by path.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    let mut files = Vec::new();
    walk(dir, dir, &mut files);
    files.sort();
    files
}

fn no_partials(dir: &Path) {
    for (path, _) in snapshot(dir) {
        assert!(!path.to_string_lossy().ends_with(".partial"), "leftover {}", path.display());
    }
}

#[test]
fn generate_is_byte_identical_for_a_fixed_seed() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let mut args = vec!["--seed", "1", "--out", s(dir)];
        args.extend(SMALL);
        args.push("generate");
        run_ok(&args);
    }
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    assert_eq!(sa.iter().filter(|(p, _)| p.starts_with("images")).count(), 60);
    assert_eq!(sa, sb);
    no_partials(&a);
}

#[test]
fn invalid_blob_config_exits_2() {
    let tmp = TempDir::new().unwrap();
    let out = relstab(&["--out", s(tmp.path()), "--set", "blob_offset=40", "generate"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("error"), "{}", stderr(&out));
    assert!(!tmp.path().join("labels.csv").exists());
}

#[test]
fn unknown_setting_and_bad_usage_exit_2() {
    assert_eq!(code(&relstab(&["--set", "colour=blue", "generate"])), 2);
    assert_eq!(code(&relstab(&["frobnicate"])), 2);
    assert_eq!(code(&relstab(&["--help"])), 0);
}

#[test]
fn config_file_is_applied_and_missing_file_exits_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("exp.cfg");
    fs::write(&cfg, "# tiny corpus\ncount_class0 = 3\ncount_class1 = 2\n").unwrap();
    let out = tmp.path().join("c");
    run_ok(&["--config", s(&cfg), "--out", s(&out), "generate"]);
    assert_eq!(fs::read_dir(out.join("images")).unwrap().count(), 5);
    assert_eq!(code(&relstab(&["--config", s(&tmp.path().join("nope.cfg")), "generate"])), 3);
}

#[test]
fn train_on_missing_corpus_exits_3() {
    let tmp = TempDir::new().unwrap();
    let out = relstab(&["--out", s(tmp.path()), "train", "--corpus", s(&tmp.path().join("absent"))]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn zero_epochs_writes_header_only_trace_and_initial_parameters() {
    let tmp = TempDir::new().unwrap();
    let corpus = small_corpus(tmp.path());
    let out = train_small(tmp.path(), &corpus, "run", "0");
    assert_eq!(fs::read_to_string(out.join("trace.csv")).unwrap(), "epoch,loss,val_accuracy\n");
    let ckpt = load_checkpoint::<f32>(&out.join("model.ckpt")).unwrap();
    let (config, init) = build_default_model::<f32>(1);
    assert_eq!(ckpt.config, config);
    assert_eq!(ckpt.params, init);
    assert!(out.join("loss.svg").exists());
}

#[test]
fn training_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let corpus = small_corpus(tmp.path());
    let a = train_small(tmp.path(), &corpus, "a", "2");
    let b = train_small(tmp.path(), &corpus, "b", "2");
    let trace = fs::read_to_string(a.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 3);
    assert_eq!(trace, fs::read_to_string(b.join("trace.csv")).unwrap());
    assert_eq!(fs::read(a.join("model.ckpt")).unwrap(), fs::read(b.join("model.ckpt")).unwrap());
    no_partials(&a);
}

#[test]
fn corrupt_writes_corpus_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let corpus = small_corpus(tmp.path());
    let out = tmp.path().join("noisy");
    run_ok(&["--out", s(&out), "corrupt", "--corpus", s(&corpus), "--kind", "gaussian", "--lambda", "0.1", "--fraction", "0.5"]);
    let manifest = fs::read_to_string(out.join("manifest.csv")).unwrap();
    let corrupted = manifest.lines().skip(1).filter(|l| l.split(',').nth(1) == Some("1")).count();
    assert_eq!(corrupted, 30);
    assert_eq!(fs::read(out.join("labels.csv")).unwrap(), fs::read(corpus.join("labels.csv")).unwrap());

    let bad = relstab(&["--out", s(&out), "corrupt", "--corpus", s(&corpus), "--kind", "salt", "--fraction", "0.5"]);
    assert_eq!(code(&bad), 2);
    let bad = relstab(&["--out", s(&out), "corrupt", "--corpus", s(&corpus), "--kind", "rician", "--fraction", "1.5"]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn explain_fans_out_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let corpus = small_corpus(tmp.path());
    let run = train_small(tmp.path(), &corpus, "run", "1");
    let ckpt = run.join("model.ckpt");
    let explain = |out: &Path| {
        run_ok(&[
            "--out",
            s(out),
            "--set",
            "lime_samples=100",
            "explain",
            "--corpus",
            s(&corpus),
            "--checkpoint",
            s(&ckpt),
            "--ids",
            "3,40",
            "--explainers",
            "lrp,lime,occlusion",
        ]);
    };
    let (a, b) = (tmp.path().join("ea"), tmp.path().join("eb"));
    explain(&a);
    explain(&b);
    let pgms: Vec<_> = snapshot(&a).into_iter().filter(|(p, _)| p.extension().is_some_and(|e| e == "pgm")).collect();
    assert_eq!(pgms.len(), 6);
    let sidecar = fs::read_to_string(a.join("maps").join("0003_lime.csv")).unwrap();
    assert!(sidecar.starts_with("min,max,explainer,target,seed,response\n"), "{sidecar}");
    assert!(sidecar.trim_end().ends_with(",probability"), "{sidecar}");
    let predictions = fs::read_to_string(a.join("predictions.csv")).unwrap();
    assert_eq!(predictions.lines().count(), 3);
    assert_eq!(snapshot(&a), snapshot(&b));
    no_partials(&a);
}

#[test]
fn explain_rejects_bad_ids_and_explainers() {
    let tmp = TempDir::new().unwrap();
    let corpus = small_corpus(tmp.path());
    let ckpt = train_small(tmp.path(), &corpus, "run", "0").join("model.ckpt");
    let base = ["--out", s(tmp.path()), "explain", "--corpus", s(&corpus), "--checkpoint", s(&ckpt)];

    let out = relstab(&[&base[..], &["--ids", "2,999"]].concat());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("999"), "{}", stderr(&out));

    let out = relstab(&[&base[..], &["--ids", "2", "--explainers", "lrp,gradcam"]].concat());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("gradcam"), "{}", stderr(&out));
}

#[test]
fn rssa_emits_one_matrix_per_explainer() {
    let tmp = TempDir::new().unwrap();
    let corpus = small_corpus(tmp.path());
    let ckpt = train_small(tmp.path(), &corpus, "run", "1").join("model.ckpt");
    let out = tmp.path().join("rssa");
    run_ok(&[
        "--out",
        s(&out),
        "--set",
        "eval_images=1",
        "--set",
        "lambdas=0,0.15",
        "--set",
        "explainers=lrp,occlusion",
        "rssa",
        "--corpus",
        s(&corpus),
        "--checkpoint",
        s(&ckpt),
    ]);
    for k in ["lrp", "occlusion"] {
        let text = fs::read_to_string(out.join(format!("rssa_{k}.csv"))).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "kind,0,0.15");
        assert_eq!(lines.len(), 4);
        for line in &lines[1..] {
            let at_zero: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert!((at_zero - 1.0).abs() <= 1e-6, "{line}");
        }
        assert!(out.join(format!("rssa_{k}.svg")).exists());
    }
    assert!(!out.join("rssa_lime.csv").exists());
    let didactic = fs::read_to_string(out.join("didactic.csv")).unwrap();
    for line in didactic.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let fraction: f64 = fields[4].parse().unwrap();
        assert!((0.0..=1.0).contains(&fraction), "{line}");
    }
    assert_eq!(didactic.lines().count(), 3);
    no_partials(&out);
}

#[test]
fn small_sweep_rows_and_shared_clean_accuracy() {
    let tmp = TempDir::new().unwrap();
    let corpus = small_corpus(tmp.path());
    let out = tmp.path().join("sweep");
    let mut args = vec![
        "--out",
        s(&out),
        "--jobs",
        "2",
        "--set",
        "kinds=gaussian,rician",
        "--set",
        "lambdas=0,0.2",
        "--set",
        "fractions=0,0.5,1",
        "--set",
        "sweep_epochs=1",
        "--set",
        "sweep_eval_images=1",
        "--set",
        "explainers=lrp",
    ];
    args.extend(["sweep", "--corpus", s(&corpus)]);
    run_ok(&args);

    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), relstab_cli::commands::SWEEP_HEADER);
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2 * 2 * 3);
    let clean: Vec<&str> = rows.iter().filter(|r| r[1] == "0" || r[2] == "0").map(|r| r[4]).collect();
    assert_eq!(clean.len(), 2 * (3 + 1));
    assert!(clean.iter().all(|a| *a == clean[0]), "{clean:?}");
    for r in &rows {
        assert_eq!(r[9], "ok");
        assert!(r[6].is_empty() && r[7].is_empty() && r[8].is_empty());
    }
    assert!(out.join("accuracy_gaussian.svg").exists() && out.join("rssa_vs_lambda.svg").exists());
    no_partials(&out);

    // Same seed and grid on one worker produces the same table.
    let again = tmp.path().join("again");
    args[1] = s(&again);
    args[3] = "1";
    run_ok(&args);
    assert_eq!(fs::read(again.join("sweep.csv")).unwrap(), text.as_bytes());
}

#[test]
fn plot_is_deterministic_and_checks_schema() {
    let tmp = TempDir::new().unwrap();
    let sweep = tmp.path().join("sweep.csv");
    fs::write(
        &sweep,
        "kind,lambda,fraction,seed,val_accuracy,rssa_lrp,rssa_lime,rssa_occlusion,stamp_fraction,status\n\
         rician,0,0,1,0.9,1,1,1,,ok\nrician,0,0.5,1,0.8,1,1,1,,ok\nrician,0.15,0,1,0.9,0.8,0.6,0.7,,ok\n",
    )
    .unwrap();
    let (a, b) = (tmp.path().join("a.svg"), tmp.path().join("b.svg"));
    run_ok(&["plot", s(&sweep), "--kind", "accuracy", "--out", s(&a)]);
    run_ok(&["plot", s(&sweep), "--kind", "accuracy", "--out", s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    run_ok(&["plot", s(&sweep), "--kind", "rssa"]);
    assert!(tmp.path().join("sweep.svg").exists());

    let out = relstab(&["plot", s(&sweep), "--kind", "loss", "--out", s(&a)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("\"epoch\""), "{}", stderr(&out));

    let empty = tmp.path().join("empty.csv");
    fs::write(&empty, "epoch,loss,val_accuracy\n").unwrap();
    assert_eq!(code(&relstab(&["plot", s(&empty), "--kind", "loss"])), 2);
    assert_eq!(code(&relstab(&["plot", s(&tmp.path().join("absent.csv")), "--kind", "loss"])), 3);
}

#[test]
fn heatmap_has_a_cell_per_value() {
    let tmp = TempDir::new().unwrap();
    let matrix = tmp.path().join("rssa_lrp.csv");
    fs::write(&matrix, "kind,0,0.05,0.1,0.15,0.2\ngaussian,1,0.9,0.8,0.7,0.6\nrician,1,0.8,0.7,0.6,0.5\nchisq,1,0.9,0.9,0.8,0.7\n").unwrap();
    let svg_path = tmp.path().join("m.svg");
    run_ok(&["plot", s(&matrix), "--kind", "heatmap", "--out", s(&svg_path)]);
    let svg = fs::read_to_string(&svg_path).unwrap();
    assert_eq!(svg.matches("class=\"cell\"").count(), 3 * 5);
}
