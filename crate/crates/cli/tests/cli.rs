use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn semifit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semifit")).args(args).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    assert!(!out.status.success());
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--out", p(dir), "--n-train", "200", "--n-test", "50", "--dim", "16", "--classes", "4"];
    args.extend_from_slice(extra);
    ok(&semifit(&args));
}

const QUICK: &str = "[arch]\nencoder_width = 24\ncontent_hidden = 16\ndecoder_width = 20\ndisc_content_widths = [12, 12]\n\
disc_style_widths = [6, 12]\ndisc_cls_widths = [8, 6, 4]\n[schedule]\ntotal_steps = 30\nbatch_unsupervised = 32\n\
batch_supervised = 8\neval_every = 10\n";

#[test]
fn synth_writes_readable_deterministic_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth(&a, &["--seed", "5"]);
    synth(&b, &["--seed", "5"]);
    for f in ["train.embx", "test.embx"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    let out = ok(&semifit(&["inspect", "--file", p(&a.join("train.embx"))]));
    assert!(out.contains("cls_dim     16"), "{out}");
    assert!(out.contains("num_classes 4"));
    assert!(out.contains("rows        200"));
    assert!(out.contains("meta        source-model=synthetic"));
    assert!(a.join("synth.json").exists());
}

#[test]
fn default_synth_header() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&semifit(&["synth", "--out", p(tmp.path()), "--classes", "4", "--dim", "64", "--n-train", "100", "--n-test", "10"]));
    let out = ok(&semifit(&["inspect", "--file", p(&tmp.path().join("test.embx"))]));
    assert!(out.contains("cls_dim     64") && out.contains("num_classes 4") && out.contains("split       test"));
}

#[test]
fn inspect_rejects_corrupt_file() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &[]);
    let path = tmp.path().join("train.embx");
    let mut bytes = fs::read(&path).unwrap();
    bytes[100] ^= 0x10;
    fs::write(&path, bytes).unwrap();
    let err = stderr(&semifit(&["inspect", "--file", p(&path)]));
    assert!(err.starts_with("format: ") && err.contains("crc"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn train_writes_run_directory_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &[]);
    let cfg = tmp.path().join("quick.toml");
    fs::write(&cfg, QUICK).unwrap();
    let (train, test) = (tmp.path().join("train.embx"), tmp.path().join("test.embx"));
    let run = |out: &Path| {
        ok(&semifit(&[
            "train", "--train", p(&train), "--test", p(&test), "--budget", "10", "--method", "semi", "--config", p(&cfg),
            "--seed", "3", "--out", p(out),
        ]))
    };
    let (a, b) = (tmp.path().join("run-a"), tmp.path().join("run-b"));
    run(&a);
    run(&b);
    for f in ["config.toml", "VERSION", "report.json", "checkpoint.sfck", "timing.json"] {
        assert!(a.join(f).exists(), "{f}");
    }
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap());
    let frozen = fs::read_to_string(a.join("config.toml")).unwrap();
    assert!(frozen.contains("seed = 3") && frozen.contains("total_steps = 30") && frozen.contains("lr = "));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["steps_run"], 30);

    let csv = tmp.path().join("features.csv");
    ok(&semifit(&["export-features", "--checkpoint", p(&a.join("checkpoint.sfck")), "--data", p(&test), "--out", p(&csv)]));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 51);
    assert_eq!(text.lines().next().unwrap().split(',').count(), 1 + 16 + 5);
}

#[test]
fn flags_override_config_and_env_sets_output_root() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &[]);
    let cfg = tmp.path().join("quick.toml");
    fs::write(&cfg, QUICK).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_semifit"))
        .env("SEMIFIT_OUT", tmp.path().join("root"))
        .args([
            "train", "--train", p(&tmp.path().join("train.embx")), "--test", p(&tmp.path().join("test.embx")),
            "--budget", "8", "--method", "sup", "--config", p(&cfg), "--steps", "12",
        ])
        .output()
        .unwrap();
    ok(&out);
    let dir = tmp.path().join("root/supervised-b8-s0");
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["total_steps"], 12);
}

#[test]
fn oversized_budget_names_both_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &[]);
    let err = stderr(&semifit(&[
        "train", "--train", p(&tmp.path().join("train.embx")), "--test", p(&tmp.path().join("test.embx")),
        "--budget", "500", "--out", p(&tmp.path().join("run")),
    ]));
    assert!(err.starts_with("contract: ") && err.contains("500") && err.contains("200"), "{err}");
}

#[test]
fn missing_file_is_an_io_error() {
    let err = stderr(&semifit(&["inspect", "--file", "/nonexistent/x.embx"]));
    assert!(err.starts_with("io: "), "{err}");
}

#[test]
fn sweep_covers_ladder_for_both_methods() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &[]);
    let cfg = tmp.path().join("quick.toml");
    fs::write(&cfg, QUICK.replace("total_steps = 30", "total_steps = 5")).unwrap();
    let run = |out: &Path| {
        ok(&semifit(&[
            "sweep", "--train", p(&tmp.path().join("train.embx")), "--test", p(&tmp.path().join("test.embx")),
            "--seeds", "2", "--config", p(&cfg), "--jobs", "2", "--out", p(out),
        ]))
    };
    let (a, b) = (tmp.path().join("sweep-a"), tmp.path().join("sweep-b"));
    run(&a);
    run(&b);
    let csv = fs::read_to_string(a.join("sweep.csv")).unwrap();
    // Ladder for 200 rows and 4 classes: 200, 40, 8, 4.
    assert_eq!(csv.lines().count(), 1 + 4 * 2 * 2);
    let budgets: std::collections::BTreeSet<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(budgets.into_iter().collect::<Vec<_>>(), vec!["200", "4", "40", "8"]);
    assert_eq!(csv, fs::read_to_string(b.join("sweep.csv")).unwrap());
}
