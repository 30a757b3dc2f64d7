//! The `pdiff` binary: subcommands, overrides and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &[&str] = &[
    "--dataset.blobs.num_classes",
    "3",
    "--dataset.blobs.samples_per_class",
    "40",
    "--model.hidden",
    "[8]",
    "--train.epochs",
    "3",
    "--train.lr=0.05",
    "--train.batch_size",
    "16",
];

fn pdiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdiff")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn run_into(config: &str, out: &Path, extra: &[&str]) -> Output {
    let out = out.to_string_lossy().into_owned();
    let mut args = vec!["run", "--config", config];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(&["--output_dir", &out]);
    args.extend_from_slice(extra);
    pdiff(&args)
}

#[test]
fn run_summarize_and_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "mode = \"normal\"\n[dataset]\nsource = \"blobs\"\n");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");

    let out = run_into(&cfg, &a, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let printed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed["epochs"], 3);

    // Overrides win over the file.
    let out = run_into(&cfg, &b, &["--mode", "pdiff", "--selector.tau", "0.2", "--noise.rate", "0.2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let saved: serde_json::Value = serde_json::from_str(&fs::read_to_string(b.join("config.json")).unwrap()).unwrap();
    assert_eq!(saved["mode"], "pdiff");
    assert_eq!(saved["train"]["lr"], 0.05);

    let out = pdiff(&["summarize", &b.to_string_lossy()]);
    assert!(out.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["mode"], "pdiff");

    let out = pdiff(&["compare", "--csv", &a.to_string_lossy(), &b.to_string_lossy()]);
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    let modes: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(modes, ["normal", "pdiff"]);
}

#[test]
fn drop_curve_writes_both_strategies() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "mode = \"normal\"\ndataset.source = \"blobs\"\nnoise.kind = \"pair\"\nnoise.rate = 0.45\n");
    let out_dir = tmp.path().join("curves").to_string_lossy().into_owned();
    let mut args = vec!["drop-curve", "--config", &cfg, "--out", &out_dir];
    args.extend_from_slice(SMALL);
    let out = pdiff(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["delta", "py"] {
        let text = fs::read_to_string(Path::new(&out_dir).join(format!("drop_curve_{name}.csv"))).unwrap();
        assert_eq!(text.lines().next().unwrap(), "drop_rate,dropped_fraction,real_noise_rate");
        assert_eq!(text.lines().count(), 20);
    }
}

#[test]
fn keys_lists_defaults() {
    let out = pdiff(&["keys"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("selector.zeta_threshold") && l.ends_with("0.9")));
}

#[test]
fn exit_codes_follow_the_error_class() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "mode = \"pdiff\"\ndataset.source = \"blobs\"\n");
    let code = |out: Output| out.status.code().unwrap();

    // Config: pdiff without selector.tau.
    assert_eq!(code(run_into(&cfg, &tmp.path().join("x"), &[])), 2);
    // Config: unknown key.
    assert_eq!(code(run_into(&cfg, &tmp.path().join("x"), &["--selector.tau", "0.2", "--train.lrr", "1"])), 2);
    // Config: flag without a value.
    assert_eq!(code(pdiff(&["run", "--train.lr"])), 2);
    // Usage errors from the argument parser.
    assert_eq!(code(pdiff(&["frobnicate"])), 2);
    // I/O: missing config file and missing run directory.
    assert_eq!(code(pdiff(&["run", "--config", "/nonexistent/run.toml"])), 3);
    assert_eq!(code(pdiff(&["summarize", "/nonexistent/run"])), 3);
    // Format: a metrics file that is not JSON lines.
    let junk = tmp.path().join("metrics.jsonl");
    fs::write(&junk, "not json\n").unwrap();
    assert_eq!(code(pdiff(&["summarize", &junk.to_string_lossy()])), 4);
    // Argument: overrides where none apply.
    assert_eq!(code(pdiff(&["summarize", &junk.to_string_lossy(), "--seed", "1"])), 6);
    // I/O: missing dataset file.
    let idx = write_config(
        tmp.path(),
        "mode = \"normal\"\ndataset.source = \"idx\"\ndataset.images = \"/nonexistent/i.gz\"\ndataset.labels = \"/nonexistent/l.gz\"\n",
    );
    assert_eq!(code(pdiff(&["run", "--config", &idx, "--output_dir", &tmp.path().join("y").to_string_lossy()])), 3);
}
