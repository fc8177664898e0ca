use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oversmooth")).args(args).output().unwrap()
}

fn out_arg(dir: &Path) -> &str {
    dir.to_str().unwrap()
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["fit"]).status.code(), Some(1));
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w");
    let r = run(&["wer", "--ref", "", "--hyp", "a", "--out", out_arg(&out)]);
    assert_eq!(r.status.code(), Some(1));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "seeds = []\n").unwrap();
    let r = run(&["verify-table1", "--config", out_arg(&bad), "--out", out_arg(&out)]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let r = run(&["fit", "--input", out_arg(&missing), "--out", out_arg(&dir.path().join("f"))]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn wer_reports_counts_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(&["wer", "--ref", "the cat sat", "--hyp", "the bat sat down", "--out", out_arg(dir.path())]);
    assert!(r.status.success());
    let stats: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("wer.json")).unwrap()).unwrap();
    assert_eq!(stats["substitutions"], 1);
    assert_eq!(stats["insertions"], 1);
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "wer");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn table_fit_extrapolate_chain() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t");
    assert!(run(&["verify-table1", "--export-points", "--out", out_arg(&t)]).status.success());
    let points = t.join("table1_ddpm_all.csv");
    let f = dir.path().join("f");
    assert!(run(&["fit", "--input", out_arg(&points), "--unit", "hours", "--out", out_arg(&f)]).status.success());
    let fit: serde_json::Value = serde_json::from_slice(&std::fs::read(f.join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["unit"], "hours");
    let e = dir.path().join("e");
    let fit_path = f.join("fit.json");
    assert!(run(&["extrapolate", "--input", out_arg(&fit_path), "--out", out_arg(&e)]).status.success());
    // a points CSV is fitted on the fly
    let e2 = dir.path().join("e2");
    assert!(run(&["extrapolate", "--input", out_arg(&points), "--unit", "hours", "--out", out_arg(&e2)]).status.success());
    assert_eq!(std::fs::read(e.join("extrapolation.json")).unwrap(), std::fs::read(e2.join("extrapolation.json")).unwrap());
}

#[test]
fn train_then_sample() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "train_sizes = [48]\n[task]\nkind = \"bimodal\"\nseparation = 1.0\nstd = 0.1\n[generator.train]\niterations = 50\n",
    )
    .unwrap();
    let tr = dir.path().join("train");
    let r = run(&["train", "--config", out_arg(&cfg), "--objective", "ddpm", "--out", out_arg(&tr)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(tr.join("loss.csv").exists());
    let s = dir.path().join("sample");
    let ckpt = tr.join("checkpoint.json");
    let r = run(&["sample", "--checkpoint", out_arg(&ckpt), "--n", "5", "--out", out_arg(&s)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = std::fs::read_to_string(s.join("samples.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 5);
    let r = run(&["sample", "--checkpoint", out_arg(&ckpt), "--condition", "9", "--out", out_arg(&s)]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn gen_data_writes_splits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "recognizer_size = 100\neval_size = 100\n").unwrap();
    let r = run(&["gen-data", "--config", out_arg(&cfg), "--size", "60", "--seed", "3", "--out", out_arg(dir.path())]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let rows = std::fs::read_to_string(dir.path().join("dataset.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 260);
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"][0], 3);
}
