use std::path::Path;
use std::process::{Command, Output};

fn gigp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gigp")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines().find_map(|l| l.strip_prefix(&format!("{key}="))).unwrap_or_else(|| panic!("no {key} in {text}"))
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("tiny.conf");
    std::fs::write(
        &path,
        format!(
            "task = synth_invariant\npooling = gigp\nchannels = 4\nblocks = 1\nnbhd = 4\nkernel_hidden = 4\n\
             gigp_phi_hidden = 4\nepochs = 2\nbatch_size = 8\ntrain_data = train.jsonl\nval_data = val.jsonl\n\
             test_data = val.jsonl\nmc_fraction = 0.5\n{extra}"
        ),
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn synth_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (name, seed) in [("train.jsonl", "1"), ("val.jsonl", "2")] {
        let p = d.join(name);
        let o = gigp(&["gen-synth", "--out", p.to_str().unwrap(), "--n-samples", "24", "--n-points", "6", "--seed", seed]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let config = write_config(d, "");
    let out = d.join("run");
    let o = gigp(&["train", "--config", &config, "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["metrics.jsonl", "timings.jsonl", "checkpoint.bin", "config.txt", "summary.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let metrics = std::fs::read_to_string(out.join("metrics.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 3);
    let first: serde_json::Value = serde_json::from_str(metrics.lines().next().unwrap()).unwrap();
    assert_eq!(first["epoch"], 0);
    assert_eq!(first["seed"], 3);
    assert_eq!(&std::fs::read(out.join("checkpoint.bin")).unwrap()[..4], b"GIGP");

    let ckpt = out.join("checkpoint.bin");
    let o = gigp(&["eval", "--checkpoint", ckpt.to_str().unwrap(), "--data", d.join("val.jsonl").to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(value(&text, "samples"), "24");
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let mse: f64 = value(&text, "MSE").parse().unwrap();
    assert!((mse - summary["test_metric"].as_f64().unwrap()).abs() < 1e-5);

    let o = gigp(&["check-invariance", "--checkpoint", ckpt.to_str().unwrap(), "--n-transforms", "3", "--n-samples", "10"]);
    let text = stdout(&o);
    assert!(o.status.success(), "{text}");
    assert_eq!(value(&text, "passed"), "true");
    assert_eq!(value(&text, "samples"), "10");
}

#[test]
fn unknown_config_key_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "learning_rate = 0.1\n");
    let o = gigp(&["train", "--config", &config, "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("learning_rate"));
}

#[test]
fn grad_check_passes_and_a_tiny_tolerance_fails() {
    let o = gigp(&["grad-check"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("gigp_end_to_end"));
    let o = gigp(&["grad-check", "--tol", "1e-14"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn check_expressivity_reports_counts() {
    let o = gigp(&["check-expressivity", "--max-elems", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(value(&text, "passed"), "true");
    assert_eq!(value(&text, "domains"), ((1 + 2 + 5) * 3).to_string());
    assert_eq!(value(&text, "failures"), "0");
}

#[test]
fn missing_checkpoint_is_an_error() {
    let o = gigp(&["eval", "--checkpoint", "/nonexistent/checkpoint.bin", "--data", "x.jsonl"]);
    assert_eq!(o.status.code(), Some(2));
}
