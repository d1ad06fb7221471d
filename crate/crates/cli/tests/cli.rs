use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adaptive-smc"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn adaptive-smc")
}

const SMALL: &[&str] = &[
    "--set",
    "model.kind=\"linear_gaussian\"",
    "--set",
    "experiment.t=120",
    "--set",
    "adaptation.m0=64",
    "--set",
    "adaptation.m_min=16",
    "--set",
    "adaptation.m_max=512",
];

fn run_small(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--out", out.to_str().unwrap(), "--runs", "3", "--seed", "9"];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn run_writes_outputs_and_echo_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let out = run_small(&first, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["aggregate.csv", "timing.csv", "config.toml", "adaptive_run000.csv", "adaptive_run002.csv"] {
        assert!(first.join(f).exists(), "missing {f}");
    }
    let aggregate = fs::read_to_string(first.join("aggregate.csv")).unwrap();
    assert!(aggregate.starts_with("label,row,status,seed,mse,m_bar,mean_p,mean_hellinger"));

    let second = dir.path().join("second");
    let echo = first.join("config.toml");
    let out = run(&["run", "--config", echo.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(aggregate, fs::read_to_string(second.join("aggregate.csv")).unwrap());
    assert_eq!(
        fs::read(first.join("adaptive_run001.csv")).unwrap(),
        fs::read(second.join("adaptive_run001.csv")).unwrap()
    );
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run_small(&a, &[]).status.success());
    let out = bin()
        .env("ADAPTIVE_SMC_THREADS", "3")
        .args(["run", "--out", b.to_str().unwrap(), "--runs", "3", "--seed", "9"])
        .args(SMALL)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read(a.join("aggregate.csv")).unwrap(), fs::read(b.join("aggregate.csv")).unwrap());
}

#[test]
fn file_values_lose_to_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.toml");
    fs::write(&file, "[adaptation]\np_high = 0.9\n").unwrap();
    let out_dir = dir.path().join("o");
    let out = run_small(&out_dir, &["--config", file.to_str().unwrap(), "--set", "adaptation.p_high=0.7", "--set", "experiment.t=20"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let echo = fs::read_to_string(out_dir.join("config.toml")).unwrap();
    assert!(echo.contains("p_high = 0.7"), "{echo}");
}

#[test]
fn bad_configuration_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_small(dir.path(), &["--set", "adaptation.p_low=0.8", "--set", "adaptation.p_high=0.3"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("p_low < p_high"), "{err}");

    let out = run_small(dir.path(), &["--set", "adaptation.bogus=1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn unknown_preset_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["sweep", "--preset", "nope", "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("table3-desk"));
}

#[test]
fn verify_passes_and_detects_a_broken_rank_rule() {
    let out = run(&["verify"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert_eq!(stdout.lines().count(), 5);
    assert!(stdout.lines().all(|l| l.starts_with("[PASS]")));

    let out = run(&["verify", "--break-rank-convention"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(10), "{stdout}");
    assert!(stdout.lines().next().unwrap().starts_with("[FAIL] rank exactness"));
}
