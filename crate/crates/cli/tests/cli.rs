use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn hqkd(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hqkd"))
        .args(args)
        .arg("--out")
        .arg(out)
        .args(["--duration-s", "0.2", "--seed", "7"])
        .output()
        .expect("spawn hqkd")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = hqkd(out, args);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn stderr_of(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

const STAGES: [&str; 6] = ["simulate", "sift", "qber", "reconcile", "amplify", "report"];

#[test]
fn run_matches_stage_by_stage() {
    let (whole, staged) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let report = ok(whole.path(), &["run"]);
    assert!(report.contains("secure_bits="));
    for stage in STAGES {
        ok(staged.path(), &[stage]);
    }
    let mut a = contents(whole.path());
    let b = contents(staged.path());
    assert!(a.remove("config.toml").is_some());
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (name, bytes) in &a {
        assert!(bytes == &b[name], "{name} differs");
    }
}

#[test]
fn runs_are_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = ok(a.path(), &["run"]);
    let rb = ok(b.path(), &["run"]);
    assert_eq!(ra, rb);
    assert_eq!(contents(a.path()), contents(b.path()));
}

#[test]
fn hbt_then_g2() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "--hbt"]);
    let printed = ok(dir.path(), &["g2"]);
    assert!(printed.starts_with("g2_zero="));
    let csv = std::fs::read_to_string(dir.path().join("g2.csv")).unwrap();
    assert_eq!(csv.lines().count(), 42);
    assert!(dir.path().join("g2_rates.txt").exists());
}

#[test]
fn report_without_key_material_fails() {
    let dir = tempfile::tempdir().unwrap();
    for stage in &STAGES[..5] {
        ok(dir.path(), &[stage]);
    }
    let sifted = dir.path().join("sifted.csv");
    let header = std::fs::read_to_string(&sifted)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    std::fs::write(&sifted, header + "\n").unwrap();
    let o = hqkd(dir.path(), &["report"]);
    assert!(!o.status.success());
    let err = stderr_of(&o);
    assert!(err.contains("stage=report kind=no-key-material"), "{err}");
    assert!(err.contains("no key material"), "{err}");
}

#[test]
fn missing_input_names_stage() {
    let dir = tempfile::tempdir().unwrap();
    let o = hqkd(dir.path(), &["sift"]);
    assert!(!o.status.success());
    assert!(
        stderr_of(&o).contains("stage=sift kind=io"),
        "{}",
        stderr_of(&o)
    );
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[sift]\nwindow_ps = 1800\n").unwrap();
    let o = hqkd(dir.path(), &["run", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = stderr_of(&o);
    assert!(err.contains("stage=config kind=config"), "{err}");
    assert!(!dir.path().join("herald.qtag").exists());
}

#[test]
fn config_prints_effective_toml() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["config"]);
    assert!(text.contains("seed = 7"));
    assert!(text.contains("duration_s = 0.2"));
    assert!(text.contains("[detector]"));
}
