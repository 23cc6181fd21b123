use std::path::Path;
use std::process::{Command, Output};

fn repeater(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_repeater")).current_dir(dir).args(args).output().unwrap()
}

#[test]
fn writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), "qubits = [1]\n[sweep]\nvariable = \"theta\"\nstart = 0.0\nstop = 1.5\nsteps = 5\n").unwrap();
    let out = repeater(dir.path(), &["neg-theta", "--config", "small.toml", "--out", "n.csv", "--svg"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("n.csv")).unwrap();
    assert!(text.starts_with("# experiment: neg-theta"));
    assert!(text.contains("# config_sha256: "));
    assert!(std::fs::read_to_string(dir.path().join("n.svg")).unwrap().contains("<polyline"));
}

#[test]
fn unknown_config_key_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "seeed = 3\n").unwrap();
    let out = repeater(dir.path(), &["neg-theta", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_threads_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(repeater(dir.path(), &["neg-theta", "--threads", "0"]).status.code(), Some(2));
}

#[test]
fn failing_gate_exits_with_4_under_check() {
    let dir = tempfile::tempdir().unwrap();
    // A = 10 never beats the bound, so the crossing check fails
    let cfg = "repetitions = 2\n[plan]\nattempts = [10.0]\n[sweep]\nvariable = \"segments\"\nstart = 1\nstop = 3\nsteps = 3\n";
    std::fs::write(dir.path().join("k.toml"), cfg).unwrap();
    let args = ["keyrate", "--config", "k.toml", "--out", "k.csv"];
    assert_eq!(repeater(dir.path(), &args).status.code(), Some(0));
    let checked: Vec<&str> = args.iter().copied().chain(["--check"]).collect();
    let out = repeater(dir.path(), &checked);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[FAIL] plob-crossing-in-band"));
}
