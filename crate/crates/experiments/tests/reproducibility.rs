use std::path::PathBuf;

use repeater_experiments::{run_with_threads, ExperimentConfig, ExperimentKind, ExperimentOutput, RunContext};

const NEG_THETA_SMALL: &str = r#"
seed = 4
qubits = [1, 2]

[sweep]
variable = "theta"
start = 0.0
stop = 1.5707963267948966
steps = 7

[optimizer]
grid = 12
tol = 1e-6
"#;

const KEYRATE_SMALL: &str = r#"
seed = 9
repetitions = 4

[sweep]
variable = "segments"
start = 1
stop = 6
steps = 6

[plan]
attempts = [50.0, 100.0]
"#;

fn csv(kind: ExperimentKind, cfg: &ExperimentConfig, threads: usize) -> String {
    let out: ExperimentOutput = run_with_threads(kind, cfg, &RunContext::new(cfg.seed), Some(threads)).unwrap();
    out.tables.iter().map(|t| t.to_csv(kind.name(), cfg)).collect::<Vec<_>>().join("\n")
}

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Set UPDATE_GOLDEN=1 to rewrite the stored file after an intended change.
#[test]
fn neg_theta_matches_golden_file() {
    let cfg = ExperimentConfig::from_toml_str(NEG_THETA_SMALL).unwrap();
    let got = csv(ExperimentKind::NegTheta, &cfg, 2);
    let path = golden_path("neg-theta-small.csv");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &got).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap();
    assert_eq!(got, want);
}

#[test]
fn sampled_sweep_is_identical_across_runs_and_thread_counts() {
    let cfg = ExperimentConfig::from_toml_str(KEYRATE_SMALL).unwrap();
    let one = csv(ExperimentKind::Keyrate, &cfg, 1);
    assert_eq!(one, csv(ExperimentKind::Keyrate, &cfg, 1));
    assert_eq!(one, csv(ExperimentKind::Keyrate, &cfg, 4));
}

#[test]
fn seed_changes_sampled_output() {
    let cfg = ExperimentConfig::from_toml_str(KEYRATE_SMALL).unwrap();
    let other = ExperimentConfig { seed: 10, ..cfg.clone() };
    assert_ne!(csv(ExperimentKind::Keyrate, &cfg, 2), csv(ExperimentKind::Keyrate, &other, 2));
}
