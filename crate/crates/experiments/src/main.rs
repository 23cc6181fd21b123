use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use repeater_experiments::{run_with_threads, AppError, ExperimentConfig, ExperimentKind, RunContext};

#[derive(Parser)]
#[command(name = "repeater", about = "Experiments on the TMSV + atomic-amplifier quantum repeater")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// CSV output path (default: config `output`, else `<experiment>.csv`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write an SVG line plot next to the CSV.
    #[arg(long, global = true)]
    svg: bool,
    /// Worker threads for the sweep pool.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Exit with status 4 if any gating check fails.
    #[arg(long, global = true)]
    check: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Negativity vs superposition angle for N = 1..4.
    NegTheta,
    /// Negativity-optimal θ_R and success probability vs η_R.
    ThetaEta,
    /// Register negativity vs η_R against the lossy TMSV.
    NegEta,
    /// Secret key rate vs distance against the PLOB bound.
    Keyrate,
    /// CHSH value, QBER and device-independent key vs distance.
    ChshDi,
    /// Key rate under detector, coupling, dark-count and channel errors.
    ErrorSweep,
    /// Optimal ⟨n⟩, θ_L, θ_R vs distance and a segment-length scan.
    OptParams,
}

impl From<Command> for ExperimentKind {
    fn from(c: Command) -> Self {
        match c {
            Command::NegTheta => ExperimentKind::NegTheta,
            Command::ThetaEta => ExperimentKind::ThetaEta,
            Command::NegEta => ExperimentKind::NegEta,
            Command::Keyrate => ExperimentKind::Keyrate,
            Command::ChshDi => ExperimentKind::ChshDi,
            Command::ErrorSweep => ExperimentKind::ErrorSweep,
            Command::OptParams => ExperimentKind::OptParams,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: &Cli) -> Result<u8, AppError> {
    let kind = ExperimentKind::from(cli.command);
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.threads == Some(0) {
        return Err(AppError::Config("--threads must be >= 1".into()));
    }
    let out_path = cli
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", kind.name())));

    let ctx = RunContext::new(cfg.seed);
    let result = run_with_threads(kind, &cfg, &ctx, cli.threads)?;
    for path in result.write_csv(&out_path, &cfg)? {
        println!("wrote {}", path.display());
    }
    if cli.svg {
        if let Some(path) = result.write_svg(&out_path)? {
            println!("wrote {}", path.display());
        }
    }
    for line in &result.report {
        println!("{line}");
    }
    for c in &result.checks {
        let status = if c.passed { "PASS" } else if c.gating { "FAIL" } else { "NOTE" };
        println!("[{status}] {}: {}", c.name, c.detail);
    }
    if cli.check && !result.all_gating_passed() {
        return Ok(4);
    }
    Ok(0)
}
