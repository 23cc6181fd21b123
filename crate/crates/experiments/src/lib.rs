//! Deterministic experiments on the repeater model: negativity scans, key
//! rate and CHSH versus distance, imperfection sweeps and optimal
//! parameters. Every sweep point draws from its own ChaCha stream derived
//! from the master seed and the point index, so results do not depend on
//! the thread count.

pub mod audit;
pub mod config;
pub mod error;
pub mod experiments;
pub mod optimize;
pub mod output;
pub mod pipeline;

pub use config::ExperimentConfig;
pub use error::{AppError, AppResult};
pub use experiments::{run, ExperimentKind};
pub use output::ExperimentOutput;
pub use pipeline::RunContext;

/// Runs an experiment on a dedicated pool of `threads` workers (all cores
/// when `None`).
pub fn run_with_threads(
    kind: ExperimentKind,
    cfg: &ExperimentConfig,
    ctx: &RunContext,
    threads: Option<usize>,
) -> AppResult<ExperimentOutput> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| AppError::Config(format!("thread pool: {e}")))?;
    pool.install(|| run(kind, cfg, ctx))
}
