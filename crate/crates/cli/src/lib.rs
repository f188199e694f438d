//! Command implementations behind the `smat` binary: training runs, offline
//! evaluation on recorded gait, trace analysis and plot-data export.

pub mod analyze;
pub mod config;
mod error;
pub mod export;
pub mod offline;
pub mod train;

pub use analyze::{cmd_analyze, AnalyzeArgs};
pub use config::RunConfig;
pub use error::CliError;
pub use export::cmd_export_plots;
pub use offline::{cmd_eval_offline, OfflineArgs};
pub use train::{cmd_train, TrainArgs};

/// Size the global rayon pool from `SMAT_THREADS` when set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("SMAT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("SMAT_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}
