//! End-to-end orchestration: dataset index, cached feature computation and the
//! classification experiments.

pub mod cache;
pub mod config;
pub mod dataset;
pub mod experiments;
pub mod features;

pub use config::{PgaMode, PipelineConfig};
pub use dataset::{ingest, DatasetIndex};
pub use experiments::{
    ablate, evaluate, mask_experiment, train, AblationReport, MaskOutcome, Predictor,
};
pub use features::{image_features, run_features, FeatureRun, FeatureSet};

/// Header for run logs: crate version, command and every resolved setting.
pub fn run_log_header(command: &str, config: &PipelineConfig) -> String {
    format!(
        "ctph-core {}\ncommand = {command}\n{}",
        env!("CARGO_PKG_VERSION"),
        config.to_text()
    )
}

/// Sizes the global worker pool; only the first call has an effect.
pub fn set_jobs(jobs: usize) {
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
    {
        log::debug!("worker pool already initialized: {e}");
    }
}
