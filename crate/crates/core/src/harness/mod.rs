//! Experiment plumbing: configuration, corruption, metrics, persistence and
//! the evaluation pipelines.

pub mod config;
pub mod corruption;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod settings;

pub use config::Config;
pub use corruption::{inject_corruption, CorruptionKind, CorruptionSpec, Corrupted};
pub use experiment::{
    make_folds, run_curve, run_experiment, ExperimentConfig, ExperimentMetrics, ExperimentReport, Method,
    RuntimeStats, Split, Task,
};
pub use metrics::{alternative_quality, correct_replacement, AlternativeQuality, ConfusionMatrix, ReplacementStats};
