//! Configuration, orchestration and result files.

pub mod config;
pub mod engine;
pub mod io;
pub mod pipeline;

pub use config::{superfluid_default, EngineKind, ExperimentConfig, InferenceKind};
pub use engine::{prepare, Prepared, WorkCumulants};
pub use pipeline::{analyze, run_beta_sweep, run_calibration, run_calibration_prepared, run_experiment, Aggregates, RunResult};
