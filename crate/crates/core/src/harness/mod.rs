//! Adversarial trials, batch experiments and result tables.

pub mod batch;
pub mod config;
pub mod output;
pub mod trial;

pub use batch::{proximity_experiment, run_batch, run_trials, BatchSummary, Estimate, ProximityRow};
pub use config::{ConfigError, TrialConfig, WeightsPreset};
pub use output::OutputError;
pub use trial::{run_trial, Outcome, StepRecord, TrialRecord};
