//! Optimizer, configuration, training loop, checkpoints, sweeps and plots.

pub mod adam;
pub mod checkpoint;
pub mod config;
pub mod plot;
pub mod sweep;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{checkpoint_load, checkpoint_save};
pub use config::ExperimentConfig;
pub use plot::scatter_svg;
pub use sweep::{sweep, SweepResult};
pub use train::{train, train_with, EvalRecord, TrainResult, Trainer};
