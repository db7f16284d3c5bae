//! Experiment harness for `adavaw-core`: JSON configs, parameter sweeps with per-cell
//! trace and report files, log-log scaling fits and the padding comparison.

pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod padding;
pub mod scaling;

pub use config::{ExperimentConfig, GeneratorTemplate, NoiseConfig, PolicyEntry, PolicySpec};
pub use error::{HarnessError, Result};
pub use experiment::{run_cell, run_experiment, simulate, CellRun, ExperimentResult};
pub use padding::{padding_demo, PaddingDemo};
pub use scaling::{fit_scaling, ScalingFit};
