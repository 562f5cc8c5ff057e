//! Experiment driver for the `pufem-core` particle regularization: JSON
//! configuration, the convergence, velocity, conditioning and grid-offset
//! studies, and CSV/mesh file formats.

pub mod config;
pub mod experiments;
pub mod flows;
pub mod io;
pub mod pipeline;

pub use config::{ConfigFile, Experiment, ExperimentConfig, LevelRange};
