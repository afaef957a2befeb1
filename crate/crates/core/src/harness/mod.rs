//! Configuration-driven experiments producing CSV results.

pub mod config;
pub mod experiments;
pub mod manufactured;
pub mod output;

pub use config::{Experiment, ExperimentConfig, GeometrySpec};
pub use experiments::{run_experiment, Check, ExperimentOutput};
pub use manufactured::Solution;
pub use output::ResultRow;
