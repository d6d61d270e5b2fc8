//! Experiment runner for the complete-graph exclusion process: config
//! parsing, the six experiment kinds, and deterministic CSV/JSON output.

pub mod config;
pub mod experiments;
pub mod record;

pub use config::{parse_config, ConfigErrors, ExperimentConfig, Format, Kind};
pub use experiments::{run, Outcome};
pub use record::{Cell, ResultRecord};
