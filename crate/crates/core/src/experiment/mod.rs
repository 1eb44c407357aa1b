//! Configuration, presets, the simulation pipeline and end-to-end reports.

pub mod config;
pub mod pipeline;
pub mod report;

pub use config::{load_config, parse_config, preset, ExperimentConfig, PRESET_SPACELIKE, PRESET_TIMELIKE};
pub use pipeline::{run_simulation, simulate_tags, PipelineStats, Simulation};
pub use report::{analyze_tags, run_analysis, RunReport};
