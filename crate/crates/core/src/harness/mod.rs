//! Experiment plumbing behind the `co4` binary: JSON configs, the paired
//! overload grid, and the verification suites.

mod config;
mod grid;
mod verify;

pub use config::{
    parse_config, AgentParams, ConfigError, ExperimentConfig, GridCell, StreamParams,
    SHIPPED_CONFIG,
};
pub use grid::{
    episode_key, recompute_from_dumps, run_grid, summarize, trajectory_file, CellSummary,
    Provenance, RunError, RunReport, VariantSummary, REPORT_FILE, TRAJECTORY_DIR,
};
pub use verify::{verify, Failure, Suite, SuiteReport, VerifyOptions};
