//! Scenario configuration, closed-loop simulation, metrics and CSV output.

pub mod config;
pub mod metrics;
pub mod output;
pub mod scenario;
pub mod sim;

pub use config::{AlgorithmKind, ScenarioConfig};
pub use metrics::{compute_metrics, Metrics, WindowNadir};
pub use output::{csv_string, write_csv, PER_LOAD_COLUMN_LIMIT};
pub use scenario::{build_scenario, Scenario};
pub use sim::{run, run_with, RunFailure, RunOptions, RunOutput, TrajectoryRecord};
