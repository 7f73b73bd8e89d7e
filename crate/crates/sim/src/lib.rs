//! Closed-loop simulator, scenario configs and file formats for the
//! `dcm-step-core` footstep planner.

pub mod compare;
pub mod config;
pub mod io;
pub mod metrics;
pub mod sim;

pub use compare::{run_comparison, ComparisonSummary};
pub use config::{ConfigError, Perturbation, PlannerMode, RunInConfig, Scenario, SimConfig};
pub use metrics::{compute_metrics, Metrics, SolveStats};
pub use sim::{detect_touchdown_and_reset, run_scenario, SimOutput, SimTrace, StepRecord, TerminalStatus, TickRecord};
