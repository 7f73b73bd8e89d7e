//! File formats.
//!
//! * Tick trace: comma-separated text, one row per tick, header row first.
//!   Floats use the shortest representation that parses back to the same
//!   bits, so traces of identical runs are byte-identical.
//! * Step trace: same layout, one row per touchdown.
//! * Summary, stone profiles and planner requests: pretty-printed JSON.

use std::fmt::Write as _;
use std::path::Path;

use dcm_step_core::planner::PlannerConfig;
use dcm_step_core::{ModelParams, PlannerInput, StoneProfile};
use serde::{Deserialize, Serialize};

use crate::metrics::Metrics;
use crate::sim::{SimOutput, SimTrace, TerminalStatus};

pub const TICK_COLUMNS: &[&str] = &[
    "t", "step", "t_step", "side", "x_c", "y_c", "l_x", "l_y", "dcm_x", "dcm_y", "tau", "tau_dot", "cmd_u_x",
    "cmd_u_y", "cmd_t", "plan", "plan_iters", "plan_cost", "plan_residual",
];

pub const STEP_COLUMNS: &[&str] = &[
    "step", "stone", "side", "duration", "cmd_u_x", "cmd_u_y", "world_x", "world_y", "target_x", "target_y",
    "in_bounds", "z_x", "z_y", "z_in_bounds",
];

fn push_row(out: &mut String, fields: &[String]) {
    out.push_str(&fields.join(","));
    out.push('\n');
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// Tick trace text.
pub fn format_ticks(trace: &SimTrace) -> String {
    let mut out = String::with_capacity(trace.ticks.len() * 200);
    push_row(&mut out, &TICK_COLUMNS.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    for r in &trace.ticks {
        let plan = r.plan;
        push_row(
            &mut out,
            &[
                r.t.to_string(),
                r.step.to_string(),
                r.t_step.to_string(),
                r.side.to_string(),
                r.state.x_c.to_string(),
                r.state.y_c.to_string(),
                r.state.l_x.to_string(),
                r.state.l_y.to_string(),
                r.dcm.x.to_string(),
                r.dcm.y.to_string(),
                r.tau.to_string(),
                r.tau_dot.to_string(),
                r.command.u_x.to_string(),
                r.command.u_y.to_string(),
                r.command.duration.to_string(),
                opt(plan.map(|p| p.outcome.code())),
                opt(plan.map(|p| p.iterations)),
                opt(plan.map(|p| p.cost)),
                opt(plan.map(|p| p.residual)),
            ],
        );
    }
    out
}

/// Step trace text, followed by a final `# status` comment line.
pub fn format_steps(trace: &SimTrace) -> String {
    let mut out = String::new();
    push_row(&mut out, &STEP_COLUMNS.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    for s in &trace.steps {
        push_row(
            &mut out,
            &[
                s.step.to_string(),
                opt(s.stone),
                s.side.to_string(),
                s.duration.to_string(),
                s.commanded[0].to_string(),
                s.commanded[1].to_string(),
                s.realized_world[0].to_string(),
                s.realized_world[1].to_string(),
                opt(s.target.map(|t| t[0])),
                opt(s.target.map(|t| t[1])),
                opt(s.in_bounds),
                s.z_next.x.to_string(),
                s.z_next.y.to_string(),
                s.z_in_bounds.to_string(),
            ],
        );
    }
    let _ = writeln!(out, "# status {}", status_text(&trace.status));
    out
}

pub fn status_text(s: &TerminalStatus) -> String {
    match s {
        TerminalStatus::Completed => "completed".to_string(),
        TerminalStatus::Fell { step } => format!("fell@{step}"),
        TerminalStatus::PlannerFailed { step } => format!("planner_failed@{step}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub profile: String,
    pub seed: u64,
    pub planner: String,
    pub status: TerminalStatus,
    pub metrics: Metrics,
}

impl RunSummary {
    pub fn new(out: &SimOutput, planner: &str) -> Self {
        Self {
            profile: out.profile.kind.label().to_string(),
            seed: out.profile.seed,
            planner: planner.to_string(),
            status: out.trace.status,
            metrics: out.metrics,
        }
    }
}

/// One-shot planner call as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRequest {
    #[serde(default)]
    pub model: ModelParams,
    #[serde(default)]
    pub planner: PlannerConfig,
    pub input: PlannerInput,
}

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|source| IoError::Fs {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value).map_err(|source| IoError::Json {
        path: path.display().to_string(),
        source,
    })?;
    write_text(path, &(text + "\n"))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Fs {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_profile(path: &Path) -> Result<StoneProfile, IoError> {
    read_json(path)
}

/// Write `ticks.csv`, `steps.csv` and `summary.json` into `dir`.
pub fn write_run(dir: &Path, out: &SimOutput, planner: &str) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(|source| IoError::Fs {
        path: dir.display().to_string(),
        source,
    })?;
    write_text(&dir.join("ticks.csv"), &format_ticks(&out.trace))?;
    write_text(&dir.join("steps.csv"), &format_steps(&out.trace))?;
    write_json(&dir.join("summary.json"), &RunSummary::new(out, planner))
}
