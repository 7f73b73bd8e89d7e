//! MPC versus one-step QP on identical scenarios.

use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, PlannerMode, SimConfig};
use crate::sim::{run_scenario, TerminalStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeResult {
    pub status: TerminalStatus,
    pub rmse: f64,
    pub max_abs_z: [f64; 2],
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed: u64,
    pub mpc: ModeResult,
    pub qp: ModeResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub profile: String,
    pub horizon: usize,
    pub rows: Vec<SeedRow>,
    pub mpc_success_rate: f64,
    pub qp_success_rate: f64,
}

fn run_mode(cfg: &SimConfig) -> Result<ModeResult, ConfigError> {
    let out = run_scenario(cfg)?;
    Ok(ModeResult {
        status: out.trace.status,
        rmse: out.metrics.step_position_rmse,
        max_abs_z: out.metrics.max_abs_z,
        violations: out.metrics.violations,
    })
}

/// Run MPC (horizon from `cfg_base`, 4 if it is in QP mode) and QP on each seed.
pub fn run_comparison(cfg_base: &SimConfig, seeds: &[u64]) -> Result<ComparisonSummary, ConfigError> {
    if seeds.is_empty() {
        return Err(ConfigError::Invalid("at least one seed is required".into()));
    }
    let horizon = match cfg_base.planner_mode {
        PlannerMode::Mpc { horizon } => horizon,
        PlannerMode::Qp => 4,
    };
    let mut rows = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut cfg = cfg_base.clone();
        cfg.scenario.seed = seed;
        rows.push(SeedRow {
            seed,
            mpc: run_mode(&cfg.with_mode(PlannerMode::Mpc { horizon }))?,
            qp: run_mode(&cfg.with_mode(PlannerMode::Qp))?,
        });
    }
    let rate = |f: fn(&SeedRow) -> &ModeResult| {
        rows.iter().filter(|r| f(r).status.is_completed()).count() as f64 / rows.len() as f64
    };
    Ok(ComparisonSummary {
        profile: cfg_base.scenario.profile.kind.label().to_string(),
        horizon,
        mpc_success_rate: rate(|r| &r.mpc),
        qp_success_rate: rate(|r| &r.qp),
        rows,
    })
}
