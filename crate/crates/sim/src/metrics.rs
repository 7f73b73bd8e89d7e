//! Step-placement and solver metrics of a finished run.

use dcm_step_core::StoneProfile;
use serde::{Deserialize, Serialize};

use crate::sim::{SimTrace, TerminalStatus};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p99: f64,
    pub max: f64,
}

impl SolveStats {
    /// Nearest-rank statistics of wall-clock samples in seconds.
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut v = samples.to_vec();
        v.sort_by(f64::total_cmp);
        let rank = |q: f64| v[((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        Self {
            count: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            median: rank(0.5),
            p99: rank(0.99),
            max: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Planar RMS distance between realized steps and stone centres, m.
    pub step_position_rmse: f64,
    /// Largest `|z|` per axis over the constrained steps.
    pub max_abs_z: [f64; 2],
    pub falls: usize,
    pub constrained_steps: usize,
    /// Realized steps outside their stone rectangle.
    pub violations: usize,
    /// Initial DCMs outside the DCM bounds.
    pub dcm_bound_violations: usize,
    pub solve_time: SolveStats,
}

/// Metrics over the constrained steps of `trace`; the run-in is excluded.
pub fn compute_metrics(trace: &SimTrace, profile: &StoneProfile) -> Metrics {
    let mut sq = 0.0;
    let mut n = 0usize;
    let mut max_abs_z = [0.0f64; 2];
    let mut violations = 0;
    let mut dcm_bound_violations = 0;
    for s in trace.steps.iter() {
        let Some(i) = s.stone else { continue };
        let c = profile.stones[i].center;
        let (dx, dy) = (s.realized_world[0] - c[0], s.realized_world[1] - c[1]);
        sq += dx * dx + dy * dy;
        n += 1;
        max_abs_z[0] = max_abs_z[0].max(s.z_next.x.abs());
        max_abs_z[1] = max_abs_z[1].max(s.z_next.y.abs());
        if s.in_bounds == Some(false) {
            violations += 1;
        }
        if !s.z_in_bounds {
            dcm_bound_violations += 1;
        }
    }
    Metrics {
        step_position_rmse: if n == 0 { 0.0 } else { (sq / n as f64).sqrt() },
        max_abs_z,
        falls: usize::from(matches!(trace.status, TerminalStatus::Fell { .. })),
        constrained_steps: n,
        violations,
        dcm_bound_violations,
        solve_time: SolveStats::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let s = SolveStats::from_samples(&[5.0, 1.0, 3.0, 2.0, 4.0]);
        assert_eq!(s.median, 3.0);
        assert_eq!(s.max, 5.0);
        assert_eq!(s.p99, 5.0);
        assert_eq!(s.mean, 3.0);
        assert_eq!(SolveStats::from_samples(&[]).count, 0);
    }
}
