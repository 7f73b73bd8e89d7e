//! N-step footstep MPC over the initial-DCM dynamics.
//!
//! Each planning tick estimates the current step's initial DCM from the
//! measured DCM, derives per-step targets and boxes from the upcoming stones,
//! and solves for `(z^k, σ^k, u^k)`, `k = 1..N`. A horizon of one is the
//! one-step-ahead baseline and is solved as a convex QP.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::alip::{
    compute_dcm_bounds, dcm_at_time, nominal_initial_dcm, DcmBounds, DcmVec, Footstep, GaitLimits,
    ModelParams, SwingSide,
};
use crate::solver::{
    solve_bilinear, solve_single_step, MpcInstance, ScpError, ScpSettings, ScpStatus, StageSpec,
    StageValue,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Number of future steps `N`. One selects the QP baseline.
    pub horizon: usize,
    /// Desired step duration in s.
    pub t_des: f64,
    /// Weights on `(z_x, z_y, σ, u_x, u_y)`.
    pub alpha: [f64; 5],
    /// Stage decay `β^k = beta_base^(beta_offset − k)`.
    pub beta_base: f64,
    pub beta_offset: i32,
    pub limits: GaitLimits,
    /// Overrides the box computed from `limits` when set.
    #[serde(default)]
    pub dcm_bounds: Option<DcmBounds>,
    pub replan_period: f64,
    #[serde(default)]
    pub solver: ScpSettings,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            horizon: 4,
            t_des: 0.5,
            alpha: [1e4, 2e4, 1.0, 1e4, 2e4],
            beta_base: 10.0,
            beta_offset: 4,
            limits: GaitLimits::default(),
            dcm_bounds: None,
            replan_period: 0.04,
            solver: ScpSettings::default(),
        }
    }
}

impl PlannerConfig {
    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn beta(&self, k: usize) -> f64 {
        libm::pow(self.beta_base, (self.beta_offset - k as i32) as f64)
    }

    pub fn bounds(&self, p: &ModelParams) -> DcmBounds {
        self.dcm_bounds.unwrap_or_else(|| compute_dcm_bounds(&self.limits, p))
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let ok = self.horizon >= 1
            && self.alpha.iter().all(|a| a.is_finite() && *a >= 0.0)
            && self.beta_base.is_finite()
            && self.beta_base > 0.0
            && self.t_des > 0.0
            && self.replan_period > 0.0
            && self.replan_period < self.limits.t_min
            && self.limits.validate().is_ok()
            && self.solver.is_valid();
        if ok {
            Ok(())
        } else {
            Err(PlanError::InvalidConfig)
        }
    }
}

/// A foothold in the world frame: centre and half-size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Foothold {
    pub center: [f64; 2],
    pub half_extent: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerInput {
    pub xi_measured: DcmVec,
    /// Time since the last touchdown, s.
    pub t_elapsed: f64,
    pub contact_world: [f64; 2],
    /// Foot swinging in the current step.
    pub swing_side: SwingSide,
    /// Next stones, nearest first.
    pub upcoming: Vec<Foothold>,
    #[serde(default)]
    pub previous_solution: Option<PlanSolution>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanStatus {
    Solved,
    Degraded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanDiagnostics {
    pub feasibility_residual: f64,
    pub iterations: usize,
    pub total_cost: f64,
    pub status: PlanStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSolution {
    /// `(z^k, σ^k, u^k)` for `k = 1..N`.
    pub stages: Vec<StageValue>,
    /// Swing side of step 1.
    pub side: SwingSide,
    pub diagnostics: PlanDiagnostics,
}

impl PlanSolution {
    /// Same plan one step later: step 2 becomes step 1.
    pub fn shifted(&self) -> Option<PlanSolution> {
        if self.stages.len() < 2 {
            return None;
        }
        Some(PlanSolution {
            stages: self.stages[1..].to_vec(),
            side: self.side.flip(),
            diagnostics: self.diagnostics,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("only {available} stones ahead, horizon needs {needed}")]
    InsufficientTerrain { needed: usize, available: usize },
    #[error("planner configuration is invalid")]
    InvalidConfig,
    #[error("planner input is invalid")]
    InvalidInput,
    #[error("no footstep satisfies the hard bounds")]
    Infeasible,
    #[error("solver failure: {0}")]
    Solver(ScpError),
}

impl From<ScpError> for PlanError {
    fn from(e: ScpError) -> Self {
        match e {
            ScpError::Infeasible { .. } => PlanError::Infeasible,
            other => PlanError::Solver(other),
        }
    }
}

/// Initial DCM of the current step from the DCM measured `t_elapsed` into it.
pub fn estimate_initial_dcm(xi_measured: DcmVec, t_elapsed: f64, p: &ModelParams) -> DcmVec {
    xi_measured * libm::exp(-p.lambda() * t_elapsed)
}

/// Targets and boxes for each horizon step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesiredValues {
    pub u_des: Vec<DcmVec>,
    pub z_des: Vec<DcmVec>,
    pub sigma_des: f64,
    /// `(lo, hi)` per step: the stone rectangle around `u_des`.
    pub u_bounds: Vec<(DcmVec, DcmVec)>,
    /// `(lo, hi)` per step: the stone rectangle relative to the current
    /// contact. The solver bounds the foothold `u^1 + … + u^k` by it, which
    /// equals `u_bounds` when the earlier steps land where expected.
    pub p_bounds: Vec<(DcmVec, DcmVec)>,
    /// Swing side of each step.
    pub sides: Vec<SwingSide>,
}

/// Desired step positions, initial DCMs and step boxes for `horizon` steps.
///
/// Step 1 targets the first stone relative to the stance foot. Later steps
/// target their stone relative to where the previous plan expects the prior
/// touchdown; without a previous plan the stone-to-stone offset is used.
/// `z^k` is the initial DCM of step `k+1`, so its target is the nominal value
/// for the stone-to-stone offset of step `k+1`, or of step `k` on the last
/// step of the horizon.
pub fn build_desired_values(
    input: &PlannerInput,
    cfg: &PlannerConfig,
    p: &ModelParams,
    horizon: usize,
) -> Result<DesiredValues, PlanError> {
    if input.upcoming.len() < horizon {
        return Err(PlanError::InsufficientTerrain {
            needed: horizon,
            available: input.upcoming.len(),
        });
    }
    let sigma_des = p.sigma(cfg.t_des);
    let prev = input.previous_solution.as_ref();
    let mut expected = input.contact_world;
    let mut out = DesiredValues {
        u_des: Vec::with_capacity(horizon),
        z_des: Vec::with_capacity(horizon),
        sigma_des,
        u_bounds: Vec::with_capacity(horizon),
        p_bounds: Vec::with_capacity(horizon),
        sides: Vec::with_capacity(horizon),
    };
    for k in 0..horizon {
        let stone = &input.upcoming[k];
        let side = input.swing_side.after(k);
        let origin = if k == 0 {
            input.contact_world
        } else {
            match prev.and_then(|s| s.stages.get(k - 1)) {
                Some(_) => expected,
                None => input.upcoming[k - 1].center,
            }
        };
        let u = DcmVec::new(stone.center[0] - origin[0], stone.center[1] - origin[1]);
        if let Some(st) = prev.and_then(|s| s.stages.get(k)) {
            expected = [expected[0] + st.u.x, expected[1] + st.u.y];
        }
        // z^k starts step k+1, so its nominal value follows that step's gait
        // when the next stone is inside the horizon.
        let (gl, gw) = match input.upcoming.get(k + 1).filter(|_| k + 1 < horizon) {
            Some(next) => (
                next.center[0] - stone.center[0],
                next.center[1] - stone.center[1] - cfg.limits.width(side.flip()),
            ),
            None => (u.x, u.y - cfg.limits.width(side)),
        };
        let z = nominal_initial_dcm(gl, gw, cfg.t_des, side.flip(), p, &cfg.limits);
        let half = DcmVec::new(stone.half_extent[0], stone.half_extent[1]);
        out.u_des.push(u);
        out.z_des.push(z);
        out.u_bounds.push((u - half, u + half));
        let rel = DcmVec::new(
            stone.center[0] - input.contact_world[0],
            stone.center[1] - input.contact_world[1],
        );
        out.p_bounds.push((rel - half, rel + half));
        out.sides.push(side);
    }
    Ok(out)
}

/// Full MPC instance for `horizon` steps.
pub fn build_instance(
    input: &PlannerInput,
    cfg: &PlannerConfig,
    p: &ModelParams,
    horizon: usize,
) -> Result<MpcInstance, PlanError> {
    let bounds = cfg.bounds(p);
    let des = build_desired_values(input, cfg, p, horizon)?;
    let (s_lo, s_hi) = cfg.limits.sigma_range(p);
    // A replan may not command a touchdown before the next planning tick.
    let earliest = p.sigma(input.t_elapsed + cfg.replan_period).max(s_lo);
    if earliest > s_hi {
        return Err(PlanError::InvalidInput);
    }
    let stages = (0..horizon)
        .map(|k| {
            let beta = cfg.beta(k + 1);
            let (ylo, yhi) = bounds.y_range(des.sides[k].flip());
            StageSpec {
                z_des: des.z_des[k],
                sigma_des: des.sigma_des,
                u_des: des.u_des[k],
                z_lo: DcmVec::new(bounds.z_x_min, ylo),
                z_hi: DcmVec::new(bounds.z_x_max, yhi),
                sigma_lo: if k == 0 { earliest } else { s_lo },
                sigma_hi: s_hi,
                p_lo: des.p_bounds[k].0,
                p_hi: des.p_bounds[k].1,
                weights: cfg.alpha.map(|a| a * beta),
            }
        })
        .collect();
    Ok(MpcInstance {
        z0: estimate_initial_dcm(input.xi_measured, input.t_elapsed, p),
        sigma_scale: des.sigma_des,
        stages,
    })
}

fn check_input(input: &PlannerInput, cfg: &PlannerConfig) -> Result<(), PlanError> {
    let finite = input.xi_measured.x.is_finite()
        && input.xi_measured.y.is_finite()
        && input.contact_world.iter().all(|v| v.is_finite());
    if finite && input.t_elapsed >= 0.0 && input.t_elapsed < cfg.limits.t_max {
        Ok(())
    } else {
        Err(PlanError::InvalidInput)
    }
}

/// Solve one planning tick.
///
/// The horizon shrinks to the number of remaining stones. Horizon one is the
/// QP baseline; longer horizons use the bilinear solver, warm-started from
/// `input.previous_solution` (which must already be aligned to this step).
pub fn plan(input: &PlannerInput, cfg: &PlannerConfig, p: &ModelParams) -> Result<PlanSolution, PlanError> {
    cfg.validate()?;
    check_input(input, cfg)?;
    let horizon = cfg.horizon.min(input.upcoming.len());
    if horizon == 0 {
        return Err(PlanError::InsufficientTerrain {
            needed: cfg.horizon,
            available: 0,
        });
    }
    let inst = build_instance(input, cfg, p, horizon)?;
    let warm: Option<Vec<StageValue>> = input
        .previous_solution
        .as_ref()
        .map(|s| s.stages.iter().copied().take(horizon).collect());
    let sol = if cfg.horizon == 1 {
        solve_single_step(&inst, warm.as_deref())?
    } else {
        solve_bilinear(&inst, warm.as_deref(), &cfg.solver)?
    };
    Ok(PlanSolution {
        stages: sol.stages,
        side: input.swing_side,
        diagnostics: PlanDiagnostics {
            feasibility_residual: sol.residual,
            iterations: sol.iterations,
            total_cost: sol.cost,
            status: match sol.status {
                ScpStatus::Solved => PlanStatus::Solved,
                ScpStatus::Degraded => PlanStatus::Degraded,
            },
        },
    })
}

/// First step of a plan as a command: position and `T^1 = ln(σ^1)/λ`.
pub fn commit_step(sol: &PlanSolution, p: &ModelParams) -> Footstep {
    let first = &sol.stages[0];
    Footstep {
        u_x: first.u.x,
        u_y: first.u.y,
        duration: p.duration(first.sigma),
        side: sol.side,
    }
}

/// Planner with warm-start memory. One instance per walking robot.
#[derive(Debug, Clone)]
pub struct Planner {
    pub config: PlannerConfig,
    pub model: ModelParams,
    last: Option<PlanSolution>,
}

impl Planner {
    pub fn new(config: PlannerConfig, model: ModelParams) -> Result<Self, PlanError> {
        config.validate()?;
        model.validate().map_err(|_| PlanError::InvalidConfig)?;
        Ok(Self {
            config,
            model,
            last: None,
        })
    }

    pub fn last_solution(&self) -> Option<&PlanSolution> {
        self.last.as_ref()
    }

    /// Plan from `input`, using the stored solution as warm start and for
    /// the expected future touchdowns. `input.previous_solution` is ignored.
    pub fn plan(&mut self, mut input: PlannerInput) -> Result<PlanSolution, PlanError> {
        input.previous_solution = self.last.clone().filter(|s| s.side == input.swing_side);
        let sol = plan(&input, &self.config, &self.model)?;
        self.last = Some(sol.clone());
        Ok(sol)
    }

    /// Advance the stored plan past a touchdown.
    pub fn on_touchdown(&mut self) {
        self.last = self.last.as_ref().and_then(PlanSolution::shifted);
    }

    pub fn reset(&mut self) {
        self.last = None;
    }
}

/// Instantaneous DCM expected `t` seconds into a step that started from `z0`.
pub fn predicted_dcm(z0: DcmVec, t: f64, p: &ModelParams) -> DcmVec {
    dcm_at_time(z0, t, p)
}
