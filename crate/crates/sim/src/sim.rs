//! Closed-loop reduced-order walking.
//!
//! The ALIP flows in closed form between events (tick boundaries, push
//! windows, touchdown). The planner runs on a fixed period measured from each
//! touchdown, touchdown happens exactly when the phase variable reaches one,
//! and the contact frame then jumps to the realized foothold.

use std::time::Instant;

use dcm_step_core::alip::{compute_dcm_bounds, dcm_from_state, flow_state, nominal_initial_dcm};
use dcm_step_core::planner::{Foothold, PlanError, Planner, PlannerInput};
use dcm_step_core::rng::ScenarioRng;
use dcm_step_core::terrain::generate_profile;
use dcm_step_core::{AlipState, DcmBounds, DcmVec, Footstep, ModelParams, PhaseState, StoneProfile, SwingSide};
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, SimConfig};
use crate::metrics::{compute_metrics, Metrics, SolveStats};

/// Outcome of one planning tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanOutcome {
    Solved,
    Degraded,
    Infeasible,
    Error,
}

impl PlanOutcome {
    pub fn code(&self) -> &'static str {
        match self {
            PlanOutcome::Solved => "solved",
            PlanOutcome::Degraded => "degraded",
            PlanOutcome::Infeasible => "infeasible",
            PlanOutcome::Error => "error",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanTick {
    pub outcome: PlanOutcome,
    pub iterations: usize,
    pub cost: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    /// Time since the start of the run, s.
    pub t: f64,
    /// Step index, run-in included.
    pub step: usize,
    /// Time since the last touchdown, s.
    pub t_step: f64,
    pub side: SwingSide,
    /// State in the current contact frame.
    pub state: AlipState,
    pub dcm: DcmVec,
    pub tau: f64,
    pub tau_dot: f64,
    /// Command in effect after this tick's planning, contact frame.
    pub command: Footstep,
    pub plan: Option<PlanTick>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Stone targeted by this step; `None` during the run-in.
    pub stone: Option<usize>,
    pub side: SwingSide,
    pub duration: f64,
    /// Commanded step in the contact frame.
    pub commanded: [f64; 2],
    pub realized_world: [f64; 2],
    pub target: Option<[f64; 2]>,
    /// Realized foothold inside the stone rectangle.
    pub in_bounds: Option<bool>,
    /// Initial DCM of the next step, in the new contact frame.
    pub z_next: DcmVec,
    pub z_in_bounds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TerminalStatus {
    Completed,
    /// `step` is the ordinal of the constrained step, 0 during the run-in.
    Fell { step: usize },
    PlannerFailed { step: usize },
}

impl TerminalStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, TerminalStatus::Completed)
    }

    pub fn failed_step(&self) -> Option<usize> {
        match self {
            TerminalStatus::Completed => None,
            TerminalStatus::Fell { step } | TerminalStatus::PlannerFailed { step } => Some(*step),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub ticks: Vec<TickRecord>,
    pub steps: Vec<StepRecord>,
    pub status: TerminalStatus,
    pub run_in_steps: usize,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub trace: SimTrace,
    pub metrics: Metrics,
    pub profile: StoneProfile,
    /// Wall-clock seconds per planner call. Not part of the trace.
    pub solve_times: Vec<f64>,
}

/// Touchdown: move the contact frame to the realized step.
///
/// Returns the state in the new frame and the realized step in the old frame.
/// Angular momentum is unchanged; the CoM position shifts by the step.
pub fn detect_touchdown_and_reset(
    state: &AlipState,
    committed: &Footstep,
    noise: Option<f64>,
    rng: &mut ScenarioRng,
) -> (AlipState, [f64; 2]) {
    let (nx, ny) = match noise {
        Some(h) if h > 0.0 => (rng.uniform(-h, h), rng.uniform(-h, h)),
        _ => (0.0, 0.0),
    };
    let u = [committed.u_x + nx, committed.u_y + ny];
    (
        AlipState::new(state.x_c - u[0], state.y_c - u[1], state.l_x, state.l_y),
        u,
    )
}

fn ramp(final_length: f64, j: usize, n: usize) -> f64 {
    if n == 0 {
        final_length
    } else {
        final_length * j as f64 / n as f64
    }
}

/// Initial DCM estimate beyond `multiple` times the bound on either axis.
fn diverged(z: DcmVec, bounds: &DcmBounds, multiple: f64) -> bool {
    let x_lim = bounds.z_x_min.abs().max(bounds.z_x_max.abs());
    !(z.x.abs() <= multiple * x_lim && z.y.abs() <= multiple * bounds.y_abs_max())
}

struct Loop<'a> {
    cfg: &'a SimConfig,
    p: ModelParams,
    bounds: DcmBounds,
    profile: &'a StoneProfile,
    planner: Planner,
    rng: ScenarioRng,
    sigma_des: f64,
    t_des: f64,

    t: f64,
    tick: usize,
    step: usize,
    t_step: f64,
    next_replan: f64,
    side: SwingSide,
    state: AlipState,
    contact_world: [f64; 2],
    command: Footstep,
    phase: PhaseState,
    pending: Option<(usize, usize, Footstep)>,
    last_failed: bool,
    run_in_final: f64,
    run_in_lateral: f64,

    ticks: Vec<TickRecord>,
    steps: Vec<StepRecord>,
    solve_times: Vec<f64>,
}

impl Loop<'_> {
    fn run_in_steps(&self) -> usize {
        self.cfg.run_in.steps
    }

    fn stone_index(&self) -> Option<usize> {
        self.step.checked_sub(self.run_in_steps())
    }

    fn ordinal(&self) -> usize {
        self.stone_index().map_or(0, |i| i + 1)
    }

    fn force(&self, t_step: f64) -> Option<[f64; 2]> {
        let ord = self.stone_index()? + 1;
        self.cfg
            .scenario
            .perturbations
            .iter()
            .find_map(|p| p.force_at(ord, t_step))
    }

    fn run_in_command(&self) -> Footstep {
        let n = self.run_in_steps();
        let j = self.step;
        let next = self.side.flip();
        let target = nominal_initial_dcm(
            ramp(self.run_in_final, j + 1, n),
            ramp(self.run_in_lateral, j + 1, n),
            self.t_des,
            next,
            &self.p,
            &self.cfg.planner.limits,
        );
        let z = dcm_from_state(&self.state, &self.p);
        Footstep {
            u_x: self.sigma_des * z.x - target.x,
            u_y: self.sigma_des * z.y - target.y,
            duration: self.t_des,
            side: self.side,
        }
    }

    /// Command before the first plan of a constrained step: the previous
    /// plan's expectation if there is one, else the stone centre at `T_des`.
    fn default_command(&self, stone: usize) -> Footstep {
        if let Some(prev) = self.planner.last_solution() {
            if prev.side == self.side {
                let s = prev.stages[0];
                return Footstep {
                    u_x: s.u.x,
                    u_y: s.u.y,
                    duration: self.p.duration(s.sigma),
                    side: self.side,
                };
            }
        }
        let c = self.profile.stones[stone].center;
        Footstep {
            u_x: c[0] - self.contact_world[0],
            u_y: c[1] - self.contact_world[1],
            duration: self.t_des,
            side: self.side,
        }
    }

    fn begin_step(&mut self) {
        self.t_step = 0.0;
        self.next_replan = 0.0;
        self.pending = None;
        self.last_failed = false;
        self.command = match self.stone_index() {
            None => self.run_in_command(),
            Some(i) => self.default_command(i),
        };
        self.phase = PhaseState::new(self.command.duration).expect("positive duration");
    }

    fn upcoming(&self, from: usize) -> Vec<Foothold> {
        self.profile.stones[from..]
            .iter()
            .map(|s| Foothold {
                center: s.center,
                half_extent: s.half_extent,
            })
            .collect()
    }

    fn replan(&mut self, stone: usize) -> Option<PlanTick> {
        let limits = &self.cfg.planner.limits;
        // No admissible duration is left, or the committed touchdown is due.
        if self.t_step + self.cfg.replan_period >= limits.t_max
            || self.t_step + self.cfg.replan_period > self.phase.duration()
        {
            return None;
        }
        let input = PlannerInput {
            xi_measured: dcm_from_state(&self.state, &self.p),
            t_elapsed: self.t_step,
            contact_world: self.contact_world,
            swing_side: self.side,
            upcoming: self.upcoming(stone),
            previous_solution: None,
        };
        let started = Instant::now();
        let result = self.planner.plan(input);
        self.solve_times.push(started.elapsed().as_secs_f64());
        match result {
            Ok(sol) => {
                self.last_failed = false;
                let s = sol.stages[0];
                let cmd = Footstep {
                    u_x: s.u.x,
                    u_y: s.u.y,
                    duration: self.p.duration(s.sigma),
                    side: self.side,
                };
                self.pending = Some((self.tick + self.cfg.latency_ticks, self.step, cmd));
                let d = sol.diagnostics;
                Some(PlanTick {
                    outcome: match d.status {
                        dcm_step_core::PlanStatus::Solved => PlanOutcome::Solved,
                        dcm_step_core::PlanStatus::Degraded => PlanOutcome::Degraded,
                    },
                    iterations: d.iterations,
                    cost: d.total_cost,
                    residual: d.feasibility_residual,
                })
            }
            Err(e) => {
                self.last_failed = true;
                let outcome = if matches!(e, PlanError::Infeasible) {
                    PlanOutcome::Infeasible
                } else {
                    PlanOutcome::Error
                };
                Some(PlanTick {
                    outcome,
                    iterations: 0,
                    cost: f64::NAN,
                    residual: f64::NAN,
                })
            }
        }
    }

    fn apply_pending(&mut self) {
        if let Some((at, step, cmd)) = self.pending {
            if step != self.step {
                self.pending = None;
            } else if self.tick >= at {
                self.pending = None;
                if cmd.duration > self.t_step && self.phase.update(self.t_step, cmd.duration).is_ok() {
                    self.command = cmd;
                } else {
                    // Too late to honour the timing; keep the position.
                    self.command.u_x = cmd.u_x;
                    self.command.u_y = cmd.u_y;
                }
            }
        }
    }

    /// Touchdown at the end of the current step.
    fn touchdown(&mut self) -> Option<TerminalStatus> {
        let stone = self.stone_index();
        if stone.is_some() && self.last_failed {
            return Some(TerminalStatus::PlannerFailed { step: self.ordinal() });
        }
        let noise = match stone {
            Some(_) => self.cfg.landing_noise,
            None => Some(self.cfg.run_in.landing_noise),
        };
        let (state, u) = detect_touchdown_and_reset(&self.state, &self.command, noise, &mut self.rng);
        let realized = [self.contact_world[0] + u[0], self.contact_world[1] + u[1]];
        self.state = state;
        let z_next = dcm_from_state(&self.state, &self.p);
        let next_side = self.side.flip();
        let (target, in_bounds) = match stone {
            Some(i) => {
                let s = &self.profile.stones[i];
                (Some(s.center), Some(s.contains(realized, 1e-9)))
            }
            None => (None, None),
        };
        self.steps.push(StepRecord {
            step: self.step,
            stone,
            side: self.side,
            duration: self.t_step,
            commanded: [self.command.u_x, self.command.u_y],
            realized_world: realized,
            target,
            in_bounds,
            z_next,
            z_in_bounds: self.bounds.contains(z_next, next_side, 1e-9),
        });
        self.contact_world = realized;
        self.side = next_side;
        self.step += 1;
        if stone.is_some() {
            self.planner.on_touchdown();
        }
        None
    }

    fn total_steps(&self) -> usize {
        self.run_in_steps() + self.profile.len()
    }

    /// Advance one tick, splitting at push-window edges and touchdown.
    fn advance(&mut self) -> Option<TerminalStatus> {
        let dt = self.cfg.tick;
        let mut remaining = dt;
        while remaining > 1e-15 {
            let mut h = remaining;
            let to_touchdown = self.phase.duration() - self.t_step;
            let mut touchdown = false;
            if to_touchdown <= h + 1e-12 {
                h = to_touchdown.max(0.0);
                touchdown = true;
            }
            let force = self.force(self.t_step);
            if let Some(ord) = self.stone_index().map(|i| i + 1) {
                for p in self.cfg.scenario.perturbations.iter().filter(|p| p.step_index == ord) {
                    for edge in [p.window.0, p.window.1] {
                        if edge > self.t_step + 1e-12 && edge < self.t_step + h - 1e-12 {
                            h = edge - self.t_step;
                            touchdown = false;
                        }
                    }
                }
            }
            self.state = flow_state(&self.state, h, &self.p, force);
            self.t_step += h;
            remaining -= h;
            if touchdown {
                if let Some(end) = self.touchdown() {
                    return Some(end);
                }
                if self.step >= self.total_steps() {
                    return Some(TerminalStatus::Completed);
                }
                self.begin_step();
                self.t_step = 0.0;
            }
        }
        self.t += dt;
        self.tick += 1;
        None
    }

    fn check_fall(&self) -> Option<TerminalStatus> {
        let xi = dcm_from_state(&self.state, &self.p);
        let z = xi * (-self.p.lambda() * self.t_step).exp();
        if !self.state.is_finite() || diverged(z, &self.bounds, self.cfg.fall_multiple) {
            Some(TerminalStatus::Fell { step: self.ordinal() })
        } else {
            None
        }
    }

    fn record(&mut self, plan: Option<PlanTick>) {
        let ph = self.phase.eval(self.t_step);
        self.ticks.push(TickRecord {
            t: self.t,
            step: self.step,
            t_step: self.t_step,
            side: self.side,
            state: self.state,
            dcm: dcm_from_state(&self.state, &self.p),
            tau: ph.tau,
            tau_dot: ph.tau_dot,
            command: self.command,
            plan,
        });
    }

    fn run(&mut self) -> TerminalStatus {
        if self.total_steps() == 0 {
            return TerminalStatus::Completed;
        }
        self.begin_step();
        // Guard against a loop that never touches down.
        let max_ticks = ((self.total_steps() as f64 + 1.0) * self.cfg.planner.limits.t_max * 2.0 / self.cfg.tick) as usize;
        loop {
            let mut plan = None;
            if let Some(stone) = self.stone_index() {
                if self.t_step + 1e-12 >= self.next_replan {
                    self.next_replan += self.cfg.replan_period;
                    plan = self.replan(stone);
                }
            }
            self.apply_pending();
            self.record(plan);
            if let Some(end) = self.advance() {
                return end;
            }
            if let Some(end) = self.check_fall() {
                return end;
            }
            if self.tick > max_ticks {
                return TerminalStatus::Fell { step: self.ordinal() };
            }
        }
    }
}

/// Run one scenario to completion or failure.
pub fn run_scenario(cfg: &SimConfig) -> Result<SimOutput, ConfigError> {
    cfg.validate()?;
    let p = cfg.model;
    let limits = cfg.planner.limits;
    let profile = generate_profile(&cfg.scenario.profile, cfg.scenario.seed, &limits)
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let planner_cfg = cfg.effective_planner();
    let bounds = planner_cfg.bounds(&p);
    let planner = Planner::new(planner_cfg, p).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let n_run = cfg.run_in.steps;
    let t_des = planner_cfg.t_des;
    let run_in_final = cfg
        .run_in
        .final_length
        .unwrap_or_else(|| profile.stones.first().map_or(0.0, |s| s.length));
    let run_in_lateral = cfg
        .run_in
        .final_lateral
        .unwrap_or_else(|| profile.stones.first().map_or(0.0, |s| s.width));

    // The run-in starts at rest and is laid out so that its unperturbed
    // footholds end on the origin that the stones are placed from.
    let first_side = profile.first_side.after(n_run);
    let sigma_des = p.sigma(t_des);
    let z_start = nominal_initial_dcm(0.0, 0.0, t_des, first_side, &p, &limits);
    let mut z = z_start;
    let mut start = [0.0, 0.0];
    for j in 0..n_run {
        let next = first_side.after(j + 1);
        let target = nominal_initial_dcm(
            ramp(run_in_final, j + 1, n_run),
            ramp(run_in_lateral, j + 1, n_run),
            t_des,
            next,
            &p,
            &limits,
        );
        start[0] -= sigma_des * z.x - target.x;
        start[1] -= sigma_des * z.y - target.y;
        z = target;
    }

    let mut lp = Loop {
        cfg,
        p,
        bounds,
        profile: &profile,
        planner,
        rng: ScenarioRng::new(cfg.scenario.seed ^ 0x5EED_1A4D_0F_F5E7),
        sigma_des,
        t_des,
        t: 0.0,
        tick: 0,
        step: 0,
        t_step: 0.0,
        next_replan: 0.0,
        side: first_side,
        state: AlipState::at_rest(z_start),
        contact_world: start,
        command: Footstep {
            u_x: 0.0,
            u_y: 0.0,
            duration: t_des,
            side: first_side,
        },
        phase: PhaseState::new(t_des).expect("positive duration"),
        pending: None,
        last_failed: false,
        run_in_final,
        run_in_lateral,
        ticks: Vec::new(),
        steps: Vec::new(),
        solve_times: Vec::new(),
    };
    let status = lp.run();
    let solve_times = lp.solve_times;
    let trace = SimTrace {
        ticks: lp.ticks,
        steps: lp.steps,
        status,
        run_in_steps: n_run,
    };
    let mut metrics = compute_metrics(&trace, &profile);
    metrics.solve_time = SolveStats::from_samples(&solve_times);
    Ok(SimOutput {
        trace,
        metrics,
        profile,
        solve_times,
    })
}

/// DCM bounds used by a config.
pub fn config_bounds(cfg: &SimConfig) -> DcmBounds {
    cfg.planner
        .dcm_bounds
        .unwrap_or_else(|| compute_dcm_bounds(&cfg.planner.limits, &cfg.model))
}
