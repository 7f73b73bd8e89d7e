//! Simulation configuration and scenario presets.
//!
//! Configs are TOML on disk. Every field except the scenario has a default, so
//! a minimal file only names the profile.

use std::path::Path;

use dcm_step_core::planner::PlannerConfig;
use dcm_step_core::{ModelParams, ProfileKind, ProfileSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlannerMode {
    /// N-step MPC with the bilinear solver.
    Mpc { horizon: usize },
    /// One-step-ahead QP baseline.
    Qp,
}

impl PlannerMode {
    pub fn horizon(&self) -> usize {
        match self {
            PlannerMode::Mpc { horizon } => *horizon,
            PlannerMode::Qp => 1,
        }
    }

    pub fn label(&self) -> String {
        match self {
            PlannerMode::Mpc { horizon } => format!("mpc{horizon}"),
            PlannerMode::Qp => "qp".to_string(),
        }
    }
}

/// External push applied during one constrained step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    /// Ordinal of the constrained step, starting at 1.
    pub step_index: usize,
    /// `(F_x, F_y)` in N, world frame.
    pub force: [f64; 2],
    /// `(t_start, t_end)` relative to the step's start, s.
    pub window: (f64, f64),
}

impl Perturbation {
    pub fn force_at(&self, step_ordinal: usize, t: f64) -> Option<[f64; 2]> {
        (step_ordinal == self.step_index && t >= self.window.0 && t < self.window.1).then_some(self.force)
    }
}

/// The four pushes of the push-recovery scenario.
pub fn standard_perturbations() -> Vec<Perturbation> {
    [(5, [150.0, 0.0]), (10, [-150.0, 0.0]), (15, [0.0, 75.0]), (20, [0.0, -75.0])]
        .into_iter()
        .map(|(step_index, force)| Perturbation {
            step_index,
            force,
            window: (0.1, 0.2),
        })
        .collect()
}

/// Unconstrained speed-up steps before the first stone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunInConfig {
    pub steps: usize,
    /// Step length reached at the end of the ramp. Defaults to the first
    /// stone's forward spacing.
    #[serde(default)]
    pub final_length: Option<f64>,
    /// Lateral deviation `W` reached at the end of the ramp. Defaults to the
    /// first stone's.
    #[serde(default)]
    pub final_lateral: Option<f64>,
    /// Half-width of the uniform landing error on run-in steps, m. Makes the
    /// state at the first stone depend on the seed.
    #[serde(default = "default_run_in_noise")]
    pub landing_noise: f64,
}

fn default_run_in_noise() -> f64 {
    0.005
}

impl Default for RunInConfig {
    fn default() -> Self {
        Self {
            steps: 6,
            final_length: None,
            final_lateral: None,
            landing_noise: default_run_in_noise(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub profile: ProfileSpec,
    pub seed: u64,
    #[serde(default)]
    pub perturbations: Vec<Perturbation>,
}

impl Scenario {
    /// Preset by label: `I`, `II`, `III`, `IV` or `perturb`. Profile I uses
    /// `(length, width)`.
    pub fn preset(label: &str, seed: u64, length: f64, width: f64) -> Result<Self, ConfigError> {
        let (profile, perturbations) = match label {
            "I" | "i" => (ProfileSpec::profile_i(length, width), Vec::new()),
            "II" | "ii" => (ProfileSpec::profile_ii(), Vec::new()),
            "III" | "iii" => (ProfileSpec::profile_iii(), Vec::new()),
            "IV" | "iv" => (ProfileSpec::profile_iv(), Vec::new()),
            "perturb" | "P" | "p" => (ProfileSpec::perturbation(), standard_perturbations()),
            other => return Err(ConfigError::Invalid(format!("unknown profile '{other}'"))),
        };
        Ok(Self {
            profile,
            seed,
            perturbations,
        })
    }
}

fn default_tick() -> f64 {
    0.001
}

fn default_replan() -> f64 {
    0.04
}

fn default_fall_multiple() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default = "default_tick")]
    pub tick: f64,
    #[serde(default = "default_replan")]
    pub replan_period: f64,
    pub planner_mode: PlannerMode,
    #[serde(default)]
    pub model: ModelParams,
    #[serde(default)]
    pub planner: PlannerConfig,
    pub scenario: Scenario,
    /// Half-width of the uniform landing error added to each realized step, m.
    #[serde(default)]
    pub landing_noise: Option<f64>,
    /// Ticks between a plan being computed and its command taking effect.
    #[serde(default)]
    pub latency_ticks: usize,
    #[serde(default)]
    pub run_in: RunInConfig,
    /// A fall is declared when the initial-DCM estimate leaves this multiple
    /// of the DCM bound on either axis.
    #[serde(default = "default_fall_multiple")]
    pub fall_multiple: f64,
}

impl SimConfig {
    pub fn new(scenario: Scenario, planner_mode: PlannerMode) -> Self {
        Self {
            tick: default_tick(),
            replan_period: default_replan(),
            planner_mode,
            model: ModelParams::default(),
            planner: PlannerConfig::default(),
            scenario,
            landing_noise: None,
            latency_ticks: 0,
            run_in: RunInConfig::default(),
            fall_multiple: default_fall_multiple(),
        }
    }

    pub fn with_mode(&self, planner_mode: PlannerMode) -> Self {
        let mut c = self.clone();
        c.planner_mode = planner_mode;
        c
    }

    /// Planner settings with the horizon and replan period taken from this config.
    pub fn effective_planner(&self) -> PlannerConfig {
        let mut p = self.planner;
        p.horizon = self.planner_mode.horizon();
        p.replan_period = self.replan_period;
        p
    }

    /// Replan period in whole ticks.
    pub fn replan_ticks(&self) -> usize {
        (self.replan_period / self.tick).round() as usize
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(self.tick > 0.0 && self.tick.is_finite()) {
            return bad("tick must be positive");
        }
        let ratio = self.replan_period / self.tick;
        if !(ratio >= 1.0 && (ratio - ratio.round()).abs() <= 1e-9 * ratio) {
            return bad("replan_period must be an integer multiple of tick");
        }
        if self.planner_mode.horizon() == 0 {
            return bad("horizon must be at least 1");
        }
        if self.model.validate().is_err() {
            return bad("model parameters");
        }
        if self.effective_planner().validate().is_err() {
            return bad("planner parameters");
        }
        if let Some(n) = self.landing_noise {
            if !(n >= 0.0 && n.is_finite()) {
                return bad("landing_noise must be non-negative");
            }
        }
        if !(self.fall_multiple > 1.0) {
            return bad("fall_multiple must exceed 1");
        }
        if !(self.run_in.landing_noise >= 0.0 && self.run_in.landing_noise.is_finite()) {
            return bad("run_in.landing_noise must be non-negative");
        }
        if let Some(l) = self.run_in.final_length {
            if !(l.is_finite() && l.abs() <= 1.0) {
                return bad("run_in.final_length");
            }
        }
        let t_min = self.planner.limits.t_min;
        for p in &self.scenario.perturbations {
            let (a, b) = p.window;
            if !(a >= 0.0 && a < b && b <= t_min) || p.step_index == 0 || !p.force.iter().all(|f| f.is_finite()) {
                return bad("perturbation window must satisfy 0 <= start < end <= t_min");
            }
        }
        if let ProfileKind::Constant { length, .. } = self.scenario.profile.kind {
            if !(length > 0.0) {
                return bad("profile length");
            }
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = SimConfig::new(Scenario::preset("II", 3, 0.4, 0.0).unwrap(), PlannerMode::Mpc { horizon: 4 });
        cfg.validate().unwrap();
        assert_eq!(cfg.replan_ticks(), 40);
        assert_eq!(cfg.effective_planner().horizon, 4);
    }

    #[test]
    fn replan_must_be_tick_multiple() {
        let mut cfg = SimConfig::new(Scenario::preset("I", 0, 0.4, 0.0).unwrap(), PlannerMode::Qp);
        cfg.replan_period = 0.0405;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn perturbation_window_checked() {
        let mut cfg = SimConfig::new(Scenario::preset("perturb", 0, 0.4, 0.0).unwrap(), PlannerMode::Qp);
        cfg.validate().unwrap();
        cfg.scenario.perturbations[0].window = (0.2, 0.1);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = SimConfig::new(Scenario::preset("perturb", 9, 0.4, 0.0).unwrap(), PlannerMode::Mpc { horizon: 3 });
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(SimConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn minimal_toml() {
        let text = r#"
            planner_mode = { kind = "qp" }
            [scenario]
            seed = 4
            [scenario.profile]
            count = 32
            length_range = [0.2, 0.5]
            width_range = [-0.15, 0.15]
            half_extent = [0.1, 0.05]
            kind = { type = "uniform_random" }
        "#;
        let cfg = SimConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.tick, 0.001);
        assert_eq!(cfg.fall_multiple, 3.0);
        assert_eq!(cfg.planner_mode, PlannerMode::Qp);
    }

    #[test]
    fn push_lookup() {
        let p = standard_perturbations();
        assert_eq!(p[0].force_at(5, 0.15), Some([150.0, 0.0]));
        assert_eq!(p[0].force_at(5, 0.2), None);
        assert_eq!(p[0].force_at(4, 0.15), None);
    }
}
