//! Swing phase variable under mid-step duration updates.
//!
//! Each update starts a new linear segment at the current `(t, τ)` that reaches
//! `τ = 1` at the newly commanded duration, so `τ` stays continuous while its
//! slope jumps.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum PhaseError {
    #[error("commanded duration {duration} s is not after the update time {t} s")]
    NonCausalDuration { t: f64, duration: f64 },
    #[error("update at {t} s precedes the active segment start")]
    OutOfOrder { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSegment {
    pub t_start: f64,
    pub tau_start: f64,
    /// Time at which this segment reaches `τ = 1`.
    pub t_end: f64,
}

impl PhaseSegment {
    fn slope(&self) -> f64 {
        (1.0 - self.tau_start) / (self.t_end - self.t_start)
    }

    fn tau(&self, t: f64) -> f64 {
        self.tau_start + (1.0 - self.tau_start) * (t - self.t_start) / (self.t_end - self.t_start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSample {
    pub tau: f64,
    pub tau_dot: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    segments: Vec<PhaseSegment>,
}

impl PhaseState {
    /// Fresh swing phase starting at `t = 0`, `τ = 0`.
    pub fn new(duration: f64) -> Result<Self, PhaseError> {
        if !(duration > 0.0) {
            return Err(PhaseError::NonCausalDuration { t: 0.0, duration });
        }
        Ok(Self {
            segments: vec![PhaseSegment {
                t_start: 0.0,
                tau_start: 0.0,
                t_end: duration,
            }],
        })
    }

    pub fn segments(&self) -> &[PhaseSegment] {
        &self.segments
    }

    fn active(&self) -> &PhaseSegment {
        self.segments.last().expect("phase has at least one segment")
    }

    /// Touchdown time under the latest command.
    pub fn duration(&self) -> f64 {
        self.active().t_end
    }

    /// Start a new segment at `t_now` that reaches 1 at `new_duration`.
    ///
    /// An update at the active segment's start time replaces that segment.
    pub fn update(&mut self, t_now: f64, new_duration: f64) -> Result<(), PhaseError> {
        if !(new_duration > t_now) {
            return Err(PhaseError::NonCausalDuration {
                t: t_now,
                duration: new_duration,
            });
        }
        let active = *self.active();
        if t_now < active.t_start {
            return Err(PhaseError::OutOfOrder { t: t_now });
        }
        if t_now >= active.t_end {
            // Already clamped at 1; touchdown is due.
            return Err(PhaseError::NonCausalDuration {
                t: t_now,
                duration: active.t_end,
            });
        }
        if t_now == active.t_start {
            self.segments.last_mut().unwrap().t_end = new_duration;
            return Ok(());
        }
        self.segments.push(PhaseSegment {
            t_start: t_now,
            tau_start: active.tau(t_now),
            t_end: new_duration,
        });
        Ok(())
    }

    /// `τ` and `τ̇` at time `t`, clamped to `(1, 0)` once the active duration is reached.
    pub fn eval(&self, t: f64) -> PhaseSample {
        let seg = self
            .segments
            .iter()
            .rev()
            .find(|s| t >= s.t_start)
            .unwrap_or(&self.segments[0]);
        let is_active = core::ptr::eq(seg, self.active());
        if is_active && t >= seg.t_end {
            return PhaseSample { tau: 1.0, tau_dot: 0.0 };
        }
        PhaseSample {
            tau: seg.tau(t).min(1.0),
            tau_dot: seg.slope(),
        }
    }
}
