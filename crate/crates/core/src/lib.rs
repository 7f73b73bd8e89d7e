//! Step-to-step DCM dynamics on the ALIP model and an N-step footstep MPC with
//! variable step duration.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure function
//! of its inputs or a small owned state machine; IO, timing and the closed-loop
//! simulator live in the companion `dcm-step-sim` crate.
//!
//! Module map:
//!
//! - [`alip`]: model parameters, DCM transforms, closed-form flow, the reset
//!   map, nominal periodic initial DCM and the viability bound box.
//! - [`terrain`]: stepping-stone profile generation and frame changes.
//! - [`solver`]: a dense active-set QP and the trust-region sequential
//!   convexification used for the bilinear step dynamics.
//! - [`planner`]: builds the MPC instance each tick and turns its solution
//!   into a footstep command.
//! - [`phase`]: the piecewise-linear swing phase variable under mid-step
//!   duration updates.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod alip;
pub mod phase;
pub mod planner;
pub mod rng;
pub mod solver;
pub mod terrain;

pub use alip::{
    AlipState, DcmBounds, DcmVec, Footstep, GaitLimits, ModelParams, SwingSide,
};
pub use phase::{PhaseError, PhaseSample, PhaseState};
pub use planner::{PlanError, PlanSolution, Planner, PlannerConfig, PlannerInput, PlanStatus};
pub use terrain::{ProfileKind, ProfileSpec, Stone, StoneProfile, TerrainError};
