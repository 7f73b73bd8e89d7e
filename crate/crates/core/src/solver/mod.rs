//! Small dense solvers for the footstep MPC.
//!
//! [`qp`] is a primal active-set method for convex QPs with equality rows and
//! variable bounds. [`scp`] wraps it in a trust-region sequential
//! convexification for the bilinear step dynamics `z^k = σ^k z^{k−1} − u^k`.

pub mod feasible;
pub mod qp;
pub mod scp;

pub use feasible::feasible_sigmas;
pub use qp::{solve_elastic, solve_qp, solve_qp_from, ElasticSolution, QpError, QpProblem, QpSolution};
pub use scp::{
    single_step_qp, solve_bilinear, solve_single_step, BilinearSolution, MpcInstance, ScpError, ScpSettings, ScpStatus, StageSpec,
    StageValue,
};
