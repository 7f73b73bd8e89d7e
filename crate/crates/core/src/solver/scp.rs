//! Trust-region sequential convexification for the bilinear footstep MPC.
//!
//! Decision variables per horizon step `k` are `(z^k, σ^k, u^k)`, coupled by
//! `z^k = σ^k z^{k−1} − u^k` with `z^0` given. Foothold boxes apply to the
//! position `q^k = u^1 + … + u^k` relative to the current contact, so the
//! solver works in `(z^k, σ^k, q^k)`, where the boxes are simple. Each outer iteration linearizes
//! the product `σ^k z^{k−1}` about the current iterate and solves an ℓ1-elastic
//! QP restricted to an ∞-norm trust region. Steps are accepted on decrease of
//! the exact-penalty merit `f + μ‖c‖₁`. A converged iterate is polished by
//! fixing `σ` and solving the then-linear problem exactly. If the iterations
//! stall at an infeasible point, a feasible timing is searched on a `σ` grid
//! and the iterations restart from there.
//!
//! Internally `σ` is divided by `sigma_scale` so that all variables move on a
//! comparable scale inside the trust region, and the cost is divided by its
//! largest weight.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::feasible::feasible_sigmas;
use super::qp::{solve_elastic, solve_qp_from, QpError, QpProblem};
use crate::alip::DcmVec;

const VARS: usize = 5;
const ACCEPT_RATIO: f64 = 0.1;
const GOOD_RATIO: f64 = 0.75;
const POOR_RATIO: f64 = 0.25;
const MAX_RADIUS: f64 = 10.0;
/// `σ` values per stage tried by the feasibility search.
const SIGMA_GRID: usize = 24;

/// One horizon step of the MPC: targets, weights and hard boxes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub z_des: DcmVec,
    pub sigma_des: f64,
    pub u_des: DcmVec,
    pub z_lo: DcmVec,
    pub z_hi: DcmVec,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    /// Box on the foothold `u^1 + … + u^k`, relative to the current contact.
    pub p_lo: DcmVec,
    pub p_hi: DcmVec,
    /// Weights on `(z_x, z_y, σ, u_x, u_y)`, already scaled by the stage decay.
    pub weights: [f64; 5],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageValue {
    pub z: DcmVec,
    pub sigma: f64,
    pub u: DcmVec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcInstance {
    pub z0: DcmVec,
    /// Nominal `σ`, used for variable scaling.
    pub sigma_scale: f64,
    pub stages: Vec<StageSpec>,
}

impl MpcInstance {
    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    /// Weighted squared deviation from the targets.
    pub fn cost(&self, vals: &[StageValue]) -> f64 {
        self.stages
            .iter()
            .zip(vals)
            .map(|(s, v)| {
                let d = [
                    v.z.x - s.z_des.x,
                    v.z.y - s.z_des.y,
                    v.sigma - s.sigma_des,
                    v.u.x - s.u_des.x,
                    v.u.y - s.u_des.y,
                ];
                d.iter().zip(s.weights.iter()).map(|(d, w)| w * d * d).sum::<f64>()
            })
            .sum()
    }

    /// `max_k |z^k − (σ^k z^{k−1} − u^k)|`.
    pub fn dynamics_residual(&self, vals: &[StageValue]) -> f64 {
        let mut prev = self.z0;
        let mut worst = 0.0f64;
        for v in vals {
            worst = worst
                .max((v.z.x - (v.sigma * prev.x - v.u.x)).abs())
                .max((v.z.y - (v.sigma * prev.y - v.u.y)).abs());
            prev = v.z;
        }
        worst
    }

    /// Largest box violation over all stages (0 when inside).
    pub fn bound_violation(&self, vals: &[StageValue]) -> f64 {
        let out = |v: f64, lo: f64, hi: f64| (lo - v).max(v - hi).max(0.0);
        let mut q = DcmVec::ZERO;
        self.stages
            .iter()
            .zip(vals)
            .map(|(s, v)| {
                q = q + v.u;
                out(v.z.x, s.z_lo.x, s.z_hi.x)
                    .max(out(v.z.y, s.z_lo.y, s.z_hi.y))
                    .max(out(v.sigma, s.sigma_lo, s.sigma_hi))
                    .max(out(q.x, s.p_lo.x, s.p_hi.x))
                    .max(out(q.y, s.p_lo.y, s.p_hi.y))
            })
            .fold(0.0, f64::max)
    }

    pub fn desired(&self) -> Vec<StageValue> {
        self.stages
            .iter()
            .map(|s| StageValue {
                z: s.z_des,
                sigma: s.sigma_des,
                u: s.u_des,
            })
            .collect()
    }

    fn cost_scale(&self) -> f64 {
        let m = self
            .stages
            .iter()
            .flat_map(|s| s.weights.iter().copied())
            .fold(0.0f64, f64::max);
        if m > 0.0 {
            m
        } else {
            1.0
        }
    }

    fn pack(&self, vals: &[StageValue]) -> DVector<f64> {
        let mut x = DVector::zeros(VARS * self.horizon());
        let mut q = DcmVec::ZERO;
        for (k, v) in vals.iter().enumerate().take(self.horizon()) {
            let o = VARS * k;
            q = q + v.u;
            x[o] = v.z.x;
            x[o + 1] = v.z.y;
            x[o + 2] = v.sigma / self.sigma_scale;
            x[o + 3] = q.x;
            x[o + 4] = q.y;
        }
        x
    }

    fn unpack(&self, x: &DVector<f64>) -> Vec<StageValue> {
        let mut q = DcmVec::ZERO;
        (0..self.horizon())
            .map(|k| {
                let o = VARS * k;
                let next = DcmVec::new(x[o + 3], x[o + 4]);
                let u = next - q;
                q = next;
                StageValue {
                    z: DcmVec::new(x[o], x[o + 1]),
                    sigma: x[o + 2] * self.sigma_scale,
                    u,
                }
            })
            .collect()
    }

    fn boxes(&self) -> (DVector<f64>, DVector<f64>) {
        let n = VARS * self.horizon();
        let mut lo = DVector::zeros(n);
        let mut hi = DVector::zeros(n);
        for (k, s) in self.stages.iter().enumerate() {
            let o = VARS * k;
            let l = [s.z_lo.x, s.z_lo.y, s.sigma_lo / self.sigma_scale, s.p_lo.x, s.p_lo.y];
            let h = [s.z_hi.x, s.z_hi.y, s.sigma_hi / self.sigma_scale, s.p_hi.x, s.p_hi.y];
            for j in 0..VARS {
                lo[o + j] = l[j];
                hi[o + j] = h[j];
            }
        }
        (lo, hi)
    }

    /// Clamp values into the boxes.
    pub fn project(&self, vals: &[StageValue]) -> Vec<StageValue> {
        let (lo, hi) = self.boxes();
        let x = self.pack(vals);
        let x = DVector::from_iterator(x.len(), (0..x.len()).map(|i| x[i].max(lo[i]).min(hi[i])));
        self.unpack(&x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScpSettings {
    pub max_outer_iters: usize,
    /// Initial ∞-norm trust radius in scaled variables.
    pub trust_region_init: f64,
    pub trust_shrink: f64,
    pub trust_expand: f64,
    pub feasibility_tol: f64,
    pub cost_tol: f64,
    /// ℓ1 penalty on the dynamics residual, in normalized cost units.
    pub penalty: f64,
    /// Final dynamics residual above which the instance is reported infeasible.
    pub restoration_tol: f64,
}

impl Default for ScpSettings {
    fn default() -> Self {
        Self {
            max_outer_iters: 30,
            trust_region_init: 0.2,
            trust_shrink: 0.5,
            trust_expand: 1.5,
            feasibility_tol: 1e-6,
            cost_tol: 1e-8,
            penalty: 100.0,
            restoration_tol: 1e-3,
        }
    }
}

impl ScpSettings {
    pub fn is_valid(&self) -> bool {
        self.max_outer_iters > 0
            && self.trust_region_init > 0.0
            && self.feasibility_tol > 0.0
            && self.cost_tol > 0.0
            && self.penalty > 0.0
            && self.restoration_tol > 0.0
            && self.trust_shrink > 0.0
            && self.trust_shrink < 1.0
            && self.trust_expand > 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScpStatus {
    Solved,
    /// Iteration budget exhausted; the best iterate is returned.
    Degraded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilinearSolution {
    pub stages: Vec<StageValue>,
    pub cost: f64,
    pub residual: f64,
    pub iterations: usize,
    pub status: ScpStatus,
    /// Merit after each accepted step, starting with the initial point.
    pub merit_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ScpError {
    #[error("no point satisfies the step dynamics within the bounds (residual {residual:.3e})")]
    Infeasible { residual: f64 },
    #[error("invalid solver settings")]
    Settings,
    #[error(transparent)]
    Qp(#[from] QpError),
}

struct Model<'a> {
    inst: &'a MpcInstance,
    hessian: DMatrix<f64>,
    linear: DVector<f64>,
    constant: f64,
    lo: DVector<f64>,
    hi: DVector<f64>,
}

impl<'a> Model<'a> {
    fn new(inst: &'a MpcInstance) -> Self {
        let n = VARS * inst.horizon();
        let cs = inst.cost_scale();
        let mut hessian = DMatrix::zeros(n, n);
        let mut linear = DVector::zeros(n);
        let mut constant = 0.0;
        for (k, s) in inst.stages.iter().enumerate() {
            let sc = inst.sigma_scale;
            let target = [s.z_des.x, s.z_des.y, s.sigma_des / sc, s.u_des.x, s.u_des.y];
            let w = [
                s.weights[0],
                s.weights[1],
                s.weights[2] * sc * sc,
                s.weights[3],
                s.weights[4],
            ];
            for j in 0..VARS {
                let wj = w[j] / cs;
                let i = VARS * k + j;
                hessian[(i, i)] += 2.0 * wj;
                linear[i] -= 2.0 * wj * target[j];
                constant += wj * target[j] * target[j];
                if j >= 3 && k > 0 {
                    // The step is q^k − q^{k−1}.
                    let b = i - VARS;
                    hessian[(b, b)] += 2.0 * wj;
                    hessian[(i, b)] -= 2.0 * wj;
                    hessian[(b, i)] -= 2.0 * wj;
                    linear[b] += 2.0 * wj * target[j];
                }
            }
        }
        let (lo, hi) = inst.boxes();
        Self {
            inst,
            hessian,
            linear,
            constant,
            lo,
            hi,
        }
    }

    fn n(&self) -> usize {
        self.linear.len()
    }

    fn f(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear.dot(x) + self.constant
    }

    fn prev_q(&self, x: &DVector<f64>, k: usize, i: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            x[VARS * (k - 1) + 3 + i]
        }
    }

    fn prev_z(&self, x: &DVector<f64>, k: usize, i: usize) -> f64 {
        if k == 0 {
            if i == 0 {
                self.inst.z0.x
            } else {
                self.inst.z0.y
            }
        } else {
            x[VARS * (k - 1) + i]
        }
    }

    fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        let sc = self.inst.sigma_scale;
        let h = self.inst.horizon();
        DVector::from_iterator(
            2 * h,
            (0..h).flat_map(|k| {
                let o = VARS * k;
                (0..2).map(move |i| {
                    sc * x[o + 2] * self.prev_z(x, k, i) - x[o + 3 + i] + self.prev_q(x, k, i) - x[o + i]
                })
            }),
        )
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let sc = self.inst.sigma_scale;
        let h = self.inst.horizon();
        let mut j = DMatrix::zeros(2 * h, self.n());
        for k in 0..h {
            let o = VARS * k;
            for i in 0..2 {
                let r = 2 * k + i;
                j[(r, o + i)] = -1.0;
                j[(r, o + 3 + i)] = -1.0;
                j[(r, o + 2)] = sc * self.prev_z(x, k, i);
                if k > 0 {
                    j[(r, VARS * (k - 1) + i)] = sc * x[o + 2];
                    j[(r, VARS * (k - 1) + 3 + i)] = 1.0;
                }
            }
        }
        j
    }

    /// Linearized-dynamics QP about `x`, boxed to `radius` (no trust region if `None`).
    fn subproblem(&self, x: &DVector<f64>, radius: Option<f64>) -> QpProblem {
        let n = self.n();
        let jac = self.jacobian(x);
        let rhs = &jac * x - self.residual(x);
        let mut lower = self.lo.clone();
        let mut upper = self.hi.clone();
        if let Some(r) = radius {
            for i in 0..n {
                lower[i] = lower[i].max(x[i] - r);
                upper[i] = upper[i].min(x[i] + r);
            }
        }
        QpProblem {
            hessian: self.hessian.clone(),
            linear: self.linear.clone(),
            eq_matrix: jac,
            eq_rhs: rhs,
            lower,
            upper,
        }
    }

    fn merit(&self, x: &DVector<f64>, penalty: f64) -> f64 {
        self.f(x) + penalty * self.residual(x).iter().map(|v| v.abs()).sum::<f64>()
    }

    fn clamp(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.n(), (0..self.n()).map(|i| x[i].max(self.lo[i]).min(self.hi[i])))
    }
}

struct Phase {
    x: DVector<f64>,
    converged: bool,
    iterations: usize,
}

fn trust_region_loop(
    model: &Model,
    mut x: DVector<f64>,
    settings: &ScpSettings,
    penalty: f64,
    budget: usize,
    history: &mut Vec<f64>,
) -> Result<Phase, ScpError> {
    let mut radius = settings.trust_region_init;
    let mut phi = model.merit(&x, penalty);
    history.push(phi);
    let mut iterations = 0;
    while iterations < budget {
        iterations += 1;
        let qp = model.subproblem(&x, Some(radius));
        let sub = solve_elastic(&qp, penalty, Some(&x))?;
        let predicted = phi - (model.f(&sub.x) + penalty * sub.slack.sum());
        let feasible = model.residual(&x).amax() <= settings.feasibility_tol;
        if predicted <= 1e-13 * (1.0 + phi.abs()) {
            // Model cannot improve: first-order stationary for the merit.
            return Ok(Phase {
                x,
                converged: feasible,
                iterations,
            });
        }
        let phi_new = model.merit(&sub.x, penalty);
        let ratio = (phi - phi_new) / predicted;
        let step = (&sub.x - &x).amax();
        if ratio >= ACCEPT_RATIO {
            let f_old = model.f(&x);
            x = sub.x;
            phi = phi_new;
            history.push(phi);
            if ratio > GOOD_RATIO && step >= 0.99 * radius {
                radius = (radius * settings.trust_expand).min(MAX_RADIUS);
            } else if ratio < POOR_RATIO {
                radius *= settings.trust_shrink;
            }
            let f_new = model.f(&x);
            let res = model.residual(&x).amax();
            if res <= settings.feasibility_tol
                && (f_new - f_old).abs() <= settings.cost_tol * (1.0 + f_old.abs())
            {
                return Ok(Phase {
                    x,
                    converged: true,
                    iterations,
                });
            }
        } else {
            radius = settings.trust_shrink * radius.min(step);
        }
        if radius < 1e-12 {
            break;
        }
    }
    Ok(Phase {
        x,
        converged: false,
        iterations,
    })
}

/// Fix `σ` and solve the remaining (linear) problem exactly.
fn polish(model: &Model, x: &DVector<f64>) -> Option<DVector<f64>> {
    let mut qp = model.subproblem(x, None);
    for k in 0..model.inst.horizon() {
        let i = VARS * k + 2;
        qp.lower[i] = x[i];
        qp.upper[i] = x[i];
    }
    solve_qp_from(&qp, Some(x)).ok().map(|s| s.x)
}

/// One-step instance as a plain convex QP.
///
/// With a single step `z^0` is data, so `σ^1 z^0` is linear and the problem
/// needs no convexification.
pub fn single_step_qp(inst: &MpcInstance) -> QpProblem {
    assert_eq!(inst.horizon(), 1, "single_step_qp needs a one-step instance");
    let model = Model::new(inst);
    let x = model.clamp(&inst.pack(&inst.desired()));
    model.subproblem(&x, None)
}

/// Solve a one-step instance directly with the QP core.
pub fn solve_single_step(
    inst: &MpcInstance,
    warm_start: Option<&[StageValue]>,
) -> Result<BilinearSolution, ScpError> {
    let qp = single_step_qp(inst);
    let start = warm_start.map(|ws| inst.pack(ws));
    let sol = solve_qp_from(&qp, start.as_ref()).map_err(|e| match e {
        QpError::QpInfeasible => ScpError::Infeasible {
            residual: f64::INFINITY,
        },
        other => ScpError::Qp(other),
    })?;
    let stages = inst.unpack(&sol.x);
    Ok(BilinearSolution {
        cost: inst.cost(&stages),
        residual: inst.dynamics_residual(&stages),
        stages,
        iterations: sol.iterations,
        status: ScpStatus::Solved,
        merit_history: Vec::new(),
    })
}

/// Solve the bilinear MPC instance from `warm_start` (projected onto the
/// boxes; missing stages fall back to the targets).
pub fn solve_bilinear(
    inst: &MpcInstance,
    warm_start: Option<&[StageValue]>,
    settings: &ScpSettings,
) -> Result<BilinearSolution, ScpError> {
    if !settings.is_valid() {
        return Err(ScpError::Settings);
    }
    let model = Model::new(inst);
    let mut start = inst.desired();
    if let Some(ws) = warm_start {
        for (dst, src) in start.iter_mut().zip(ws) {
            *dst = *src;
        }
    }
    let x0 = model.clamp(&inst.pack(&start));

    let mut history = Vec::new();
    let mut penalty = settings.penalty;
    let mut phase = trust_region_loop(&model, x0, settings, penalty, settings.max_outer_iters, &mut history)?;
    let mut iterations = phase.iterations;

    if model.residual(&phase.x).amax() > settings.feasibility_tol {
        // Local iterations stalled infeasible: look for feasible timing globally.
        let stalled = inst.unpack(&phase.x);
        let preferred: Vec<f64> = stalled.iter().map(|s| s.sigma).collect();
        let Some(sigmas) = feasible_sigmas(inst, &preferred, SIGMA_GRID) else {
            return Err(ScpError::Infeasible {
                residual: inst.dynamics_residual(&stalled),
            });
        };
        let mut seed = phase.x.clone();
        for (k, sigma) in sigmas.iter().enumerate() {
            seed[VARS * k + 2] = sigma / inst.sigma_scale;
        }
        let restored = polish(&model, &seed).ok_or(ScpError::Infeasible {
            residual: inst.dynamics_residual(&stalled),
        })?;
        penalty *= 10.0;
        history.clear();
        let budget = settings.max_outer_iters.saturating_sub(iterations).max(1);
        phase = trust_region_loop(&model, restored, settings, penalty, budget, &mut history)?;
        iterations += phase.iterations;
    }

    let mut x = phase.x;
    let mut converged = phase.converged;
    if model.residual(&x).amax() <= settings.restoration_tol {
        if let Some(p) = polish(&model, &x) {
            x = p;
        }
    }
    let stages = inst.unpack(&x);
    let residual = inst.dynamics_residual(&stages);
    if residual > settings.feasibility_tol {
        if residual > settings.restoration_tol {
            return Err(ScpError::Infeasible { residual });
        }
        converged = false;
    }
    Ok(BilinearSolution {
        cost: inst.cost(&stages),
        stages,
        residual,
        iterations,
        status: if converged {
            ScpStatus::Solved
        } else {
            ScpStatus::Degraded
        },
        merit_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn stage(z_des: DcmVec, u_des: DcmVec, p: DcmVec, beta: f64) -> StageSpec {
        StageSpec {
            z_des,
            sigma_des: 5.0,
            u_des,
            z_lo: DcmVec::new(-1.0, -1.0),
            z_hi: DcmVec::new(1.0, 1.0),
            sigma_lo: 3.0,
            sigma_hi: 8.0,
            p_lo: p - DcmVec::new(0.1, 0.05),
            p_hi: p + DcmVec::new(0.1, 0.05),
            weights: [1e4 * beta, 2e4 * beta, beta, 1e4 * beta, 2e4 * beta],
        }
    }

    fn periodic(n: usize) -> MpcInstance {
        // z = u/(σ−1) is a fixed point of z' = σz − u.
        let u = DcmVec::new(0.4, 0.0);
        let z = u * (1.0 / 4.0);
        MpcInstance {
            z0: z,
            sigma_scale: 5.0,
            stages: (0..n)
                .map(|k| stage(z, u, u * (k + 1) as f64, vec![1e3, 1e2, 1e1, 1.0][k]))
                .collect(),
        }
    }

    #[test]
    fn nominal_warm_start_converges_immediately() {
        let inst = periodic(4);
        let sol = solve_bilinear(&inst, Some(&inst.desired()), &ScpSettings::default()).unwrap();
        assert_eq!(sol.status, ScpStatus::Solved);
        assert_eq!(sol.iterations, 1);
        assert!(sol.residual <= 1e-10);
        assert!(sol.cost <= 1e-12);
    }

    #[test]
    fn perturbed_start_solves_with_monotone_merit() {
        let mut inst = periodic(3);
        inst.z0.x += 0.02;
        inst.z0.y -= 0.01;
        let sol = solve_bilinear(&inst, None, &ScpSettings::default()).unwrap();
        assert_eq!(sol.status, ScpStatus::Solved);
        assert!(sol.residual <= 1e-6);
        assert!(inst.bound_violation(&sol.stages) == 0.0);
        for w in sol.merit_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn hopeless_start_is_infeasible() {
        let mut inst = periodic(2);
        inst.z0.x = 3.0;
        assert!(matches!(
            solve_bilinear(&inst, None, &ScpSettings::default()),
            Err(ScpError::Infeasible { .. })
        ));
    }

    #[test]
    fn bad_settings_rejected() {
        let s = ScpSettings {
            trust_shrink: 1.5,
            ..ScpSettings::default()
        };
        assert_eq!(solve_bilinear(&periodic(1), None, &s), Err(ScpError::Settings));
    }

    #[test]
    fn deterministic() {
        let mut inst = periodic(4);
        inst.z0.x -= 0.015;
        let a = solve_bilinear(&inst, None, &ScpSettings::default()).unwrap();
        let b = solve_bilinear(&inst, None, &ScpSettings::default()).unwrap();
        assert_eq!(a, b);
    }
}
