//! Reference solvers written without the crate's QP core.
//!
//! Both work on a least-squares objective `Σ w_i (r_i·v − t_i)²` over a few
//! free variables `v` with two-sided bounds `lo_j ≤ a_j·v ≤ hi_j`, solved by
//! enumerating every active set of size at most `dim(v)`. For a strictly
//! convex objective the best primal-feasible face minimizer is the optimum.

#![allow(dead_code)]

use dcm_step_core::alip::nominal_initial_dcm;
use dcm_step_core::planner::Foothold;
use dcm_step_core::rng::ScenarioRng;
use dcm_step_core::solver::MpcInstance;
use dcm_step_core::{DcmVec, GaitLimits, ModelParams, PlannerInput, SwingSide};

const FEAS_TOL: f64 = 1e-9;

/// Row `a·v` with two-sided bounds.
pub struct Bound {
    pub a: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

/// Cost term `w (r·v − t)²`.
pub struct Term {
    pub r: Vec<f64>,
    pub w: f64,
    pub t: f64,
}

/// Solve `m x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c].abs() < 1e-14 {
            return None;
        }
        m.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / m[r][r];
    }
    Some(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn objective(terms: &[Term], v: &[f64]) -> f64 {
    terms.iter().map(|t| t.w * (dot(&t.r, v) - t.t).powi(2)).sum()
}

/// Minimizer of the terms subject to `a_j·v = b_j` for the chosen rows.
fn face_minimizer(terms: &[Term], dim: usize, active: &[(usize, f64)], bounds: &[Bound]) -> Option<Vec<f64>> {
    let m = active.len();
    let n = dim + m;
    let mut k = vec![vec![0.0; n]; n];
    let mut rhs = vec![0.0; n];
    for t in terms {
        for i in 0..dim {
            rhs[i] += 2.0 * t.w * t.t * t.r[i];
            for j in 0..dim {
                k[i][j] += 2.0 * t.w * t.r[i] * t.r[j];
            }
        }
    }
    for (e, &(row, val)) in active.iter().enumerate() {
        for i in 0..dim {
            k[dim + e][i] = bounds[row].a[i];
            k[i][dim + e] = bounds[row].a[i];
        }
        rhs[dim + e] = val;
    }
    gauss_solve(k, rhs).map(|x| x[..dim].to_vec())
}

fn feasible(bounds: &[Bound], v: &[f64]) -> bool {
    bounds.iter().all(|b| {
        let s = dot(&b.a, v);
        s >= b.lo - FEAS_TOL && s <= b.hi + FEAS_TOL
    })
}

/// Global minimizer by active-set enumeration, or `None` if infeasible.
pub fn box_qp(terms: &[Term], dim: usize, bounds: &[Bound]) -> Option<(f64, Vec<f64>)> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut active = Vec::with_capacity(dim);
    enumerate(terms, dim, bounds, 0, &mut active, &mut best);
    best
}

fn enumerate(
    terms: &[Term],
    dim: usize,
    bounds: &[Bound],
    from: usize,
    active: &mut Vec<(usize, f64)>,
    best: &mut Option<(f64, Vec<f64>)>,
) {
    if let Some(v) = face_minimizer(terms, dim, active, bounds) {
        if feasible(bounds, &v) {
            let f = objective(terms, &v);
            if best.as_ref().is_none_or(|(b, _)| f < *b) {
                *best = Some((f, v));
            }
        }
    }
    if active.len() == dim {
        return;
    }
    for row in from..bounds.len() {
        for val in [bounds[row].lo, bounds[row].hi] {
            active.push((row, val));
            enumerate(terms, dim, bounds, row + 1, active, best);
            active.pop();
        }
    }
}

/// Dense KKT oracle for a one-step instance.
///
/// Eliminates `z = σ z0 − u` and returns `(cost, [z_x, z_y, σ, u_x, u_y])`.
pub fn single_step(inst: &MpcInstance) -> Option<(f64, [f64; 5])> {
    assert_eq!(inst.horizon(), 1);
    let s = &inst.stages[0];
    let z0 = inst.z0;
    // Variables v = (σ, u_x, u_y).
    let rows = [
        vec![z0.x, -1.0, 0.0],
        vec![z0.y, 0.0, -1.0],
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
    ];
    let targets = [s.z_des.x, s.z_des.y, s.sigma_des, s.u_des.x, s.u_des.y];
    let lo = [s.z_lo.x, s.z_lo.y, s.sigma_lo, s.p_lo.x, s.p_lo.y];
    let hi = [s.z_hi.x, s.z_hi.y, s.sigma_hi, s.p_hi.x, s.p_hi.y];
    let terms: Vec<Term> = (0..5)
        .map(|i| Term {
            r: rows[i].clone(),
            w: s.weights[i],
            t: targets[i],
        })
        .collect();
    let bounds: Vec<Bound> = (0..5)
        .map(|i| Bound {
            a: rows[i].clone(),
            lo: lo[i],
            hi: hi[i],
        })
        .collect();
    let (cost, v) = box_qp(&terms, 3, &bounds)?;
    let z = [z0.x * v[0] - v[1], z0.y * v[0] - v[2]];
    Some((cost, [z[0], z[1], v[0], v[1], v[2]]))
}

/// Two-variable version of [`box_qp`] on fixed-size arrays, for the grid
/// oracle's inner loop. Same enumeration: the free minimizer, the minimizer
/// on each bound line and every vertex of two bound lines.
pub fn box_qp2(terms: &[([f64; 2], f64, f64)], bounds: &[([f64; 2], f64, f64)]) -> Option<f64> {
    let (mut h, mut g) = ([[0.0; 2]; 2], [0.0; 2]);
    for &(r, w, t) in terms {
        for i in 0..2 {
            g[i] += 2.0 * w * t * r[i];
            for j in 0..2 {
                h[i][j] += 2.0 * w * r[i] * r[j];
            }
        }
    }
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let hinv = |b: [f64; 2]| [(h[1][1] * b[0] - h[0][1] * b[1]) / det, (h[0][0] * b[1] - h[1][0] * b[0]) / det];
    let eval = |v: [f64; 2]| -> f64 {
        terms.iter().map(|&(r, w, t)| w * (r[0] * v[0] + r[1] * v[1] - t).powi(2)).sum()
    };
    let ok = |v: [f64; 2]| {
        bounds.iter().all(|&(a, lo, hi)| {
            let s = a[0] * v[0] + a[1] * v[1];
            s >= lo - FEAS_TOL && s <= hi + FEAS_TOL
        })
    };
    let mut best = f64::INFINITY;
    let mut consider = |v: [f64; 2]| {
        if v[0].is_finite() && v[1].is_finite() && ok(v) {
            best = best.min(eval(v));
        }
    };
    let free = hinv(g);
    consider(free);
    for &(a, lo, hi) in bounds {
        let ha = hinv(a);
        let aha = a[0] * ha[0] + a[1] * ha[1];
        let afree = a[0] * free[0] + a[1] * free[1];
        for c in [lo, hi] {
            let mu = (c - afree) / aha;
            consider([free[0] + mu * ha[0], free[1] + mu * ha[1]]);
        }
    }
    for i in 0..bounds.len() {
        for j in i + 1..bounds.len() {
            let (a, b) = (bounds[i].0, bounds[j].0);
            let d = a[0] * b[1] - a[1] * b[0];
            if d.abs() < 1e-14 {
                continue;
            }
            for ca in [bounds[i].1, bounds[i].2] {
                for cb in [bounds[j].1, bounds[j].2] {
                    consider([(ca * b[1] - a[1] * cb) / d, (a[0] * cb - b[0] * ca) / d]);
                }
            }
        }
    }
    best.is_finite().then_some(best)
}

/// Optimal cost of one axis of a two-step instance with `σ` fixed.
///
/// Free variables are the footholds `(q1, q2)`; `u2 = q2 − q1`.
fn two_step_axis(inst: &MpcInstance, axis: usize, s1: f64, s2: f64) -> Option<f64> {
    let (a, b) = (&inst.stages[0], &inst.stages[1]);
    let pick = |v: DcmVec| if axis == 0 { v.x } else { v.y };
    let z0 = pick(inst.z0);
    let (wz, wu) = (axis, 3 + axis);
    // z1 = s1 z0 − q1, z2 = s2 z1 − q2 + q1 = s1 s2 z0 + (1 − s2) q1 − q2.
    let c1 = s1 * z0;
    let c2 = s1 * s2 * z0;
    let z1 = [-1.0, 0.0];
    let z2 = [1.0 - s2, -1.0];
    let terms = [
        (z1, a.weights[wz], pick(a.z_des) - c1),
        (z2, b.weights[wz], pick(b.z_des) - c2),
        ([1.0, 0.0], a.weights[wu], pick(a.u_des)),
        ([-1.0, 1.0], b.weights[wu], pick(b.u_des)),
    ];
    let bounds = [
        (z1, pick(a.z_lo) - c1, pick(a.z_hi) - c1),
        (z2, pick(b.z_lo) - c2, pick(b.z_hi) - c2),
        ([1.0, 0.0], pick(a.p_lo), pick(a.p_hi)),
        ([0.0, 1.0], pick(b.p_lo), pick(b.p_hi)),
    ];
    box_qp2(&terms, &bounds)
}

/// Best cost of a two-step instance over a grid of step durations with
/// spacing `dt`, each grid point solved exactly. `None` if no grid point is
/// feasible. Returns `(cost, T1, T2)`.
pub fn two_step_grid(inst: &MpcInstance, lambda: f64, dt: f64) -> Option<(f64, f64, f64)> {
    assert_eq!(inst.horizon(), 2);
    let durations = |lo: f64, hi: f64| {
        let (t_lo, t_hi) = (lo.ln() / lambda, hi.ln() / lambda);
        let n = ((t_hi - t_lo) / dt).floor() as usize;
        let mut v: Vec<f64> = (0..=n).map(|i| t_lo + dt * i as f64).collect();
        if t_hi - v[n] > 1e-12 {
            v.push(t_hi);
        }
        v
    };
    let (a, b) = (&inst.stages[0], &inst.stages[1]);
    let mut best: Option<(f64, f64, f64)> = None;
    for &t1 in &durations(a.sigma_lo, a.sigma_hi) {
        let s1 = (lambda * t1).exp().clamp(a.sigma_lo, a.sigma_hi);
        for &t2 in &durations(b.sigma_lo, b.sigma_hi) {
            let s2 = (lambda * t2).exp().clamp(b.sigma_lo, b.sigma_hi);
            let sig = a.weights[2] * (s1 - a.sigma_des).powi(2) + b.weights[2] * (s2 - b.sigma_des).powi(2);
            if best.as_ref().is_some_and(|(c, _, _)| sig >= *c) {
                continue;
            }
            let Some(cx) = two_step_axis(inst, 0, s1, s2) else { continue };
            let Some(cy) = two_step_axis(inst, 1, s1, s2) else { continue };
            let c = sig + cx + cy;
            if best.as_ref().is_none_or(|(b, _, _)| c < *b) {
                best = Some((c, t1, t2));
            }
        }
    }
    best
}

/// Largest weight of the instance, the solver's cost normalization.
pub fn cost_scale(inst: &MpcInstance) -> f64 {
    inst.stages
        .iter()
        .flat_map(|s| s.weights.iter().copied())
        .fold(0.0, f64::max)
}

/// Planner input a few ticks into a step on random stones.
///
/// Stones use the random-profile ranges; the measured DCM is the nominal one
/// for the first stone plus a perturbation, propagated to `t_elapsed`.
pub fn random_input(rng: &mut ScenarioRng, stones: usize, p: &ModelParams) -> PlannerInput {
    let limits = GaitLimits::default();
    let side = if rng.unit() < 0.5 { SwingSide::Left } else { SwingSide::Right };
    let mut prev = [0.0, 0.0];
    let mut upcoming = Vec::with_capacity(stones);
    let mut first = (0.0, 0.0);
    for k in 0..stones {
        let l = rng.uniform(0.0, 0.5);
        let w = rng.uniform(-0.15, 0.15);
        if k == 0 {
            first = (l, w);
        }
        let center = [prev[0] + l, prev[1] + limits.width(side.after(k)) + w];
        upcoming.push(Foothold {
            center,
            half_extent: [0.1, 0.05],
        });
        prev = center;
    }
    let z = nominal_initial_dcm(first.0, first.1, 0.5, side, p, &limits);
    let z = DcmVec::new(z.x + rng.uniform(-0.05, 0.05), z.y + rng.uniform(-0.03, 0.03));
    let t_elapsed = rng.uniform(0.0, 0.3);
    PlannerInput {
        xi_measured: z * (p.lambda() * t_elapsed).exp(),
        t_elapsed,
        contact_world: [0.0, 0.0],
        swing_side: side,
        upcoming,
        previous_solution: None,
    }
}
