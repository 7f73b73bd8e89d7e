//! Dense primal active-set QP.
//!
//! Solves
//!
//! ```text
//!     minimize    ½ xᵀ H x + gᵀ x
//!     subject to  A x = b,  l ≤ x ≤ u
//! ```
//!
//! with `H` positive semidefinite. The working set holds variables fixed at a
//! bound. A feasible start is obtained by making every equality row elastic
//! (`A x − p + q = b`, `p, q ≥ 0`) with an ℓ1 penalty; [`solve_qp`] raises the
//! penalty until the slacks vanish, which recovers the constrained optimum
//! exactly, or reports infeasibility.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

/// Penalty growth between elastic re-solves.
const PENALTY_GROWTH: f64 = 1e3;
const PENALTY_ROUNDS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum QpError {
    #[error("problem dimensions are inconsistent")]
    Dimension,
    #[error("no point satisfies the equality rows within the bounds")]
    QpInfeasible,
    #[error("objective is unbounded along a free direction")]
    QpUnbounded,
    #[error("active-set iteration limit reached")]
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl QpProblem {
    /// Zero objective, no equality rows, unbounded variables.
    pub fn new(n: usize) -> Self {
        Self {
            hessian: DMatrix::zeros(n, n),
            linear: DVector::zeros(n),
            eq_matrix: DMatrix::zeros(0, n),
            eq_rhs: DVector::zeros(0),
            lower: DVector::from_element(n, f64::NEG_INFINITY),
            upper: DVector::from_element(n, f64::INFINITY),
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn n_eq(&self) -> usize {
        self.eq_rhs.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear.dot(x)
    }

    fn check(&self) -> Result<(), QpError> {
        let n = self.dim();
        let m = self.n_eq();
        let shapes = self.hessian.shape() == (n, n)
            && self.eq_matrix.shape() == (m, n)
            && self.lower.len() == n
            && self.upper.len() == n;
        if !shapes {
            return Err(QpError::Dimension);
        }
        if self.lower.iter().zip(self.upper.iter()).any(|(l, u)| l > u || l.is_nan() || u.is_nan()) {
            return Err(QpError::QpInfeasible);
        }
        Ok(())
    }

    fn clamp(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            x.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .map(|(&v, (&l, &u))| v.max(l).min(u)),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Multipliers with `H x + g + Aᵀ λ = ν`.
    pub eq_dual: DVector<f64>,
    /// Bound multipliers `ν`: `≥ 0` at a lower bound, `≤ 0` at an upper bound.
    pub bound_dual: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl QpSolution {
    /// `(‖Hx + g + Aᵀλ − ν‖∞, ‖Ax − b‖∞)`.
    pub fn kkt_residual(&self, prob: &QpProblem) -> (f64, f64) {
        let stat = &prob.hessian * &self.x + &prob.linear + prob.eq_matrix.transpose() * &self.eq_dual
            - &self.bound_dual;
        let prim = &prob.eq_matrix * &self.x - &prob.eq_rhs;
        (stat.amax(), if prim.is_empty() { 0.0 } else { prim.amax() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElasticSolution {
    pub x: DVector<f64>,
    /// `|A x − b|` per row, as carried by the slacks.
    pub slack: DVector<f64>,
    pub eq_dual: DVector<f64>,
    /// Objective plus the ℓ1 penalty on the slacks.
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Free,
    Lower,
    Upper,
    Fixed,
}

struct Engine<'a> {
    h: &'a DMatrix<f64>,
    g: &'a DVector<f64>,
    a: &'a DMatrix<f64>,
    lo: &'a DVector<f64>,
    hi: &'a DVector<f64>,
}

struct EngineOut {
    lambda: DVector<f64>,
    iterations: usize,
}

impl Engine<'_> {
    /// Primal active set from a feasible `x`.
    fn run(&self, x: &mut DVector<f64>) -> Result<EngineOut, QpError> {
        let n = x.len();
        let m = self.a.nrows();
        let mut state: Vec<Bound> = (0..n)
            .map(|i| {
                if self.lo[i] == self.hi[i] {
                    x[i] = self.lo[i];
                    Bound::Fixed
                } else if x[i] <= self.lo[i] {
                    Bound::Lower
                } else if x[i] >= self.hi[i] {
                    Bound::Upper
                } else {
                    Bound::Free
                }
            })
            .collect();

        let hscale = 1.0 + self.h.diagonal().amax();
        let dual_tol = 1e-10 * hscale;
        let max_iter = 50 * (n + m) + 100;

        for iter in 1..=max_iter {
            let free: Vec<usize> = (0..n).filter(|&i| state[i] == Bound::Free).collect();
            let grad = self.h * &*x + self.g;
            let (step, lambda) = self.eqp(&free, &grad, hscale)?;

            let xscale = 1.0 + x.amax();
            let step_norm = step.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if step_norm <= 1e-13 * xscale {
                let nu = &grad + self.a.transpose() * &lambda;
                let mut worst: Option<(usize, f64)> = None;
                for i in 0..n {
                    let viol = match state[i] {
                        Bound::Lower => -nu[i],
                        Bound::Upper => nu[i],
                        _ => continue,
                    };
                    if viol > dual_tol && worst.is_none_or(|(_, w)| viol > w) {
                        worst = Some((i, viol));
                    }
                }
                match worst {
                    Some((i, _)) => state[i] = Bound::Free,
                    None => {
                        return Ok(EngineOut {
                            lambda,
                            iterations: iter,
                        });
                    }
                }
                continue;
            }

            let mut alpha = 1.0;
            let mut blocking = None;
            for (k, &i) in free.iter().enumerate() {
                let p = step[k];
                if p < 0.0 && self.lo[i].is_finite() {
                    let t = (self.lo[i] - x[i]) / p;
                    if t < alpha {
                        alpha = t.max(0.0);
                        blocking = Some((i, Bound::Lower));
                    }
                } else if p > 0.0 && self.hi[i].is_finite() {
                    let t = (self.hi[i] - x[i]) / p;
                    if t < alpha {
                        alpha = t.max(0.0);
                        blocking = Some((i, Bound::Upper));
                    }
                }
            }
            for (k, &i) in free.iter().enumerate() {
                x[i] += alpha * step[k];
            }
            if let Some((i, b)) = blocking {
                x[i] = if b == Bound::Lower { self.lo[i] } else { self.hi[i] };
                state[i] = b;
            }
        }
        Err(QpError::IterationLimit)
    }

    /// Equality-constrained step on the free variables and the row multipliers.
    fn eqp(
        &self,
        free: &[usize],
        grad: &DVector<f64>,
        hscale: f64,
    ) -> Result<(Vec<f64>, DVector<f64>), QpError> {
        let nf = free.len();
        // Rows that touch no free variable are unaffected by the step.
        let rows: Vec<usize> = (0..self.a.nrows())
            .filter(|&r| free.iter().any(|&c| self.a[(r, c)] != 0.0))
            .collect();
        let mr = rows.len();
        let dim = nf + mr;
        let mut lambda = DVector::zeros(self.a.nrows());
        if dim == 0 {
            return Ok((Vec::new(), lambda));
        }
        let mut kkt = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        for (i, &fi) in free.iter().enumerate() {
            for (j, &fj) in free.iter().enumerate() {
                kkt[(i, j)] = self.h[(fi, fj)];
            }
            rhs[i] = -grad[fi];
        }
        for (r, &row) in rows.iter().enumerate() {
            for (j, &fj) in free.iter().enumerate() {
                let v = self.a[(row, fj)];
                kkt[(nf + r, j)] = v;
                kkt[(j, nf + r)] = v;
            }
        }

        let mut sol = kkt.clone().lu().solve(&rhs);
        let bad = |s: &Option<DVector<f64>>| match s {
            None => true,
            Some(v) => v.iter().any(|x| !x.is_finite()),
        };
        if bad(&sol) {
            // Dependent rows: regularize the constraint block.
            for r in 0..mr {
                kkt[(nf + r, nf + r)] = -1e-12 * hscale;
            }
            sol = kkt.lu().solve(&rhs);
        }
        let sol = match sol {
            Some(s) if !bad(&Some(s.clone())) => s,
            _ => return Err(QpError::QpUnbounded),
        };
        for (r, &row) in rows.iter().enumerate() {
            lambda[row] = sol[nf + r];
        }
        Ok((sol.rows(0, nf).iter().copied().collect(), lambda))
    }
}

/// Minimize `½xᵀHx + gᵀx + penalty·‖Ax − b‖₁` over the bounds.
///
/// Always feasible. The solve starts from `x0` (clamped) or the origin
/// (clamped), so a good warm start shortens the active-set walk.
pub fn solve_elastic(
    prob: &QpProblem,
    penalty: f64,
    x0: Option<&DVector<f64>>,
) -> Result<ElasticSolution, QpError> {
    prob.check()?;
    let n = prob.dim();
    let m = prob.n_eq();
    let big = n + 2 * m;
    let hdiag = 1.0 + prob.hessian.diagonal().amax();

    let mut h = DMatrix::zeros(big, big);
    h.view_mut((0, 0), (n, n)).copy_from(&prob.hessian);
    for i in 0..n {
        h[(i, i)] += 1e-14 * hdiag;
    }
    for i in n..big {
        h[(i, i)] = 1e-10 * hdiag;
    }
    let mut g = DVector::from_element(big, penalty);
    g.rows_mut(0, n).copy_from(&prob.linear);

    let mut a = DMatrix::zeros(m, big);
    a.view_mut((0, 0), (m, n)).copy_from(&prob.eq_matrix);
    for r in 0..m {
        a[(r, n + r)] = -1.0;
        a[(r, n + m + r)] = 1.0;
    }
    let mut lo = DVector::zeros(big);
    let mut hi = DVector::from_element(big, f64::INFINITY);
    lo.rows_mut(0, n).copy_from(&prob.lower);
    hi.rows_mut(0, n).copy_from(&prob.upper);

    let start = prob.clamp(&x0.cloned().unwrap_or_else(|| DVector::zeros(n)));
    let resid = &prob.eq_rhs - &prob.eq_matrix * &start;
    let mut x = DVector::zeros(big);
    x.rows_mut(0, n).copy_from(&start);
    for r in 0..m {
        x[n + r] = (-resid[r]).max(0.0);
        x[n + m + r] = resid[r].max(0.0);
    }

    let engine = Engine {
        h: &h,
        g: &g,
        a: &a,
        lo: &lo,
        hi: &hi,
    };
    let out = engine.run(&mut x)?;
    let xs = x.rows(0, n).into_owned();
    let slack = DVector::from_iterator(m, (0..m).map(|r| x[n + r] + x[n + m + r]));
    let objective = prob.objective(&xs) + penalty * slack.sum();
    Ok(ElasticSolution {
        x: xs,
        slack,
        eq_dual: out.lambda,
        objective,
        iterations: out.iterations,
    })
}

/// Solve the QP exactly; see [`solve_qp_from`].
pub fn solve_qp(prob: &QpProblem) -> Result<QpSolution, QpError> {
    solve_qp_from(prob, None)
}

/// Solve the QP exactly, starting the active-set walk from `x0`.
///
/// Deterministic: the same problem and start give bit-identical output.
pub fn solve_qp_from(prob: &QpProblem, x0: Option<&DVector<f64>>) -> Result<QpSolution, QpError> {
    prob.check()?;
    let n = prob.dim();
    let scale = 1.0 + prob.hessian.amax() + prob.linear.amax();
    let feas_tol = 1e-9 * (1.0 + prob.eq_rhs.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    let mut penalty = 1e3 * scale;
    let mut start = x0.cloned();
    let mut iterations = 0;
    for _ in 0..PENALTY_ROUNDS {
        let el = solve_elastic(prob, penalty, start.as_ref())?;
        iterations += el.iterations;
        if el.slack.iter().all(|s| *s <= feas_tol) {
            let grad = &prob.hessian * &el.x + &prob.linear;
            let mut nu = grad + prob.eq_matrix.transpose() * &el.eq_dual;
            for i in 0..n {
                let interior = el.x[i] > prob.lower[i] && el.x[i] < prob.upper[i];
                if interior {
                    nu[i] = 0.0;
                }
            }
            return Ok(QpSolution {
                objective: prob.objective(&el.x),
                x: el.x,
                eq_dual: el.eq_dual,
                bound_dual: nu,
                iterations,
            });
        }
        start = Some(el.x);
        penalty *= PENALTY_GROWTH;
    }
    Err(QpError::QpInfeasible)
}
