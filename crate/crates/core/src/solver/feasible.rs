//! Feasibility search over step timing.
//!
//! With every `σ^k` fixed the constraints are linear and separate by axis.
//! On one axis the reachable set after step `k` is described by an interval
//! for `s = z^k + q^k`, since the dynamics give `z^k + q^k = σ^k z^{k−1} +
//! q^{k−1}` and `q^k` is otherwise free in its box. The next interval is the
//! range of `σ z + q` over `{z + q ∈ [a, b], z ∈ Z, q ∈ Q}`, which is attained
//! at the extreme `s` because `σ > 1`. A depth-first search over a `σ` grid
//! with this propagation decides feasibility up to the grid resolution.

use alloc::vec::Vec;

use super::scp::MpcInstance;

/// One axis of the set reachable after a stage: `z + q ∈ s`, `z ∈ z`, `q ∈ q`.
#[derive(Clone, Copy)]
struct Reach {
    s: (f64, f64),
    z: (f64, f64),
    q: (f64, f64),
}

impl Reach {
    fn point(z: f64) -> Self {
        Self {
            s: (z, z),
            z: (z, z),
            q: (0.0, 0.0),
        }
    }

    /// The `s` interval clipped to what the boxes allow, `None` if empty.
    fn clipped(&self) -> Option<(f64, f64)> {
        let a = self.s.0.max(self.z.0 + self.q.0);
        let b = self.s.1.min(self.z.1 + self.q.1);
        (a <= b).then_some((a, b))
    }

    /// Set after a step with timing `sigma` into boxes `z` and `q`.
    fn step(&self, sigma: f64, z: (f64, f64), q: (f64, f64)) -> Option<Reach> {
        let (a, b) = self.clipped()?;
        let lo = (sigma - 1.0) * self.z.0.max(a - self.q.1) + a;
        let hi = (sigma - 1.0) * self.z.1.min(b - self.q.0) + b;
        let next = Reach { s: (lo, hi), z, q };
        next.clipped().map(|_| next)
    }
}

/// Candidate `σ` values for one stage: `preferred` first, then an even grid
/// ordered by distance to it. Both box edges are always included.
fn candidates(lo: f64, hi: f64, preferred: f64, grid: usize) -> Vec<f64> {
    let n = grid.max(2);
    let mut v: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    let p = preferred.clamp(lo, hi);
    v.sort_by(|a, b| (a - p).abs().total_cmp(&(b - p).abs()));
    v.insert(0, p);
    v
}

struct Search<'a> {
    inst: &'a MpcInstance,
    cands: Vec<Vec<f64>>,
    chosen: Vec<f64>,
    budget: usize,
}

impl Search<'_> {
    fn rec(&mut self, k: usize, rx: Reach, ry: Reach) -> bool {
        if k == self.inst.stages.len() {
            return true;
        }
        let s = self.inst.stages[k];
        for i in 0..self.cands[k].len() {
            if self.budget == 0 {
                return false;
            }
            self.budget -= 1;
            let sigma = self.cands[k][i];
            let nx = rx.step(sigma, (s.z_lo.x, s.z_hi.x), (s.p_lo.x, s.p_hi.x));
            let ny = ry.step(sigma, (s.z_lo.y, s.z_hi.y), (s.p_lo.y, s.p_hi.y));
            if let (Some(nx), Some(ny)) = (nx, ny) {
                self.chosen.push(sigma);
                if self.rec(k + 1, nx, ny) {
                    return true;
                }
                self.chosen.pop();
            }
        }
        false
    }
}

/// A `σ` sequence for which `inst` is feasible, searching `grid` values per
/// stage near `preferred`. `None` if no grid sequence is feasible.
pub fn feasible_sigmas(inst: &MpcInstance, preferred: &[f64], grid: usize) -> Option<Vec<f64>> {
    let cands = inst
        .stages
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let p = preferred.get(k).copied().unwrap_or(s.sigma_des);
            candidates(s.sigma_lo, s.sigma_hi, p, grid)
        })
        .collect();
    let mut search = Search {
        inst,
        cands,
        chosen: Vec::with_capacity(inst.stages.len()),
        budget: 2_000_000,
    };
    let z = inst.z0;
    search
        .rec(0, Reach::point(z.x), Reach::point(z.y))
        .then_some(search.chosen)
}
