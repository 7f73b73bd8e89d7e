//! Viability box of the per-step initial DCM, and a grid check that the box
//! is invariant under the reset map for some admissible step.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{DcmBounds, GaitLimits, ModelParams, SwingSide};

/// Slack allowed when checking that an image lands inside the box.
const INSIDE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DcmAxis {
    X,
    Y,
}

/// Initial-DCM box implied by the mechanical limits.
///
/// The forward bound is the periodic value for the longest, fastest step. The
/// lateral bounds come from two consecutive boundary steps at `T_min`.
pub fn compute_dcm_bounds(limits: &GaitLimits, p: &ModelParams) -> DcmBounds {
    let s = p.sigma(limits.t_min);
    let z_x_max = limits.l_max / (s - 1.0);
    let base = limits.step_width / (s + 1.0);
    let den = s * s - 1.0;
    let z_yl_min = base + (-limits.w_l_max + limits.w_l_min * s) / den;
    let z_yl_max = base + (-limits.w_l_min + limits.w_l_max * s) / den;
    DcmBounds {
        z_x_min: -z_x_max,
        z_x_max,
        z_yl_min,
        z_yl_max,
        z_yr_min: -z_yl_max,
        z_yr_max: -z_yl_min,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub axis: DcmAxis,
    /// Side swinging during the step that starts from `z` (unused for x).
    pub side: SwingSide,
    pub z: f64,
    /// Best signed distance to the target box edge over the step grid (negative: outside).
    pub best_margin: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundsError {
    #[error("grid density must be at least 10, got {0}")]
    GridTooCoarse(usize),
    #[error("{} initial-DCM values cannot be kept inside the bound box", .counterexamples.len())]
    BoundsViolated { counterexamples: Vec<Counterexample> },
}

/// Result of checking one source box against its target box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisReport {
    pub axis: DcmAxis,
    pub side: SwingSide,
    pub points: usize,
    /// Smallest, over source points, of the best margin achievable by a gridded step.
    pub worst_margin: f64,
    /// Interior points for which no gridded step moves strictly closer to the box centre.
    pub contraction_failures: usize,
    /// `|reset(boundary, extreme step) − target boundary|`, worst of both edges.
    pub boundary_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub grid_density: usize,
    pub axes: Vec<AxisReport>,
}

impl BoundednessReport {
    pub fn worst_margin(&self) -> f64 {
        self.axes.iter().map(|a| a.worst_margin).fold(f64::INFINITY, f64::min)
    }

    pub fn boundary_error(&self) -> f64 {
        self.axes.iter().map(|a| a.boundary_error).fold(0.0, f64::max)
    }

    pub fn contraction_failures(&self) -> usize {
        self.axes.iter().map(|a| a.contraction_failures).sum()
    }
}

struct Case {
    axis: DcmAxis,
    side: SwingSide,
    source: (f64, f64),
    target: (f64, f64),
    step: (f64, f64),
}

fn cases(bounds: &DcmBounds, limits: &GaitLimits) -> [Case; 3] {
    let lateral = |side: SwingSide| {
        let (lo, hi) = limits.lateral_range(side);
        let w = limits.width(side);
        Case {
            axis: DcmAxis::Y,
            side,
            source: bounds.y_range(side),
            target: bounds.y_range(side.flip()),
            step: (w + lo, w + hi),
        }
    };
    [
        Case {
            axis: DcmAxis::X,
            side: SwingSide::Left,
            source: bounds.x_range(),
            target: bounds.x_range(),
            step: (limits.l_min, limits.l_max),
        },
        lateral(SwingSide::Left),
        lateral(SwingSide::Right),
    ]
}

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| {
        if i + 1 == n {
            hi
        } else {
            lo + (hi - lo) * (i as f64) / ((n - 1) as f64)
        }
    })
}

fn margin(v: f64, (lo, hi): (f64, f64)) -> f64 {
    (v - lo).min(hi - v)
}

fn mid((lo, hi): (f64, f64)) -> f64 {
    0.5 * (lo + hi)
}

/// Best margin and best distance-to-centre over the gridded step box.
fn scan(z: f64, case: &Case, sigmas: &[f64], density: usize) -> (f64, f64) {
    let centre = mid(case.target);
    let mut best_margin = f64::NEG_INFINITY;
    let mut best_dist = f64::INFINITY;
    for &s in sigmas {
        let grown = s * z;
        for u in grid(case.step.0, case.step.1, density) {
            let img = grown - u;
            best_margin = best_margin.max(margin(img, case.target));
            best_dist = best_dist.min((img - centre).abs());
        }
    }
    (best_margin, best_dist)
}

fn sigma_grid(limits: &GaitLimits, p: &ModelParams, density: usize) -> Vec<f64> {
    grid(limits.t_min, limits.t_max, density).map(|t| p.sigma(t)).collect()
}

/// Whether some gridded step `(u, T)` maps `z` into the target box.
pub fn admissible_step_exists(
    z: f64,
    axis: DcmAxis,
    side: SwingSide,
    bounds: &DcmBounds,
    limits: &GaitLimits,
    p: &ModelParams,
    density: usize,
) -> bool {
    let all = cases(bounds, limits);
    let case = match axis {
        DcmAxis::X => &all[0],
        DcmAxis::Y if side == SwingSide::Left => &all[1],
        DcmAxis::Y => &all[2],
    };
    let sigmas = sigma_grid(limits, p, density);
    scan(z, case, &sigmas, density).0 >= -INSIDE_TOL
}

/// Grid check that every initial DCM in the bound box can be mapped back into
/// the box by at least one admissible step.
///
/// The source box is sampled with `grid_density` points per axis and the step
/// box `(u, T)` with `grid_density²` points, corners included.
pub fn verify_boundedness(
    bounds: &DcmBounds,
    limits: &GaitLimits,
    p: &ModelParams,
    grid_density: usize,
) -> Result<BoundednessReport, BoundsError> {
    if grid_density < 10 {
        return Err(BoundsError::GridTooCoarse(grid_density));
    }
    let sigmas = sigma_grid(limits, p, grid_density);
    let s_min = p.sigma(limits.t_min);
    let mut counterexamples = Vec::new();
    let mut axes = Vec::with_capacity(3);

    for case in cases(bounds, limits).iter() {
        let centre = mid(case.source);
        let mut worst = f64::INFINITY;
        let mut contraction_failures = 0;
        for z in grid(case.source.0, case.source.1, grid_density) {
            let (best_margin, best_dist) = scan(z, case, &sigmas, grid_density);
            worst = worst.min(best_margin);
            if best_margin < -INSIDE_TOL {
                counterexamples.push(Counterexample {
                    axis: case.axis,
                    side: case.side,
                    z,
                    best_margin,
                });
            }
            let dist = (z - centre).abs();
            let interior = z > case.source.0 && z < case.source.1;
            if interior && dist > INSIDE_TOL && best_dist >= dist {
                contraction_failures += 1;
            }
        }
        let hi_err = (s_min * case.source.1 - case.step.1 - case.target.1).abs();
        // Lower edge maps onto the lower target edge with the shortest step.
        let lo_err = (s_min * case.source.0 - case.step.0 - case.target.0).abs();
        axes.push(AxisReport {
            axis: case.axis,
            side: case.side,
            points: grid_density,
            worst_margin: worst,
            contraction_failures,
            boundary_error: hi_err.max(lo_err),
        });
    }

    if counterexamples.is_empty() {
        Ok(BoundednessReport { grid_density, axes })
    } else {
        Err(BoundsError::BoundsViolated { counterexamples })
    }
}
