//! Angular-momentum linear inverted pendulum (ALIP) and its divergent component
//! of motion (DCM).
//!
//! All quantities are planar and expressed in the current contact frame: the
//! origin sits at the stance foot and the axes are aligned with the world
//! (walking is straight, so frames differ only by translation).

mod bounds;

pub use bounds::{
    admissible_step_exists, compute_dcm_bounds, verify_boundedness, AxisReport, BoundednessReport,
    BoundsError, Counterexample, DcmAxis,
};

use core::fmt;
use core::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Physical parameters of the reduced-order model.
///
/// The natural frequency is always derived from `g` and `z0`, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Mass in kg.
    pub mass: f64,
    /// Constant CoM height in m.
    pub z0: f64,
    /// Gravitational acceleration in m/s².
    pub g: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            mass: 46.0,
            z0: 0.9,
            g: 9.81,
        }
    }
}

impl ModelParams {
    pub fn new(mass: f64, z0: f64, g: f64) -> Result<Self, ModelError> {
        let p = Self { mass, z0, g };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.mass) && ok(self.z0) && ok(self.g) {
            Ok(())
        } else {
            Err(ModelError::InvalidParams)
        }
    }

    /// Natural frequency `sqrt(g / z0)` in 1/s.
    #[inline]
    pub fn lambda(&self) -> f64 {
        libm::sqrt(self.g / self.z0)
    }

    /// `e^{λT}`, the timing variable of the step-to-step map.
    #[inline]
    pub fn sigma(&self, duration: f64) -> f64 {
        libm::exp(self.lambda() * duration)
    }

    /// Inverse of [`ModelParams::sigma`].
    #[inline]
    pub fn duration(&self, sigma: f64) -> f64 {
        libm::log(sigma) / self.lambda()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("model parameters must be finite and strictly positive")]
    InvalidParams,
    #[error("gait limits are inconsistent")]
    InvalidLimits,
}

/// ALIP state: CoM position and angular momentum about the contact point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AlipState {
    pub x_c: f64,
    pub y_c: f64,
    /// kg·m²/s, opposite in sign to the lateral CoM velocity.
    pub l_x: f64,
    /// kg·m²/s.
    pub l_y: f64,
}

impl AlipState {
    pub fn new(x_c: f64, y_c: f64, l_x: f64, l_y: f64) -> Self {
        Self { x_c, y_c, l_x, l_y }
    }

    pub fn is_finite(&self) -> bool {
        self.x_c.is_finite() && self.y_c.is_finite() && self.l_x.is_finite() && self.l_y.is_finite()
    }

    /// A state at rest whose DCM equals `xi` (CoM placed at the DCM).
    pub fn at_rest(xi: DcmVec) -> Self {
        Self::new(xi.x, xi.y, 0.0, 0.0)
    }

    /// CoM velocity `(ẋ_c, ẏ_c)`.
    pub fn com_velocity(&self, p: &ModelParams) -> (f64, f64) {
        let k = p.mass * p.z0;
        (self.l_y / k, -self.l_x / k)
    }

    /// Orbital energy per axis, `v²/2 − λ² x²/2`. Conserved by the unforced flow.
    pub fn orbital_energy(&self, p: &ModelParams) -> (f64, f64) {
        let (vx, vy) = self.com_velocity(p);
        let l2 = p.g / p.z0;
        (
            0.5 * vx * vx - 0.5 * l2 * self.x_c * self.x_c,
            0.5 * vy * vy - 0.5 * l2 * self.y_c * self.y_c,
        )
    }
}

/// Planar DCM, also used for the per-step initial DCM values.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DcmVec {
    pub x: f64,
    pub y: f64,
}

impl DcmVec {
    pub const ZERO: DcmVec = DcmVec { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(&self) -> f64 {
        libm::hypot(self.x, self.y)
    }

    pub fn axis(&self, axis: DcmAxis) -> f64 {
        match axis {
            DcmAxis::X => self.x,
            DcmAxis::Y => self.y,
        }
    }
}

impl Add for DcmVec {
    type Output = DcmVec;
    fn add(self, rhs: DcmVec) -> DcmVec {
        DcmVec::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for DcmVec {
    type Output = DcmVec;
    fn sub(self, rhs: DcmVec) -> DcmVec {
        DcmVec::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for DcmVec {
    type Output = DcmVec;
    fn mul(self, rhs: f64) -> DcmVec {
        DcmVec::new(self.x * rhs, self.y * rhs)
    }
}

/// Which foot swings during a step. A left swing lands at `+w`, a right swing at `-w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SwingSide {
    Left,
    Right,
}

impl SwingSide {
    pub fn flip(self) -> SwingSide {
        match self {
            SwingSide::Left => SwingSide::Right,
            SwingSide::Right => SwingSide::Left,
        }
    }

    /// Side of the `k`-th step when step 0 swings `self`.
    pub fn after(self, k: usize) -> SwingSide {
        if k % 2 == 0 {
            self
        } else {
            self.flip()
        }
    }

    /// `+1` for left, `-1` for right.
    pub fn sign(self) -> f64 {
        match self {
            SwingSide::Left => 1.0,
            SwingSide::Right => -1.0,
        }
    }
}

impl fmt::Display for SwingSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SwingSide::Left => "L",
            SwingSide::Right => "R",
        })
    }
}

/// A commanded step: touchdown position in the current contact frame and duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footstep {
    pub u_x: f64,
    /// `w_{l/r} + W`.
    pub u_y: f64,
    pub duration: f64,
    pub side: SwingSide,
}

impl Footstep {
    pub fn position(&self) -> DcmVec {
        DcmVec::new(self.u_x, self.u_y)
    }
}

/// Mechanical limits of the robot and the nominal step width.
///
/// Right-foot lateral limits mirror the left ones and are derived, so the
/// symmetry invariant holds by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitLimits {
    pub t_min: f64,
    pub t_max: f64,
    pub l_min: f64,
    pub l_max: f64,
    pub w_l_min: f64,
    pub w_l_max: f64,
    /// Nominal left step width `w_l`; `w_r = -w_l`.
    pub step_width: f64,
}

impl Default for GaitLimits {
    fn default() -> Self {
        Self {
            t_min: 0.35,
            t_max: 0.65,
            l_min: -0.5,
            l_max: 0.5,
            w_l_min: -0.18,
            w_l_max: 0.22,
            step_width: 0.28,
        }
    }
}

impl GaitLimits {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fin = [
            self.t_min,
            self.t_max,
            self.l_min,
            self.l_max,
            self.w_l_min,
            self.w_l_max,
            self.step_width,
        ]
        .iter()
        .all(|v| v.is_finite());
        if fin
            && self.t_min > 0.0
            && self.t_min < self.t_max
            && self.l_min < self.l_max
            && self.w_l_min < self.w_l_max
        {
            Ok(())
        } else {
            Err(ModelError::InvalidLimits)
        }
    }

    pub fn w_r_min(&self) -> f64 {
        -self.w_l_max
    }

    pub fn w_r_max(&self) -> f64 {
        -self.w_l_min
    }

    /// Nominal lateral offset `w_{l/r}` of a swing on `side`.
    pub fn width(&self, side: SwingSide) -> f64 {
        side.sign() * self.step_width
    }

    /// Admissible lateral deviation `[W_min, W_max]` for `side`.
    pub fn lateral_range(&self, side: SwingSide) -> (f64, f64) {
        match side {
            SwingSide::Left => (self.w_l_min, self.w_l_max),
            SwingSide::Right => (self.w_r_min(), self.w_r_max()),
        }
    }

    pub fn sigma_range(&self, p: &ModelParams) -> (f64, f64) {
        (p.sigma(self.t_min), p.sigma(self.t_max))
    }
}

/// Box on the per-step initial DCM. The lateral interval depends on which
/// foot swings next.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcmBounds {
    pub z_x_min: f64,
    pub z_x_max: f64,
    pub z_yl_min: f64,
    pub z_yl_max: f64,
    pub z_yr_min: f64,
    pub z_yr_max: f64,
}

impl DcmBounds {
    /// `(lo, hi)` for the initial DCM of a step that swings `side`.
    pub fn y_range(&self, side: SwingSide) -> (f64, f64) {
        match side {
            SwingSide::Left => (self.z_yl_min, self.z_yl_max),
            SwingSide::Right => (self.z_yr_min, self.z_yr_max),
        }
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.z_x_min, self.z_x_max)
    }

    pub fn range(&self, axis: DcmAxis, side: SwingSide) -> (f64, f64) {
        match axis {
            DcmAxis::X => self.x_range(),
            DcmAxis::Y => self.y_range(side),
        }
    }

    /// Largest absolute lateral bound over both sides.
    pub fn y_abs_max(&self) -> f64 {
        self.z_yl_min
            .abs()
            .max(self.z_yl_max.abs())
            .max(self.z_yr_min.abs())
            .max(self.z_yr_max.abs())
    }

    pub fn contains(&self, z: DcmVec, side: SwingSide, tol: f64) -> bool {
        let (ylo, yhi) = self.y_range(side);
        z.x >= self.z_x_min - tol && z.x <= self.z_x_max + tol && z.y >= ylo - tol && z.y <= yhi + tol
    }
}

/// DCM of an ALIP state: `ξ = (x_c + L_y/(λ m z0), y_c − L_x/(λ m z0))`.
pub fn dcm_from_state(s: &AlipState, p: &ModelParams) -> DcmVec {
    let k = p.lambda() * p.mass * p.z0;
    DcmVec::new(s.x_c + s.l_y / k, s.y_c - s.l_x / k)
}

/// Closed-form flow of the ALIP over `t` seconds.
///
/// `force` is a horizontal force (N) held constant over the interval and
/// applied at CoM height, so it enters as `L̇_y += z0 F_x`, `L̇_x -= z0 F_y`.
/// The solution is exact for piecewise-constant forcing.
pub fn flow_state(s0: &AlipState, t: f64, p: &ModelParams, force: Option<[f64; 2]>) -> AlipState {
    if t == 0.0 {
        return *s0;
    }
    let lam = p.lambda();
    let l2 = lam * lam;
    let k = p.mass * p.z0;
    let (ch, sh) = (libm::cosh(lam * t), libm::sinh(lam * t));
    let [fx, fy] = force.unwrap_or([0.0, 0.0]);

    // Per axis: ẍ = λ² x + a. Shift by the static offset a/λ² and use cosh/sinh.
    let axis = |x0: f64, v0: f64, a: f64| -> (f64, f64) {
        let off = a / l2;
        let xs = x0 + off;
        (xs * ch + v0 / lam * sh - off, xs * lam * sh + v0 * ch)
    };

    let (vx0, vy0) = s0.com_velocity(p);
    let (x, vx) = axis(s0.x_c, vx0, fx / p.mass);
    let (y, vy) = axis(s0.y_c, vy0, fy / p.mass);
    AlipState::new(x, y, -vy * k, vx * k)
}

/// `ξ(t) = ξ0 e^{λt}`.
pub fn dcm_at_time(xi0: DcmVec, t: f64, p: &ModelParams) -> DcmVec {
    xi0 * libm::exp(p.lambda() * t)
}

/// DCM reset across a touchdown: `z' = z e^{λT} − u`.
pub fn reset_map(z_prev: DcmVec, step: &Footstep, p: &ModelParams) -> DcmVec {
    step_map(z_prev, p.sigma(step.duration), step.position())
}

/// Discrete step dynamics `z^k = σ z^{k−1} − u`.
#[inline]
pub fn step_map(z_prev: DcmVec, sigma: f64, u: DcmVec) -> DcmVec {
    DcmVec::new(sigma * z_prev.x - u.x, sigma * z_prev.y - u.y)
}

/// Initial DCM of a periodic gait with step length `length`, lateral deviation
/// `lateral` and duration `duration`, for a step that swings `side`.
pub fn nominal_initial_dcm(
    length: f64,
    lateral: f64,
    duration: f64,
    side: SwingSide,
    p: &ModelParams,
    limits: &GaitLimits,
) -> DcmVec {
    let s = p.sigma(duration);
    DcmVec::new(
        length / (s - 1.0),
        limits.width(side) / (s + 1.0) + lateral / (s - 1.0),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params() -> ModelParams {
        ModelParams::new(1.0, 0.9, 9.81).unwrap()
    }

    #[test]
    fn lambda_is_derived() {
        let p = params();
        assert_abs_diff_eq!(p.lambda(), 3.301_514_803_843_836, epsilon = 1e-12);
        assert!(ModelParams::new(0.0, 0.9, 9.81).is_err());
        assert!(ModelParams::new(1.0, -0.9, 9.81).is_err());
    }

    #[test]
    fn dcm_of_zero_state_is_zero() {
        assert_eq!(dcm_from_state(&AlipState::default(), &params()), DcmVec::ZERO);
    }

    #[test]
    fn dcm_from_state_example() {
        let p = params();
        let lam = (9.81f64 / 0.9).sqrt();
        let s = AlipState::new(0.1, 0.0, 0.0, 0.9 * lam * 0.05);
        let xi = dcm_from_state(&s, &p);
        assert_abs_diff_eq!(xi.x, 0.15, epsilon = 1e-12);
        assert_abs_diff_eq!(xi.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn positive_lx_pulls_lateral_dcm_negative() {
        let xi = dcm_from_state(&AlipState::new(0.0, 0.0, 2.0, 0.0), &params());
        assert!(xi.y < 0.0);
    }

    #[test]
    fn zero_time_flow_is_identity() {
        let s = AlipState::new(0.1, -0.2, 3.0, 4.0);
        assert_eq!(flow_state(&s, 0.0, &params(), None), s);
    }

    #[test]
    fn flow_matches_cosh() {
        let s = AlipState::new(0.1, 0.0, 0.0, 0.0);
        let out = flow_state(&s, 0.1, &params(), None);
        assert_abs_diff_eq!(out.x_c, 0.1 * (0.1 * params().lambda()).cosh(), epsilon = 1e-14);
        assert_abs_diff_eq!(out.x_c, 0.105_50, epsilon = 1e-5);
    }

    #[test]
    fn dcm_at_time_examples() {
        let p = params();
        let xi = DcmVec::new(0.095, 0.0);
        assert_eq!(dcm_at_time(xi, 0.0, &p), xi);
        let out = dcm_at_time(xi, 0.5, &p);
        assert_abs_diff_eq!(out.x, 0.095 * (0.5 * p.lambda()).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(out.x, 0.495, epsilon = 5e-4);
        assert_eq!(dcm_at_time(DcmVec::ZERO, 0.3, &p), DcmVec::ZERO);
    }

    #[test]
    fn reset_map_rest_point() {
        let step = Footstep {
            u_x: 0.0,
            u_y: 0.0,
            duration: 0.5,
            side: SwingSide::Left,
        };
        assert_eq!(reset_map(DcmVec::ZERO, &step, &params()), DcmVec::ZERO);
    }

    #[test]
    fn nominal_dcm_is_a_two_step_fixed_point() {
        let p = params();
        let lim = GaitLimits::default();
        let z = nominal_initial_dcm(0.4, 0.0, 0.5, SwingSide::Left, &p, &lim);
        assert_abs_diff_eq!(z.x, 0.095, epsilon = 1e-3);
        let mut cur = z;
        let mut side = SwingSide::Left;
        for _ in 0..2 {
            let step = Footstep {
                u_x: 0.4,
                u_y: lim.width(side),
                duration: 0.5,
                side,
            };
            cur = reset_map(cur, &step, &p);
            side = side.flip();
        }
        assert_abs_diff_eq!(cur.x, z.x, epsilon = 1e-12);
        assert_abs_diff_eq!(cur.y, z.y, epsilon = 1e-12);
    }

    #[test]
    fn nominal_in_place_lateral_value() {
        let p = params();
        let lim = GaitLimits::default();
        let z = nominal_initial_dcm(0.0, 0.0, 0.5, SwingSide::Left, &p, &lim);
        assert_eq!(z.x, 0.0);
        assert_abs_diff_eq!(z.y, 0.28 / (p.sigma(0.5) + 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(z.y, 0.045_08, epsilon = 1e-4);
        let zero_width = GaitLimits {
            step_width: 0.0,
            ..lim
        };
        assert_eq!(
            nominal_initial_dcm(0.0, 0.0, 0.5, SwingSide::Right, &p, &zero_width),
            DcmVec::ZERO
        );
    }

    #[test]
    fn sides_alternate() {
        assert_eq!(SwingSide::Left.after(0), SwingSide::Left);
        assert_eq!(SwingSide::Left.after(3), SwingSide::Right);
        assert_eq!(SwingSide::Right.flip(), SwingSide::Left);
    }
}
