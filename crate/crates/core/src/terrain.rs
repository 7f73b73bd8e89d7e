//! Stepping-stone profiles.
//!
//! Stones are laid out in the world frame starting from a reference stone at
//! the origin. Stone `k` sits at stone `k-1` plus `(L^k, ±w + W^k)`, where the
//! sign alternates with the swing foot, the first stone taking a left swing.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::alip::{GaitLimits, SwingSide};
use crate::rng::ScenarioRng;

/// Forward spacing domain for randomized profiles.
pub const LENGTH_DOMAIN: (f64, f64) = (0.2, 0.5);
/// Lateral deviation domain for randomized profiles.
pub const WIDTH_DOMAIN: (f64, f64) = (-0.15, 0.15);
/// Foothold half-size `(h_x, h_y)`: a 0.2 m × 0.1 m rectangle.
pub const DEFAULT_HALF_EXTENT: [f64; 2] = [0.1, 0.05];

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum TerrainError {
    #[error("profile parameters outside their admissible domain")]
    InvalidProfileParams,
    #[error("stone index {index} out of range for a profile of {len} stones")]
    IndexOutOfRange { index: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProfileKind {
    /// Profile I: fixed `L` and `W`.
    Constant { length: f64, width: f64 },
    /// Profile II: `L` and `W` both uniform.
    UniformRandom,
    /// Profile III: `L` in blocks `(0.2×8, 0.5×8)`, `W` uniform.
    LengthBlocks,
    /// Profile IV: `W` in blocks `(−0.1×8, 0.1×8)`, `L` uniform.
    WidthBlocks,
    /// Straight walk used by the push-recovery scenario, `[L, W] = [0.4, 0]`.
    Perturbation,
}

impl ProfileKind {
    pub fn label(&self) -> &'static str {
        match self {
            ProfileKind::Constant { .. } => "I",
            ProfileKind::UniformRandom => "II",
            ProfileKind::LengthBlocks => "III",
            ProfileKind::WidthBlocks => "IV",
            ProfileKind::Perturbation => "perturb",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub kind: ProfileKind,
    pub count: usize,
    pub length_range: (f64, f64),
    pub width_range: (f64, f64),
    pub half_extent: [f64; 2],
}

impl ProfileSpec {
    fn with_kind(kind: ProfileKind, count: usize) -> Self {
        Self {
            kind,
            count,
            length_range: LENGTH_DOMAIN,
            width_range: WIDTH_DOMAIN,
            half_extent: DEFAULT_HALF_EXTENT,
        }
    }

    pub fn profile_i(length: f64, width: f64) -> Self {
        Self::with_kind(ProfileKind::Constant { length, width }, 32)
    }

    pub fn profile_ii() -> Self {
        Self::with_kind(ProfileKind::UniformRandom, 32)
    }

    pub fn profile_iii() -> Self {
        Self::with_kind(ProfileKind::LengthBlocks, 32)
    }

    pub fn profile_iv() -> Self {
        Self::with_kind(ProfileKind::WidthBlocks, 32)
    }

    pub fn perturbation() -> Self {
        Self::with_kind(ProfileKind::Perturbation, 24)
    }

    pub fn with_count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    fn validate(&self) -> Result<(), TerrainError> {
        let within = |(lo, hi): (f64, f64), (dlo, dhi): (f64, f64)| {
            lo.is_finite() && hi.is_finite() && lo <= hi && lo >= dlo && hi <= dhi
        };
        let ok = self.half_extent.iter().all(|h| h.is_finite() && *h > 0.0)
            && match self.kind {
                ProfileKind::Constant { length, width } => {
                    length.is_finite()
                        && length > 0.0
                        && length <= 1.0
                        && width >= WIDTH_DOMAIN.0
                        && width <= WIDTH_DOMAIN.1
                }
                ProfileKind::UniformRandom => {
                    within(self.length_range, LENGTH_DOMAIN) && within(self.width_range, WIDTH_DOMAIN)
                }
                ProfileKind::LengthBlocks => within(self.width_range, WIDTH_DOMAIN),
                ProfileKind::WidthBlocks => within(self.length_range, LENGTH_DOMAIN),
                ProfileKind::Perturbation => true,
            };
        if ok {
            Ok(())
        } else {
            Err(TerrainError::InvalidProfileParams)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stone {
    pub center: [f64; 2],
    pub half_extent: [f64; 2],
    /// Foot that lands on this stone.
    pub side: SwingSide,
    /// Forward spacing `L^k` from the previous stone.
    pub length: f64,
    /// Lateral deviation `W^k` from the nominal width.
    pub width: f64,
}

impl Stone {
    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        (p[0] - self.center[0]).abs() <= self.half_extent[0] + tol
            && (p[1] - self.center[1]).abs() <= self.half_extent[1] + tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoneProfile {
    pub kind: ProfileKind,
    pub seed: u64,
    pub first_side: SwingSide,
    pub stones: Vec<Stone>,
}

impl StoneProfile {
    pub fn len(&self) -> usize {
        self.stones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stones.is_empty()
    }
}

fn block(k: usize, a: f64, b: f64) -> f64 {
    if (k / 8) % 2 == 0 {
        a
    } else {
        b
    }
}

/// Lay out a profile. Pure in `(spec, seed, limits.step_width)`.
///
/// Draw order per stone is `L` then `W`, skipping whichever is fixed.
pub fn generate_profile(
    spec: &ProfileSpec,
    seed: u64,
    limits: &GaitLimits,
) -> Result<StoneProfile, TerrainError> {
    spec.validate()?;
    let mut rng = ScenarioRng::new(seed);
    let (llo, lhi) = spec.length_range;
    let (wlo, whi) = spec.width_range;
    let first_side = SwingSide::Left;
    let mut prev = [0.0, 0.0];
    let mut stones = Vec::with_capacity(spec.count);
    for k in 0..spec.count {
        let (length, width) = match spec.kind {
            ProfileKind::Constant { length, width } => (length, width),
            ProfileKind::UniformRandom => {
                let l = rng.uniform(llo, lhi);
                (l, rng.uniform(wlo, whi))
            }
            ProfileKind::LengthBlocks => (block(k, 0.2, 0.5), rng.uniform(wlo, whi)),
            ProfileKind::WidthBlocks => (rng.uniform(llo, lhi), block(k, -0.1, 0.1)),
            ProfileKind::Perturbation => (0.4, 0.0),
        };
        let side = first_side.after(k);
        let center = [prev[0] + length, prev[1] + limits.width(side) + width];
        stones.push(Stone {
            center,
            half_extent: spec.half_extent,
            side,
            length,
            width,
        });
        prev = center;
    }
    Ok(StoneProfile {
        kind: spec.kind,
        seed,
        first_side,
        stones,
    })
}

/// Stone `k` expressed relative to `origin_world` (pure translation).
pub fn stone_in_frame(
    profile: &StoneProfile,
    k: usize,
    origin_world: [f64; 2],
) -> Result<([f64; 2], [f64; 2]), TerrainError> {
    let stone = profile.stones.get(k).ok_or(TerrainError::IndexOutOfRange {
        index: k,
        len: profile.stones.len(),
    })?;
    Ok((
        [stone.center[0] - origin_world[0], stone.center[1] - origin_world[1]],
        stone.half_extent,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lim() -> GaitLimits {
        GaitLimits::default()
    }

    #[test]
    fn profile_i_constant_spacing() {
        let p = generate_profile(&ProfileSpec::profile_i(0.4, 0.0), 0, &lim()).unwrap();
        assert_eq!(p.len(), 32);
        let mut prev = [0.0, 0.0];
        for (k, s) in p.stones.iter().enumerate() {
            assert_abs_diff_eq!(s.center[0] - prev[0], 0.4, epsilon = 1e-12);
            let dy = if k % 2 == 0 { 0.28 } else { -0.28 };
            assert_abs_diff_eq!(s.center[1] - prev[1], dy, epsilon = 1e-12);
            prev = s.center;
        }
    }

    #[test]
    fn profile_iii_length_pattern() {
        let p = generate_profile(&ProfileSpec::profile_iii(), 42, &lim()).unwrap();
        let ls: Vec<f64> = p.stones.iter().map(|s| s.length).collect();
        let mut expected = Vec::new();
        for _ in 0..2 {
            expected.extend([0.2; 8]);
            expected.extend([0.5; 8]);
        }
        assert_eq!(ls, expected);
        assert!(p.stones.iter().all(|s| s.width.abs() <= 0.15));
    }

    #[test]
    fn profile_iv_width_pattern() {
        let p = generate_profile(&ProfileSpec::profile_iv(), 3, &lim()).unwrap();
        for (k, s) in p.stones.iter().enumerate() {
            let w = if (k / 8) % 2 == 0 { -0.1 } else { 0.1 };
            assert_eq!(s.width, w);
            assert!((0.2..=0.5).contains(&s.length));
        }
    }

    #[test]
    fn perturbation_profile() {
        let p = generate_profile(&ProfileSpec::perturbation(), 0, &lim()).unwrap();
        assert_eq!(p.len(), 24);
        assert!(p.stones.iter().all(|s| s.length == 0.4 && s.width == 0.0));
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = ProfileSpec::profile_ii();
        let a = generate_profile(&spec, 11, &lim()).unwrap();
        let b = generate_profile(&spec, 11, &lim()).unwrap();
        let c = generate_profile(&spec, 12, &lim()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_out_of_domain_ranges() {
        let mut spec = ProfileSpec::profile_ii();
        spec.length_range = (0.1, 0.5);
        assert_eq!(
            generate_profile(&spec, 0, &lim()),
            Err(TerrainError::InvalidProfileParams)
        );
        let mut spec = ProfileSpec::profile_iii();
        spec.width_range = (-0.2, 0.0);
        assert!(generate_profile(&spec, 0, &lim()).is_err());
        assert!(generate_profile(&ProfileSpec::profile_i(0.4, 0.3), 0, &lim()).is_err());
    }

    #[test]
    fn frame_changes() {
        let p = generate_profile(&ProfileSpec::profile_i(0.4, 0.0), 0, &lim()).unwrap();
        let (c, h) = stone_in_frame(&p, 5, p.stones[5].center).unwrap();
        assert_eq!(c, [0.0, 0.0]);
        assert_eq!(h, DEFAULT_HALF_EXTENT);
        let (c, _) = stone_in_frame(&p, 1, [0.0, 0.0]).unwrap();
        assert_eq!(c, p.stones[1].center);
        assert_eq!(
            stone_in_frame(&p, 32, [0.0, 0.0]),
            Err(TerrainError::IndexOutOfRange { index: 32, len: 32 })
        );
    }

    #[test]
    fn chained_frames_match_construction() {
        let p = generate_profile(&ProfileSpec::profile_ii(), 5, &lim()).unwrap();
        for k in 1..p.len() {
            let (c, _) = stone_in_frame(&p, k, p.stones[k - 1].center).unwrap();
            let s = &p.stones[k];
            assert_abs_diff_eq!(c[0], s.length, epsilon = 1e-12);
            assert_abs_diff_eq!(c[1], s.side.sign() * 0.28 + s.width, epsilon = 1e-12);
        }
    }
}
