use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parallel-jaw grasp: end-effector center, yaw, and final fingertip gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspAction {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Radians in [−π/2, π/2).
    pub rot_z: f64,
    /// Meters between fingertips at the end of the squeeze.
    pub aperture: f64,
}

impl GraspAction {
    pub fn to_array(self) -> [f64; 5] {
        [self.x, self.y, self.z, self.rot_z, self.aperture]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        GraspAction { x: a[0], y: a[1], z: a[2], rot_z: a[3], aperture: a[4] }
    }
}

/// Per-dimension box for actions, in the order x, y, z, rot_z, aperture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    pub min: [f64; 5],
    pub max: [f64; 5],
}

impl Default for ActionBounds {
    /// Covers the 7.5 cm sculpting grid.
    fn default() -> Self {
        ActionBounds { min: [0.0, 0.0, 0.0, -FRAC_PI_2, 0.005], max: [0.075, 0.075, 0.075, FRAC_PI_2, 0.035] }
    }
}

impl ActionBounds {
    pub fn new(min: [f64; 5], max: [f64; 5]) -> Result<Self> {
        if (0..5).any(|d| !(min[d] < max[d]) || !min[d].is_finite() || !max[d].is_finite()) {
            return Err(Error::invalid("action bounds need finite min < max per dimension"));
        }
        if min[4] <= 0.0 {
            return Err(Error::invalid("minimum aperture must be positive"));
        }
        Ok(ActionBounds { min, max })
    }

    pub fn midpoint(&self) -> GraspAction {
        GraspAction::from_array(std::array::from_fn(|d| 0.5 * (self.min[d] + self.max[d])))
    }

    pub fn contains(&self, a: &GraspAction) -> bool {
        let v = a.to_array();
        (0..4).all(|d| v[d] >= self.min[d] && v[d] <= self.max[d])
            && v[3] < self.max[3]
            && v[4] >= self.min[4]
            && v[4] <= self.max[4]
    }

    pub fn validate(&self, a: &GraspAction) -> Result<()> {
        if self.contains(a) {
            Ok(())
        } else {
            Err(Error::invalid(format!("grasp {a:?} outside action bounds")))
        }
    }

    /// Affine map of each dimension onto [−1, 1].
    pub fn normalize(&self, a: &GraspAction) -> [f64; 5] {
        let v = a.to_array();
        std::array::from_fn(|d| 2.0 * (v[d] - self.min[d]) / (self.max[d] - self.min[d]) - 1.0)
    }

    /// Clamps to [−1, 1] and maps back. A yaw landing on the open upper end
    /// wraps to the lower end, which is the same jaw orientation.
    pub fn denormalize(&self, n: &[f64; 5]) -> GraspAction {
        let mut v: [f64; 5] = std::array::from_fn(|d| {
            let c = n[d].clamp(-1.0, 1.0);
            self.min[d] + (c + 1.0) * 0.5 * (self.max[d] - self.min[d])
        });
        if v[3] >= self.max[3] {
            v[3] = self.min[3];
        }
        GraspAction::from_array(v)
    }
}
