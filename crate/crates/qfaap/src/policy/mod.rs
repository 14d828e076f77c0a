//! End-to-end safe-grasp policy: patch the hand region, refine it, zero hand
//! quality, select the grasp, and transform it into the robot end-effector
//! frame.

mod ndacc;
mod run;
mod transforms;

pub use ndacc::{eval_ndacc, NdaccOptions, NdaccOutcome, Scene};
pub use run::{run_policy, zero_hand_quality, PolicyConfig, PolicyOutput};
pub use transforms::{backproject, project, to_robot_frame, CameraIntrinsics, HandEyeTransform};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Affine map from image-space grasp width/angle to gripper stroke and
/// Z-rotation, plus the constant X/Y rotations of the approach pose.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GripperProjection {
    /// Meters of stroke per pixel of grasp width.
    pub width_gain: f64,
    /// Meters added to the stroke.
    pub width_offset: f64,
    /// Stroke limits in meters.
    pub width_min: f64,
    pub width_max: f64,
    /// +1 or -1: image angle to gripper rotation sense.
    pub angle_sign: f64,
    /// Radians added to the mapped angle.
    pub angle_offset: f64,
    /// Constant rotations about the end-effector X and Y axes.
    pub theta_x: f64,
    pub theta_y: f64,
}

impl Default for GripperProjection {
    fn default() -> Self {
        GripperProjection {
            width_gain: 0.001,
            width_offset: 0.0,
            width_min: 0.0,
            width_max: 0.15,
            angle_sign: 1.0,
            angle_offset: 0.0,
            theta_x: std::f64::consts::PI,
            theta_y: 0.0,
        }
    }
}

impl GripperProjection {
    pub fn validate(&self) -> Result<()> {
        if self.width_min > self.width_max {
            return Err(Error::InvalidInput(format!(
                "gripper stroke limits inverted: [{}, {}]",
                self.width_min, self.width_max
            )));
        }
        if self.angle_sign != 1.0 && self.angle_sign != -1.0 {
            return Err(Error::InvalidInput(format!(
                "angle sign must be +1 or -1, got {}",
                self.angle_sign
            )));
        }
        Ok(())
    }
}

/// Maps an image-space grasp width (pixels) and angle to gripper stroke
/// (meters, clamped to the limits) and Z-rotation (radians).
pub fn gripper_map(width_px: f64, angle: f64, proj: &GripperProjection) -> (f64, f64) {
    let stroke = (proj.width_gain * width_px + proj.width_offset)
        .clamp(proj.width_min, proj.width_max);
    let theta = proj.angle_sign * angle + proj.angle_offset;
    (stroke, theta)
}

/// Grasp pose in the robot end-effector frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotGrasp {
    /// Position in meters.
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Gripper stroke in meters.
    pub stroke: f64,
    /// Rotation about Z, plus the constant X/Y rotations.
    pub theta: f64,
    pub theta_x: f64,
    pub theta_y: f64,
}

/// Full calibration needed to express a grasp in the robot frame.
#[derive(Debug, Clone)]
pub struct CalibrationBundle {
    pub intrinsics: CameraIntrinsics,
    pub hand_eye: HandEyeTransform,
    pub gripper: GripperProjection,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gripper_map_affine_and_clamped() {
        let proj = GripperProjection::default();
        let (w, _) = gripper_map(80.0, 0.0, &proj);
        assert!((w - 0.08).abs() < 1e-15);

        let (w, _) = gripper_map(1e9, 0.0, &proj);
        assert_eq!(w, proj.width_max);

        let mut flipped = proj.clone();
        flipped.angle_sign = -1.0;
        let (_, theta) = gripper_map(10.0, std::f64::consts::FRAC_PI_4, &flipped);
        assert!((theta + std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn gripper_projection_validation() {
        let mut p = GripperProjection::default();
        p.width_min = 0.2;
        assert!(p.validate().is_err());
        let mut p = GripperProjection::default();
        p.angle_sign = 0.5;
        assert!(p.validate().is_err());
    }
}
