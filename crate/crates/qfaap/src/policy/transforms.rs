//! Camera back-projection and the hand-eye rigid transform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pinhole intrinsics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidInput(format!(
                "focal lengths must be positive: fx={} fy={}",
                self.fx, self.fy
            )));
        }
        Ok(())
    }
}

/// Back-projects a pixel (u = column, v = row) with depth `d` meters into
/// the camera frame: x = (u - cx) d / fx, y = (v - cy) d / fy, z = d.
pub fn backproject(u: f64, v: f64, d: f64, k: &CameraIntrinsics) -> Result<[f64; 3]> {
    if !d.is_finite() || d <= 0.0 {
        return Err(Error::InvalidInput(format!("invalid depth {d}")));
    }
    Ok([(u - k.cx) * d / k.fx, (v - k.cy) * d / k.fy, d])
}

/// Forward projection of a camera-frame point back to pixel coordinates.
pub fn project(p: &[f64; 3], k: &CameraIntrinsics) -> Result<(f64, f64)> {
    if p[2] <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "point behind the camera: z={}",
            p[2]
        )));
    }
    Ok((p[0] * k.fx / p[2] + k.cx, p[1] * k.fy / p[2] + k.cy))
}

/// 4x4 homogeneous rigid transform, camera frame to robot end-effector
/// frame. Rejected at construction unless the rotation block is orthonormal
/// with determinant +1 and the last row is (0,0,0,1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandEyeTransform {
    m: [[f64; 4]; 4],
}

impl HandEyeTransform {
    pub fn identity() -> Self {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        HandEyeTransform { m }
    }

    pub fn new(m: [[f64; 4]; 4]) -> Result<Self> {
        const TOL: f64 = 1e-9;
        if m[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::NonRigidTransform(
                "last row must be (0,0,0,1)".into(),
            ));
        }
        // R^T R = I
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| m[k][i] * m[k][j]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot - expect).abs() > TOL {
                    return Err(Error::NonRigidTransform(format!(
                        "rotation not orthonormal: (R^T R)[{i}][{j}] = {dot}"
                    )));
                }
            }
        }
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        if (det - 1.0).abs() > TOL {
            return Err(Error::NonRigidTransform(format!("det(R) = {det}, not +1")));
        }
        Ok(HandEyeTransform { m })
    }

    pub fn from_rotation_translation(r: [[f64; 3]; 3], t: [f64; 3]) -> Result<Self> {
        let mut m = [[0.0; 4]; 4];
        for i in 0..3 {
            m[i][..3].copy_from_slice(&r[i]);
            m[i][3] = t[i];
        }
        m[3][3] = 1.0;
        Self::new(m)
    }

    /// Row-major 4x4 entries.
    pub fn matrix(&self) -> &[[f64; 4]; 4] {
        &self.m
    }

    pub fn apply(&self, p: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.m[i][0] * p[0] + self.m[i][1] * p[1] + self.m[i][2] * p[2] + self.m[i][3];
        }
        out
    }

    pub fn compose(&self, other: &HandEyeTransform) -> HandEyeTransform {
        // self * other (apply `other` first)
        let a = &self.m;
        let b = &other.m;
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        HandEyeTransform { m }
    }
}

/// Applies the hand-eye transform to a camera-frame point.
pub fn to_robot_frame(p_cam: &[f64; 3], t: &HandEyeTransform) -> [f64; 3] {
    t.apply(p_cam)
}
