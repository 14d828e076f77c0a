//! Grasp representations, target rasterization, grasp selection from quality
//! maps, and the rectangle evaluation metric.

mod metric;
mod raster;
mod select;

pub use metric::{rectangle_match, rotated_iou, RectMetricConfig};
pub use raster::rasterize_targets;
pub use select::{select_best_grasp, smooth_quality, SelectionConfig};

use ndarray::Array2;

use crate::error::{Error, Result};

use std::f64::consts::{FRAC_PI_2, PI};

/// Parallel-jaw grasp as a rotated box in image coordinates.
///
/// `width` spans the gripper-closing axis (at `angle` from horizontal) and
/// `height` the jaw-plate axis; `height` is used for visualization and the
/// rectangle metric only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspCandidate {
    /// Pixel column of the box center.
    pub col: f64,
    /// Pixel row of the box center.
    pub row: f64,
    /// Box extent in pixels along the closing axis.
    pub width: f64,
    /// Box extent in pixels across the closing axis.
    pub height: f64,
    /// Radians in `[-pi/2, pi/2)` relative to horizontal.
    pub angle: f64,
    /// Score in `[0,1]`.
    pub quality: f64,
}

impl GraspCandidate {
    pub fn new(col: f64, row: f64, width: f64, height: f64, angle: f64, quality: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::InvalidInput(format!(
                "grasp box extents must be positive, got {width}x{height}"
            )));
        }
        if !(-FRAC_PI_2..FRAC_PI_2).contains(&angle) {
            return Err(Error::InvalidInput(format!(
                "grasp angle {angle} outside [-pi/2, pi/2)"
            )));
        }
        if !(0.0..=1.0).contains(&quality) {
            return Err(Error::InvalidInput(format!(
                "grasp quality {quality} outside [0,1]"
            )));
        }
        Ok(GraspCandidate {
            col,
            row,
            width,
            height,
            angle,
            quality,
        })
    }

    /// Corner coordinates `(col,row)` of the rotated box, counter-clockwise
    /// in array orientation starting from the corner at `(-w/2, -h/2)` in the
    /// box frame.
    pub fn corners(&self) -> [[f64; 2]; 4] {
        corners_of(self.col, self.row, self.width, self.height, self.angle)
    }

    /// True if all four corners lie inside the `height x width` canvas.
    pub fn inside_canvas(&self, height: usize, width: usize) -> bool {
        self.corners().iter().all(|c| {
            c[0] >= 0.0 && c[0] <= (width - 1) as f64 && c[1] >= 0.0 && c[1] <= (height - 1) as f64
        })
    }
}

pub(crate) fn corners_of(col: f64, row: f64, w: f64, h: f64, angle: f64) -> [[f64; 2]; 4] {
    let (s, c) = angle.sin_cos();
    // Unit vectors of the box axes in (col,row) coordinates.
    let ux = [c, s];
    let uy = [-s, c];
    let hw = w / 2.0;
    let hh = h / 2.0;
    let mk = |a: f64, b: f64| [col + a * ux[0] + b * uy[0], row + a * ux[1] + b * uy[1]];
    [mk(-hw, -hh), mk(hw, -hh), mk(hw, hh), mk(-hw, hh)]
}

/// Wraps an angle to `[-pi/2, pi/2)` modulo pi.
pub fn wrap_half_pi(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(PI);
    if a >= FRAC_PI_2 {
        a -= PI;
    }
    a
}

/// Absolute angle difference of two grasp orientations, wrapped to `[0, pi/2]`.
/// A grasp box is symmetric under 180 degree rotation, so differences are
/// taken modulo pi.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Per-pixel grasp maps: quality in `[0,1]`, angle in radians, width in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspMaps {
    pub quality: Array2<f64>,
    pub angle: Array2<f64>,
    pub width: Array2<f64>,
}

impl GraspMaps {
    pub fn zeros(height: usize, width: usize) -> Self {
        GraspMaps {
            quality: Array2::zeros((height, width)),
            angle: Array2::zeros((height, width)),
            width: Array2::zeros((height, width)),
        }
    }

    pub fn height(&self) -> usize {
        self.quality.dim().0
    }

    pub fn width_px(&self) -> usize {
        self.quality.dim().1
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.quality.dim();
        if self.angle.dim() != dim || self.width.dim() != dim {
            return Err(Error::ShapeMismatch(format!(
                "grasp maps disagree: quality {:?}, angle {:?}, width {:?}",
                dim,
                self.angle.dim(),
                self.width.dim()
            )));
        }
        if self.quality.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(Error::InvalidInput("quality values outside [0,1]".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidate_validates_ranges() {
        assert!(GraspCandidate::new(5.0, 5.0, 10.0, 4.0, 0.3, 0.9).is_ok());
        assert!(GraspCandidate::new(5.0, 5.0, 0.0, 4.0, 0.3, 0.9).is_err());
        assert!(GraspCandidate::new(5.0, 5.0, 10.0, 4.0, FRAC_PI_2, 0.9).is_err());
        assert!(GraspCandidate::new(5.0, 5.0, 10.0, 4.0, 0.3, 1.1).is_err());
    }

    #[test]
    fn corners_axis_aligned() {
        let g = GraspCandidate::new(50.0, 40.0, 30.0, 12.0, 0.0, 1.0).unwrap();
        let c = g.corners();
        assert_eq!(c[0], [35.0, 34.0]);
        assert_eq!(c[1], [65.0, 34.0]);
        assert_eq!(c[2], [65.0, 46.0]);
        assert_eq!(c[3], [35.0, 46.0]);
    }

    #[test]
    fn angle_difference_wraps_mod_pi() {
        let a = 89f64.to_radians();
        let b = -89f64.to_radians();
        assert!((angle_difference(a, b) - 2f64.to_radians()).abs() < 1e-12);
        assert_eq!(angle_difference(0.3, 0.3), 0.0);
    }

    #[test]
    fn wrap_half_pi_boundaries() {
        assert!((wrap_half_pi(FRAC_PI_2) - (-FRAC_PI_2)).abs() < 1e-12);
        assert!((wrap_half_pi(PI + 0.1) - 0.1).abs() < 1e-12);
    }
}
