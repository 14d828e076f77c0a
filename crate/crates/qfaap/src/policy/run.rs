//! Policy execution: compose, refine, zero, select, transform.

use ndarray::Array2;

use super::{gripper_map, to_robot_frame, CalibrationBundle, RobotGrasp};
use crate::aqp::Patch;
use crate::error::{Error, Result};
use crate::grasp::{select_best_grasp, GraspCandidate, GraspMaps, SelectionConfig};
use crate::model::GraspNet;
use crate::pqgd::{compose_hand_patch, pqgd_refine, PqgdConfig};
use crate::types::{Frame, HandMask};

/// Policy knobs.
#[derive(Debug, Clone, Copy)]
pub struct PolicyConfig {
    pub pqgd: PqgdConfig,
    pub selection: SelectionConfig,
    /// Dilation radius in pixels applied to the hand mask before quality
    /// zeroing and exclusion. 0 zeroes the bare mask.
    pub dilate_px: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            pqgd: PqgdConfig::default(),
            selection: SelectionConfig::default(),
            dilate_px: 0.0,
        }
    }
}

/// Everything the policy produced, including intermediates for audit.
#[derive(Debug, Clone)]
pub struct PolicyOutput {
    pub grasp2d: GraspCandidate,
    pub robot: RobotGrasp,
    /// Quality of the refined frame before hand zeroing.
    pub quality_before: Array2<f64>,
    /// Quality after hand zeroing (the map the argmax ran on).
    pub quality_after: Array2<f64>,
    /// Frame after patch composition.
    pub patched_frame: Frame,
    /// Frame after the masked refinement.
    pub refined_frame: Frame,
}

/// Sets quality to zero on the (optionally dilated) hand mask.
pub fn zero_hand_quality(quality: &Array2<f64>, mask: &HandMask, dilate_px: f64) -> Array2<f64> {
    let mask = mask.dilate(dilate_px);
    let mut out = quality.clone();
    for ((r, c), v) in out.indexed_iter_mut() {
        if mask.is_set(r, c) {
            *v = 0.0;
        }
    }
    out
}

/// Image-space policy: patch the hand, refine, zero the hand, select.
/// Returns the selected grasp plus audit maps and frames.
pub fn run_policy_2d(
    net: &GraspNet,
    frame: &Frame,
    mask: &HandMask,
    patch: &Patch,
    cfg: &PolicyConfig,
) -> Result<(GraspCandidate, Array2<f64>, Array2<f64>, Frame, Frame)> {
    let (h, w) = (frame.height(), frame.width());
    if (mask.height(), mask.width()) != (h, w) {
        return Err(Error::ShapeMismatch(format!(
            "mask {}x{} vs frame {h}x{w}",
            mask.height(),
            mask.width()
        )));
    }

    let patch_frame = if patch.side() == h && h == w {
        patch.to_frame()
    } else {
        if h != w {
            return Err(Error::ShapeMismatch(format!(
                "policy frames must be square, got {h}x{w}"
            )));
        }
        Frame::from_raw(patch.resized(h).mapv(|v| v.clamp(0.0, 1.0)))
    };

    let patched = compose_hand_patch(frame, &patch_frame, mask)?;
    let refined = pqgd_refine(net, &patched, mask, &cfg.pqgd)?;
    let maps = net.infer(&refined)?;

    let dilated = mask.dilate(cfg.dilate_px);
    let quality_after = zero_hand_quality(&maps.quality, &dilated, 0.0);
    let select_maps = GraspMaps {
        quality: quality_after.clone(),
        angle: maps.angle.clone(),
        width: maps.width.clone(),
    };
    let grasp = select_best_grasp(&select_maps, Some(&dilated), &cfg.selection)?;
    Ok((grasp, maps.quality, quality_after, patched, refined))
}

/// Depth lookup with a 5x5 median fallback around invalid readings.
fn depth_at(depth: &Array2<f64>, row: usize, col: usize) -> Result<f64> {
    let valid = |v: f64| v.is_finite() && v > 0.0;
    let v = depth[[row, col]];
    if valid(v) {
        return Ok(v);
    }
    let (h, w) = depth.dim();
    let mut neighborhood = Vec::new();
    for dr in -2i64..=2 {
        for dc in -2i64..=2 {
            let r = row as i64 + dr;
            let c = col as i64 + dc;
            if r >= 0 && r < h as i64 && c >= 0 && c < w as i64 {
                let v = depth[[r as usize, c as usize]];
                if valid(v) {
                    neighborhood.push(v);
                }
            }
        }
    }
    if neighborhood.is_empty() {
        return Err(Error::InvalidDepth { row, col });
    }
    neighborhood.sort_by(|a, b| a.partial_cmp(b).expect("finite depths"));
    let n = neighborhood.len();
    Ok(if n % 2 == 1 {
        neighborhood[n / 2]
    } else {
        0.5 * (neighborhood[n / 2 - 1] + neighborhood[n / 2])
    })
}

/// Full policy: image-space selection followed by the camera-to-robot
/// transforms. Stage order is fixed; identical inputs give identical
/// outputs.
pub fn run_policy(
    net: &GraspNet,
    frame: &Frame,
    depth: &Array2<f64>,
    mask: &HandMask,
    patch: &Patch,
    calib: &CalibrationBundle,
    cfg: &PolicyConfig,
) -> Result<PolicyOutput> {
    calib.intrinsics.validate()?;
    calib.gripper.validate()?;
    let (h, w) = (frame.height(), frame.width());
    if depth.dim() != (h, w) {
        return Err(Error::ShapeMismatch(format!(
            "depth {:?} vs frame {h}x{w}",
            depth.dim()
        )));
    }

    let (grasp2d, quality_before, quality_after, patched, refined) =
        run_policy_2d(net, frame, mask, patch, cfg)?;

    let row = grasp2d.row as usize;
    let col = grasp2d.col as usize;
    let d = depth_at(depth, row, col)?;
    let p_cam = super::backproject(grasp2d.col, grasp2d.row, d, &calib.intrinsics)?;
    let p_robot = to_robot_frame(&p_cam, &calib.hand_eye);
    let (stroke, theta) = gripper_map(grasp2d.width, grasp2d.angle, &calib.gripper);

    Ok(PolicyOutput {
        grasp2d,
        robot: RobotGrasp {
            x: p_robot[0],
            y: p_robot[1],
            z: p_robot[2],
            stroke,
            theta,
            theta_x: calib.gripper.theta_x,
            theta_y: calib.gripper.theta_y,
        },
        quality_before,
        quality_after,
        patched_frame: patched,
        refined_frame: refined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aqp::init_patch;
    use crate::model::ModelConfig;
    use crate::policy::{CameraIntrinsics, GripperProjection, HandEyeTransform};
    use ndarray::Array3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_frame(n: usize, seed: u64) -> Frame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Frame::new(Array3::from_shape_fn((3, n, n), |_| rng.random::<f64>())).unwrap()
    }

    fn calib() -> CalibrationBundle {
        CalibrationBundle {
            intrinsics: CameraIntrinsics {
                fx: 500.0,
                fy: 500.0,
                cx: 8.0,
                cy: 8.0,
            },
            hand_eye: HandEyeTransform::identity(),
            gripper: GripperProjection::default(),
        }
    }

    #[test]
    fn zero_hand_quality_cases() {
        let q = Array2::from_elem((6, 6), 0.9);
        let empty = HandMask::zeros(6, 6);
        assert_eq!(zero_hand_quality(&q, &empty, 0.0), q);

        let mut full = HandMask::zeros(6, 6);
        for r in 0..6 {
            for c in 0..6 {
                full.set(r, c, true);
            }
        }
        assert!(zero_hand_quality(&q, &full, 0.0).iter().all(|v| *v == 0.0));

        let mut single = HandMask::zeros(6, 6);
        single.set(2, 3, true);
        let out = zero_hand_quality(&q, &single, 0.0);
        for ((r, c), v) in out.indexed_iter() {
            if (r, c) == (2, 3) {
                assert_eq!(*v, 0.0);
            } else {
                assert_eq!(*v, 0.9);
            }
        }
    }

    #[test]
    fn empty_mask_policy_equals_plain_argmax_exactly() {
        let net = GraspNet::init(ModelConfig::tiny(16), 3);
        let frame = random_frame(16, 4);
        let patch = init_patch(16, 5);
        let cfg = PolicyConfig {
            pqgd: PqgdConfig {
                epsilon: 0.0,
                ..Default::default()
            },
            selection: SelectionConfig { smooth_sigma: 0.0 },
            dilate_px: 0.0,
        };
        let (grasp, ..) =
            run_policy_2d(&net, &frame, &HandMask::zeros(16, 16), &patch, &cfg).unwrap();

        let maps = net.infer(&frame).unwrap();
        let plain =
            select_best_grasp(&maps, None, &SelectionConfig { smooth_sigma: 0.0 }).unwrap();
        assert_eq!(grasp, plain);
    }

    #[test]
    fn selected_center_never_on_hand() {
        let net = GraspNet::init(ModelConfig::tiny(16), 6);
        let patch = init_patch(16, 7);
        let mut mask = HandMask::zeros(16, 16);
        for r in 0..16 {
            for c in 0..8 {
                mask.set(r, c, true);
            }
        }
        let cfg = PolicyConfig {
            selection: SelectionConfig { smooth_sigma: 0.0 },
            ..Default::default()
        };
        for seed in 0..10 {
            let frame = random_frame(16, 100 + seed);
            let (grasp, _, q_after, ..) =
                run_policy_2d(&net, &frame, &mask, &patch, &cfg).unwrap();
            assert!(!mask.is_set(grasp.row as usize, grasp.col as usize));
            // Selected pixel attains the max of the zeroed map.
            let max = q_after.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(q_after[[grasp.row as usize, grasp.col as usize]], max);
        }
    }

    #[test]
    fn hand_covering_everything_yields_no_grasp() {
        let net = GraspNet::init(ModelConfig::tiny(16), 8);
        let frame = random_frame(16, 9);
        let patch = init_patch(16, 10);
        let mut mask = HandMask::zeros(16, 16);
        for r in 0..16 {
            for c in 0..16 {
                mask.set(r, c, true);
            }
        }
        let err = run_policy_2d(&net, &frame, &mask, &patch, &PolicyConfig::default());
        assert!(matches!(err, Err(Error::NoCandidate)));
    }

    #[test]
    fn depth_fallback_uses_neighborhood_median() {
        let mut depth = Array2::from_elem((16, 16), 0.5);
        depth[[8, 8]] = f64::NAN;
        depth[[8, 9]] = 0.6;
        depth[[8, 7]] = 0.4;
        let d = depth_at(&depth, 8, 8).unwrap();
        assert!((d - 0.5).abs() < 1e-12);

        // fully invalid neighborhood
        let mut all_bad = Array2::from_elem((16, 16), f64::NAN);
        all_bad[[0, 0]] = 0.5;
        assert!(depth_at(&all_bad, 8, 8).is_err());
    }

    #[test]
    fn full_policy_is_deterministic_and_transforms_grasp() {
        let net = GraspNet::init(ModelConfig::tiny(16), 11);
        let frame = random_frame(16, 12);
        let depth = Array2::from_elem((16, 16), 0.5);
        let mut mask = HandMask::zeros(16, 16);
        for r in 2..6 {
            for c in 2..6 {
                mask.set(r, c, true);
            }
        }
        let patch = init_patch(16, 13);
        let a = run_policy(
            &net,
            &frame,
            &depth,
            &mask,
            &patch,
            &calib(),
            &PolicyConfig::default(),
        )
        .unwrap();
        let b = run_policy(
            &net,
            &frame,
            &depth,
            &mask,
            &patch,
            &calib(),
            &PolicyConfig::default(),
        )
        .unwrap();
        assert_eq!(a.robot, b.robot);
        assert_eq!(a.grasp2d, b.grasp2d);
        // Depth propagates into z through the identity transform.
        assert!((a.robot.z - 0.5).abs() < 1e-12);
        assert!(a.robot.stroke >= 0.0 && a.robot.stroke <= 0.15);
    }
}
