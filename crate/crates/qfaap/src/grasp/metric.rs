//! Rectangle evaluation metric: rotated-box IoU plus an orientation gate.

use super::{angle_difference, GraspCandidate};
use crate::error::{Error, Result};

/// Thresholds of the rectangle metric.
#[derive(Debug, Clone, Copy)]
pub struct RectMetricConfig {
    /// Minimum intersection-over-union (exclusive) with some label.
    pub iou_threshold: f64,
    /// Maximum orientation offset in radians (exclusive).
    pub angle_threshold: f64,
}

impl Default for RectMetricConfig {
    fn default() -> Self {
        RectMetricConfig {
            iou_threshold: 0.25,
            angle_threshold: std::f64::consts::FRAC_PI_6,
        }
    }
}

impl RectMetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.iou_threshold) || self.iou_threshold == 0.0 {
            return Err(Error::InvalidInput(format!(
                "iou_threshold {} outside (0,1)",
                self.iou_threshold
            )));
        }
        if self.angle_threshold <= 0.0 || self.angle_threshold > std::f64::consts::FRAC_PI_2 {
            return Err(Error::InvalidInput(format!(
                "angle_threshold {} outside (0, pi/2]",
                self.angle_threshold
            )));
        }
        Ok(())
    }
}

/// True iff some label passes both the IoU and the orientation gate.
/// Empty label lists never match.
pub fn rectangle_match(
    pred: &GraspCandidate,
    labels: &[GraspCandidate],
    cfg: &RectMetricConfig,
) -> bool {
    labels.iter().any(|label| {
        angle_difference(pred.angle, label.angle) < cfg.angle_threshold
            && rotated_iou(pred, label) > cfg.iou_threshold
    })
}

/// Exact intersection-over-union of two rotated boxes by convex polygon
/// clipping. Symmetric, in `[0,1]`.
pub fn rotated_iou(a: &GraspCandidate, b: &GraspCandidate) -> f64 {
    let pa = a.corners().to_vec();
    let pb = b.corners().to_vec();
    let inter = clip_convex(&pa, &pb);
    let inter_area = polygon_area(&inter);
    let area_a = a.width * a.height;
    let area_b = b.width * b.height;
    let union = area_a + area_b - inter_area;
    if union <= 0.0 {
        return 0.0;
    }
    (inter_area / union).clamp(0.0, 1.0)
}

/// Sutherland-Hodgman clipping of convex `subject` against convex `clip`
/// (both counter-clockwise in array orientation).
fn clip_convex(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut output = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % n];
        let input = std::mem::take(&mut output);
        let m = input.len();
        for j in 0..m {
            let p = input[j];
            let q = input[(j + 1) % m];
            let p_in = side(a, b, p) >= 0.0;
            let q_in = side(a, b, q) >= 0.0;
            if p_in {
                output.push(p);
                if !q_in {
                    output.push(intersect(a, b, p, q));
                }
            } else if q_in {
                output.push(intersect(a, b, p, q));
            }
        }
    }
    output
}

fn side(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

fn intersect(a: [f64; 2], b: [f64; 2], p: [f64; 2], q: [f64; 2]) -> [f64; 2] {
    let d1 = side(a, b, p);
    let d2 = side(a, b, q);
    let t = d1 / (d1 - d2);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let n = poly.len();
    let mut acc = 0.0;
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        acc += p[0] * q[1] - q[0] * p[1];
    }
    (acc / 2.0).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boxed(col: f64, row: f64, w: f64, h: f64, angle: f64) -> GraspCandidate {
        GraspCandidate::new(col, row, w, h, angle, 1.0).unwrap()
    }

    #[test]
    fn identical_boxes_have_unit_iou() {
        let a = boxed(50.0, 50.0, 30.0, 12.0, 0.4);
        assert!((rotated_iou(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_boxes_have_zero_iou() {
        let a = boxed(10.0, 10.0, 8.0, 4.0, 0.0);
        let b = boxed(60.0, 60.0, 8.0, 4.0, 1.0);
        assert_eq!(rotated_iou(&a, &b), 0.0);
    }

    #[test]
    fn offset_squares_give_one_third() {
        // 10x10 squares offset by 5 columns: overlap 50, union 150.
        let a = boxed(20.0, 20.0, 10.0, 10.0, 0.0);
        let b = boxed(25.0, 20.0, 10.0, 10.0, 0.0);
        assert!((rotated_iou(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn iou_symmetric_and_rotation_invariant() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let a = boxed(
                rng.random_range(40.0..60.0),
                rng.random_range(40.0..60.0),
                rng.random_range(5.0..30.0),
                rng.random_range(5.0..30.0),
                rng.random_range(-1.5..1.5),
            );
            let b = boxed(
                rng.random_range(40.0..60.0),
                rng.random_range(40.0..60.0),
                rng.random_range(5.0..30.0),
                rng.random_range(5.0..30.0),
                rng.random_range(-1.5..1.5),
            );
            let ab = rotated_iou(&a, &b);
            let ba = rotated_iou(&b, &a);
            assert!((ab - ba).abs() < 1e-9);

            // Rotating both boxes by the same angle about the same center
            // leaves IoU unchanged.
            let phi: f64 = rng.random_range(-1.0..1.0);
            let rotate = |g: &GraspCandidate| {
                let (s, c) = phi.sin_cos();
                let cx = 50.0;
                let cy = 50.0;
                let dx = g.col - cx;
                let dy = g.row - cy;
                GraspCandidate {
                    col: cx + c * dx - s * dy,
                    row: cy + s * dx + c * dy,
                    angle: super::super::wrap_half_pi(g.angle + phi),
                    ..*g
                }
            };
            let ab_rot = rotated_iou(&rotate(&a), &rotate(&b));
            assert!(
                (ab - ab_rot).abs() < 1e-9,
                "iou changed under joint rotation: {ab} vs {ab_rot}"
            );
        }
    }

    #[test]
    fn match_accepts_identity_and_gates_angle() {
        let cfg = RectMetricConfig::default();
        let label = boxed(50.0, 50.0, 30.0, 12.0, 0.2);
        assert!(rectangle_match(&label, &[label], &cfg));

        let mut off = label;
        off.angle = super::super::wrap_half_pi(0.2 + 35f64.to_radians());
        assert!(!rectangle_match(&off, &[label], &cfg));
    }

    #[test]
    fn match_rejects_empty_labels() {
        let cfg = RectMetricConfig::default();
        let pred = boxed(50.0, 50.0, 30.0, 12.0, 0.0);
        assert!(!rectangle_match(&pred, &[], &cfg));
    }

    #[test]
    fn one_third_overlap_passes_quarter_threshold() {
        let cfg = RectMetricConfig::default();
        let label = boxed(20.0, 20.0, 10.0, 10.0, 0.0);
        let pred = boxed(25.0, 20.0, 10.0, 10.0, 0.0);
        assert!(rectangle_match(&pred, &[label], &cfg));
    }
}
