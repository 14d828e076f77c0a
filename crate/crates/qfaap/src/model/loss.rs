//! Training losses: smooth-L1 on the quality head, the twice-angle heads,
//! and the normalized width head.

use ndarray::Array2;

use super::{HeadGrads, HeadMaps};
use crate::error::{Error, Result};
use crate::grasp::GraspMaps;

/// Smooth-L1 penalty of a residual: quadratic inside the unit band, linear
/// outside.
pub fn huber(d: f64) -> f64 {
    if d.abs() < 1.0 {
        0.5 * d * d
    } else {
        d.abs() - 0.5
    }
}

fn huber_deriv(d: f64) -> f64 {
    if d.abs() < 1.0 {
        d
    } else {
        crate::nn::sgn(d)
    }
}

/// Mean smooth-L1 distance between predicted and target quality maps.
pub fn quality_loss(pred: &Array2<f64>, target: &Array2<f64>) -> Result<f64> {
    if pred.dim() != target.dim() {
        return Err(Error::ShapeMismatch(format!(
            "quality maps {:?} vs {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(target.iter())
        .map(|(p, t)| huber(p - t))
        .sum::<f64>()
        / n)
}

/// Per-term decomposition of the training loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub quality: f64,
    pub angle: f64,
    pub width: f64,
}

/// Head-space targets derived from rasterized grasp maps: twice-angle
/// sin/cos inside labeled regions (zero elsewhere) and width normalized by
/// `width_scale`.
fn head_targets(target: &GraspMaps, width_scale: f64) -> HeadMaps {
    HeadMaps::from_target(target, width_scale)
}

/// Total training loss: quality + angle + width terms, each the mean
/// smooth-L1 over all positions (the angle term sums its sin and cos heads).
pub fn total_loss(pred: &HeadMaps, target: &GraspMaps, width_scale: f64) -> Result<LossBreakdown> {
    let t = head_targets(target, width_scale);
    if pred.quality.dim() != t.quality.dim() {
        return Err(Error::ShapeMismatch(format!(
            "prediction {:?} vs target {:?}",
            pred.quality.dim(),
            t.quality.dim()
        )));
    }
    let quality = quality_loss(&pred.quality, &t.quality)?;
    let angle = quality_loss(&pred.sin, &t.sin)? + quality_loss(&pred.cos, &t.cos)?;
    let width = quality_loss(&pred.width_norm, &t.width_norm)?;
    Ok(LossBreakdown {
        total: quality + angle + width,
        quality,
        angle,
        width,
    })
}

/// Gradients of [`total_loss`] with respect to the four head maps.
pub fn total_loss_backward(pred: &HeadMaps, target: &GraspMaps, width_scale: f64) -> HeadGrads {
    let t = head_targets(target, width_scale);
    let n = pred.quality.len() as f64;
    let d = |p: &Array2<f64>, q: &Array2<f64>| {
        let mut g = p.clone();
        g.zip_mut_with(q, |pv, tv| *pv = huber_deriv(*pv - *tv) / n);
        g
    };
    HeadGrads {
        quality: d(&pred.quality, &t.quality),
        sin: d(&pred.sin, &t.sin),
        cos: d(&pred.cos, &t.cos),
        width_norm: d(&pred.width_norm, &t.width_norm),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grasp::{rasterize_targets, GraspCandidate};

    #[test]
    fn huber_branch_values() {
        // |d| < 1: quadratic
        assert!((huber(0.3 - 1.0) - 0.245).abs() < 1e-12);
        // |d| >= 1: linear
        assert!((huber(3.0 - 1.0) - 1.5).abs() < 1e-12);
        assert_eq!(huber(0.0), 0.0);
    }

    #[test]
    fn quality_loss_single_position_cases() {
        let p = Array2::from_elem((1, 1), 0.3);
        let t = Array2::from_elem((1, 1), 1.0);
        assert!((quality_loss(&p, &t).unwrap() - 0.245).abs() < 1e-12);

        let p = Array2::from_elem((1, 1), 3.0);
        assert!((quality_loss(&p, &t).unwrap() - 1.5).abs() < 1e-12);

        assert_eq!(quality_loss(&t, &t).unwrap(), 0.0);
    }

    #[test]
    fn quality_loss_rejects_shape_mismatch() {
        let p = Array2::zeros((2, 2));
        let t = Array2::zeros((2, 3));
        assert!(quality_loss(&p, &t).is_err());
    }

    fn toy_target() -> GraspMaps {
        let label = GraspCandidate::new(8.0, 8.0, 9.0, 4.0, 0.5, 1.0).unwrap();
        rasterize_targets(&[label], 16, 16).unwrap()
    }

    #[test]
    fn perfect_prediction_has_zero_loss() {
        let target = toy_target();
        let pred = HeadMaps::from_target(&target, 150.0);
        let b = total_loss(&pred, &target, 150.0).unwrap();
        assert_eq!(b.total, 0.0);
        assert_eq!(b.quality, 0.0);
        assert_eq!(b.angle, 0.0);
        assert_eq!(b.width, 0.0);
    }

    #[test]
    fn only_quality_differs_reduces_to_quality_term() {
        let target = toy_target();
        let mut pred = HeadMaps::from_target(&target, 150.0);
        pred.quality[[0, 0]] = 0.7;
        let b = total_loss(&pred, &target, 150.0).unwrap();
        assert_eq!(b.angle, 0.0);
        assert_eq!(b.width, 0.0);
        assert!((b.total - b.quality).abs() < 1e-15);
    }

    #[test]
    fn breakdown_sums_and_matches_pixel_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let target = toy_target();
        let pred = HeadMaps {
            quality: Array2::from_shape_fn((16, 16), |_| rng.random::<f64>()),
            sin: Array2::from_shape_fn((16, 16), |_| rng.random_range(-2.0..2.0)),
            cos: Array2::from_shape_fn((16, 16), |_| rng.random_range(-2.0..2.0)),
            width_norm: Array2::from_shape_fn((16, 16), |_| rng.random::<f64>()),
        };
        let b = total_loss(&pred, &target, 150.0).unwrap();
        assert!((b.total - (b.quality + b.angle + b.width)).abs() < 1e-12);
        assert!(b.quality >= 0.0 && b.angle >= 0.0 && b.width >= 0.0);

        // Independent per-pixel summation over the written-out definition.
        let t = HeadMaps::from_target(&target, 150.0);
        let n = 256.0;
        let mut acc = 0.0;
        for r in 0..16 {
            for c in 0..16 {
                acc += huber(pred.quality[[r, c]] - t.quality[[r, c]]) / n;
                acc += huber(pred.sin[[r, c]] - t.sin[[r, c]]) / n;
                acc += huber(pred.cos[[r, c]] - t.cos[[r, c]]) / n;
                acc += huber(pred.width_norm[[r, c]] - t.width_norm[[r, c]]) / n;
            }
        }
        let rel = (b.total - acc).abs() / acc.abs().max(1e-300);
        assert!(rel < 1e-10, "oracle {acc} vs breakdown {}", b.total);
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(19);
        let target = toy_target();
        let pred = HeadMaps {
            quality: Array2::from_shape_fn((16, 16), |_| rng.random::<f64>()),
            sin: Array2::from_shape_fn((16, 16), |_| rng.random_range(-2.0..2.0)),
            cos: Array2::from_shape_fn((16, 16), |_| rng.random_range(-2.0..2.0)),
            width_norm: Array2::from_shape_fn((16, 16), |_| rng.random::<f64>()),
        };
        let g = total_loss_backward(&pred, &target, 150.0);
        let h = 1e-6;
        for &(r, c) in &[(0usize, 0usize), (8, 8), (15, 3)] {
            let mut p = pred.clone();
            p.sin[[r, c]] += h;
            let lp = total_loss(&p, &target, 150.0).unwrap().total;
            p.sin[[r, c]] -= 2.0 * h;
            let lm = total_loss(&p, &target, 150.0).unwrap().total;
            let fd = (lp - lm) / (2.0 * h);
            assert!((fd - g.sin[[r, c]]).abs() < 1e-8);
        }
    }
}
