//! Differentiable fully-convolutional grasp network: forward inference,
//! training losses, the training loop, weight serialization, and grasp-metric
//! evaluation.

mod eval;
mod loss;
mod net;
mod train;
mod weights;

pub use eval::{evaluate_oacc, oracle_infer};
pub use loss::{huber, quality_loss, total_loss, total_loss_backward, LossBreakdown};
pub use net::{GraspNet, HeadGrads, NetForward};
pub use train::{train, EpochMetrics, OptimizerKind, TrainConfig};
pub use weights::{load_weights, save_weights, WeightsMeta};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grasp::{wrap_half_pi, GraspMaps};

/// Network architecture selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchKind {
    /// Encoder (3 stride-2 convs), 3 dilated residual blocks, decoder
    /// (3 transposed convs), four 1x1 heads.
    RefFcn,
    /// Two plain convolutions; used for fast gradient checks.
    Tiny,
}

impl ArchKind {
    pub fn id(&self) -> &'static str {
        match self {
            ArchKind::RefFcn => "ref-fcn",
            ArchKind::Tiny => "tiny",
        }
    }

    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "ref-fcn" => Ok(ArchKind::RefFcn),
            "tiny" => Ok(ArchKind::Tiny),
            other => Err(Error::InvalidInput(format!("unknown architecture {other}"))),
        }
    }
}

/// Model configuration.
#[derive(Debug, Clone, Copy)]
pub struct ModelConfig {
    /// Square input side in pixels.
    pub input_size: usize,
    pub arch: ArchKind,
    /// Decoded width span: width head output in [0,1] maps to [0, width_scale] px.
    pub width_scale: f64,
}

impl ModelConfig {
    /// Production configuration; input side restricted to 224 or 300.
    pub fn ref_fcn(input_size: usize) -> Result<Self> {
        if input_size != 224 && input_size != 300 {
            return Err(Error::InvalidInput(format!(
                "ref-fcn input size must be 224 or 300, got {input_size}"
            )));
        }
        Ok(ModelConfig {
            input_size,
            arch: ArchKind::RefFcn,
            width_scale: 150.0,
        })
    }

    /// Test configuration; any square input size.
    pub fn tiny(input_size: usize) -> Self {
        ModelConfig {
            input_size,
            arch: ArchKind::Tiny,
            width_scale: 150.0,
        }
    }
}

/// Per-pixel head outputs of the network.
///
/// `quality` is the raw regression head (clamped to [0,1] only at decode,
/// mirroring how dense grasp models train this head); `width_norm` is
/// post-sigmoid in `(0,1)`; `sin` and `cos` are the raw twice-angle heads.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadMaps {
    pub quality: Array2<f64>,
    pub sin: Array2<f64>,
    pub cos: Array2<f64>,
    pub width_norm: Array2<f64>,
}

impl HeadMaps {
    /// Decodes the heads into grasp maps: angle from the twice-angle
    /// parameterization, width rescaled to pixels, quality clamped to [0,1].
    pub fn to_grasp_maps(&self, width_scale: f64) -> GraspMaps {
        let (h, w) = self.quality.dim();
        let mut angle = Array2::zeros((h, w));
        for r in 0..h {
            for c in 0..w {
                angle[[r, c]] = wrap_half_pi(0.5 * self.sin[[r, c]].atan2(self.cos[[r, c]]));
            }
        }
        GraspMaps {
            quality: self.quality.mapv(|v| v.clamp(0.0, 1.0)),
            angle,
            width: self.width_norm.mapv(|v| v * width_scale),
        }
    }

    /// Encodes target grasp maps as ideal head outputs: the exact inverse of
    /// the loss-side target construction. Used by oracle models in tests.
    pub fn from_target(target: &GraspMaps, width_scale: f64) -> HeadMaps {
        let (h, w) = target.quality.dim();
        let mut sin = Array2::zeros((h, w));
        let mut cos = Array2::zeros((h, w));
        for r in 0..h {
            for c in 0..w {
                if target.quality[[r, c]] > 0.5 {
                    sin[[r, c]] = (2.0 * target.angle[[r, c]]).sin();
                    cos[[r, c]] = (2.0 * target.angle[[r, c]]).cos();
                }
            }
        }
        HeadMaps {
            quality: target.quality.clone(),
            sin,
            cos,
            width_norm: target.width.mapv(|v| v / width_scale),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_unsupported_ref_size() {
        assert!(ModelConfig::ref_fcn(224).is_ok());
        assert!(ModelConfig::ref_fcn(300).is_ok());
        assert!(ModelConfig::ref_fcn(256).is_err());
    }

    #[test]
    fn target_roundtrip_through_heads() {
        use crate::grasp::{rasterize_targets, GraspCandidate};
        let label = GraspCandidate::new(16.0, 16.0, 12.0, 6.0, 0.4, 1.0).unwrap();
        let target = rasterize_targets(&[label], 32, 32).unwrap();
        let heads = HeadMaps::from_target(&target, 150.0);
        let decoded = heads.to_grasp_maps(150.0);
        assert_eq!(decoded.quality, target.quality);
        for r in 0..32 {
            for c in 0..32 {
                if target.quality[[r, c]] > 0.5 {
                    assert!((decoded.angle[[r, c]] - target.angle[[r, c]]).abs() < 1e-12);
                    assert!((decoded.width[[r, c]] - target.width[[r, c]]).abs() < 1e-9);
                }
            }
        }
    }
}
