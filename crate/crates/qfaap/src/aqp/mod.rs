//! Adversarial quality patch: initialization, placement, losses,
//! optimization against a frozen model, and the patch-region quality metric.

mod loss;
mod optimize;
mod qacc;

pub use loss::{difference_loss, quality_patch_loss, tv_loss, tv_loss_grad};
pub use optimize::{optimize_patch, AqpEpoch};
pub use qacc::{qacc, QaccOptions};

use std::path::Path;

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::resize::resize_bilinear;
use crate::types::Frame;

/// Patch pixels in `[0,1]` plus provenance.
#[derive(Debug, Clone)]
pub struct Patch {
    /// `(3, S, S)` with S equal to the target model's input size.
    pub pixels: Array3<f64>,
    pub meta: PatchMeta,
}

/// Sidecar provenance stored next to the patch image.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PatchMeta {
    pub model_id: String,
    pub dataset_id: String,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub epochs: usize,
    pub seed: u64,
    pub final_qacc: f64,
    #[serde(default)]
    pub config_hash: String,
}

impl Patch {
    pub fn side(&self) -> usize {
        self.pixels.dim().1
    }

    /// Patch as a frame (for composing over same-size images).
    pub fn to_frame(&self) -> Frame {
        Frame::from_raw(self.pixels.clone())
    }

    /// Bilinearly resizes the patch pixels to an arbitrary square side.
    pub fn resized(&self, side: usize) -> Array3<f64> {
        resize_bilinear(&self.pixels, side, side)
    }
}

/// Uniform-random patch in `[0,1]^3`, deterministic under the seed.
pub fn init_patch(side: usize, seed: u64) -> Patch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels = Array3::from_shape_fn((3, side, side), |_| rng.random::<f64>());
    Patch {
        pixels,
        meta: PatchMeta {
            seed,
            ..Default::default()
        },
    }
}

/// A sampled patch pose inside a frame: scale plus top-left corner of the
/// `side x side` region it covers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchPlacement {
    pub scale: f64,
    pub top: usize,
    pub left: usize,
    pub side: usize,
}

impl PatchPlacement {
    pub fn validate_for(&self, height: usize, width: usize) -> Result<()> {
        if self.side == 0 {
            return Err(Error::InvalidInput("zero-area patch placement".into()));
        }
        if self.top + self.side > height || self.left + self.side > width {
            return Err(Error::InvalidInput(format!(
                "placement {}x{} at ({},{}) leaves the {height}x{width} frame",
                self.side, self.side, self.top, self.left
            )));
        }
        Ok(())
    }
}

/// Samples a uniform scale in `scale_range` and a uniform in-bounds position.
pub fn sample_placement(
    rng: &mut ChaCha8Rng,
    patch_side: usize,
    height: usize,
    width: usize,
    scale_range: (f64, f64),
) -> PatchPlacement {
    let scale = rng.random_range(scale_range.0..=scale_range.1);
    let side = ((patch_side as f64) * scale).round().max(1.0) as usize;
    let side = side.min(height).min(width);
    let top = if height > side {
        rng.random_range(0..=height - side)
    } else {
        0
    };
    let left = if width > side {
        rng.random_range(0..=width - side)
    } else {
        0
    };
    PatchPlacement {
        scale,
        top,
        left,
        side,
    }
}

/// Pastes the bilinearly-rescaled patch over the placement region (full
/// replacement) and returns the composited frame plus the region mask.
pub fn place_patch(
    frame: &Frame,
    patch: &Patch,
    placement: &PatchPlacement,
) -> Result<(Frame, Array2<u8>)> {
    let (h, w) = (frame.height(), frame.width());
    placement.validate_for(h, w)?;
    let scaled = resize_bilinear(&patch.pixels, placement.side, placement.side);
    let mut out = frame.clone();
    let mut region = Array2::<u8>::zeros((h, w));
    for r in 0..placement.side {
        for c in 0..placement.side {
            let rr = placement.top + r;
            let cc = placement.left + c;
            region[[rr, cc]] = 1;
            for ch in 0..3 {
                out.data_mut()[[ch, rr, cc]] = scaled[[ch, r, c]].clamp(0.0, 1.0);
            }
        }
    }
    Ok((out, region))
}

/// Optimizer parameters; defaults follow the experimental protocol
/// (alpha 0.1, beta 0.1, gamma 0.5, lr 0.03 decayed x0.1 at epochs 30/40).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AqpConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub lr_decay_epochs: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub qacc_threshold: f64,
    pub scale_range: (f64, f64),
    pub seed: u64,
}

impl Default for AqpConfig {
    fn default() -> Self {
        AqpConfig {
            alpha: 0.1,
            beta: 0.1,
            gamma: 0.5,
            learning_rate: 0.03,
            lr_decay_epochs: vec![30, 40],
            epochs: 50,
            batch_size: 8,
            qacc_threshold: 0.5,
            scale_range: (0.1, 1.0),
            seed: 0,
        }
    }
}

impl AqpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || self.beta < 0.0 || self.gamma < 0.0 {
            return Err(Error::InvalidInput(
                "alpha, beta, gamma must be non-negative".into(),
            ));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidInput(
                "epochs and batch size must be positive".into(),
            ));
        }
        if !(self.scale_range.0 > 0.0 && self.scale_range.0 <= self.scale_range.1) {
            return Err(Error::InvalidInput(format!(
                "bad scale range {:?}",
                self.scale_range
            )));
        }
        Ok(())
    }
}

/// Saves the patch as an 8-bit PNG plus a JSON sidecar with its provenance.
pub fn save_patch(path: &Path, patch: &Patch) -> Result<()> {
    let text = vec![
        ("config_hash".to_string(), patch.meta.config_hash.clone()),
        ("seed".to_string(), patch.meta.seed.to_string()),
    ];
    crate::imgio::save_frame_png(path, &patch.to_frame(), &text)?;
    let sidecar = path.with_extension("json");
    let bytes = serde_json::to_vec_pretty(&patch.meta)?;
    crate::imgio::write_atomic(&sidecar, &bytes)
}

/// Loads a patch PNG and, when present, its JSON sidecar.
pub fn load_patch(path: &Path) -> Result<Patch> {
    let frame = crate::imgio::load_frame_png(path)?;
    if frame.height() != frame.width() {
        return Err(Error::InvalidInput("patch must be square".into()));
    }
    let sidecar = path.with_extension("json");
    let meta = if sidecar.exists() {
        let bytes = std::fs::read(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        serde_json::from_slice(&bytes)?
    } else {
        PatchMeta::default()
    };
    Ok(Patch {
        pixels: frame.into_inner(),
        meta,
    })
}
