//! Patch losses: region quality (mean/variance), total variation, and the
//! inside/outside difference term.

use ndarray::Array3;

use crate::error::{Error, Result};

/// Batch-mean of `-mean(Q_region) + alpha * var(Q_region)` with population
/// variance. Each slice holds the quality values inside one sample's patch
/// region.
pub fn quality_patch_loss(regions: &[Vec<f64>], alpha: f64) -> Result<f64> {
    if regions.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let mut acc = 0.0;
    for region in regions {
        let (mean, var) = mean_var(region)?;
        acc += -mean + alpha * var;
    }
    Ok(acc / regions.len() as f64)
}

pub(crate) fn mean_var(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::InvalidInput("empty patch region".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, var))
}

/// Batch-mean of `|min(Q_region) - max(Q_outside)|`. A sample whose patch
/// covers the whole image contributes 0 with a warning.
pub fn difference_loss(regions: &[Vec<f64>], outsides: &[Vec<f64>]) -> Result<f64> {
    if regions.is_empty() || regions.len() != outsides.len() {
        return Err(Error::InvalidInput(format!(
            "batch sizes disagree: {} regions vs {} outsides",
            regions.len(),
            outsides.len()
        )));
    }
    let mut acc = 0.0;
    for (region, outside) in regions.iter().zip(outsides) {
        if region.is_empty() {
            return Err(Error::InvalidInput("empty patch region".into()));
        }
        if outside.is_empty() {
            log::warn!("difference loss: patch covers the whole image, term is 0");
            continue;
        }
        let min_in = region.iter().copied().fold(f64::INFINITY, f64::min);
        let max_out = outside.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        acc += (min_in - max_out).abs();
    }
    Ok(acc / regions.len() as f64)
}

/// Anisotropic total variation: mean over pixels of the per-channel
/// euclidean norm of the forward differences, summed across channels.
/// Boundary differences are 0.
pub fn tv_loss(patch: &Array3<f64>) -> f64 {
    tv_loss_grad(patch).0
}

/// Total variation and its gradient with respect to the patch pixels.
pub fn tv_loss_grad(patch: &Array3<f64>) -> (f64, Array3<f64>) {
    let (c, h, w) = patch.dim();
    let mut grad = Array3::<f64>::zeros((c, h, w));
    let mut acc = 0.0;
    let norm = 1.0 / (h * w) as f64;
    for ch in 0..c {
        for r in 0..h {
            for col in 0..w {
                let p = patch[[ch, r, col]];
                let dh = if col + 1 < w {
                    p - patch[[ch, r, col + 1]]
                } else {
                    0.0
                };
                let dv = if r + 1 < h {
                    p - patch[[ch, r + 1, col]]
                } else {
                    0.0
                };
                let g = (dh * dh + dv * dv).sqrt();
                acc += g;
                if g > 0.0 {
                    let s = norm / g;
                    grad[[ch, r, col]] += (dh + dv) * s;
                    if col + 1 < w {
                        grad[[ch, r, col + 1]] -= dh * s;
                    }
                    if r + 1 < h {
                        grad[[ch, r + 1, col]] -= dv * s;
                    }
                }
            }
        }
    }
    (acc * norm, grad)
}
