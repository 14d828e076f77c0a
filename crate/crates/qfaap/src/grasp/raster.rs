//! Rasterization of grasp labels into dense training targets.

use super::{GraspCandidate, GraspMaps};
use crate::error::{Error, Result};

/// Rasterizes grasp labels into per-pixel quality/angle/width target maps.
///
/// Quality is 1 inside the central one-third (along the box's closing axis)
/// of each label's rotated box and 0 elsewhere; the angle and width maps
/// carry the label's angle and width over the same region. Later labels
/// overwrite earlier ones where regions overlap.
pub fn rasterize_targets(
    labels: &[GraspCandidate],
    height: usize,
    width: usize,
) -> Result<GraspMaps> {
    for (index, label) in labels.iter().enumerate() {
        if !label.inside_canvas(height, width) {
            return Err(Error::LabelOutsideCanvas {
                index,
                height,
                width,
            });
        }
    }

    let mut maps = GraspMaps::zeros(height, width);
    for label in labels {
        paint_region(label, &mut maps);
    }
    Ok(maps)
}

fn paint_region(label: &GraspCandidate, maps: &mut GraspMaps) {
    let (height, width) = maps.quality.dim();
    // Central third along the closing axis, full extent across it.
    let half_u = label.width / 6.0;
    let half_v = label.height / 2.0;
    let (sin_a, cos_a) = label.angle.sin_cos();

    // Bounding box of the shrunken rotated rect, clipped to the canvas.
    let reach = half_u.abs() * cos_a.abs() + half_v.abs() * sin_a.abs();
    let reach_r = half_u.abs() * sin_a.abs() + half_v.abs() * cos_a.abs();
    let col_lo = ((label.col - reach).floor().max(0.0)) as usize;
    let col_hi = ((label.col + reach).ceil().min((width - 1) as f64)) as usize;
    let row_lo = ((label.row - reach_r).floor().max(0.0)) as usize;
    let row_hi = ((label.row + reach_r).ceil().min((height - 1) as f64)) as usize;

    for row in row_lo..=row_hi {
        for col in col_lo..=col_hi {
            let dx = col as f64 - label.col;
            let dy = row as f64 - label.row;
            let u = dx * cos_a + dy * sin_a;
            let v = -dx * sin_a + dy * cos_a;
            // Half-open test keeps the painted pixel count equal to the
            // region's integer extent for integer-aligned boxes.
            if u >= -half_u && u < half_u && v >= -half_v && v < half_v {
                maps.quality[[row, col]] = 1.0;
                maps.angle[[row, col]] = label.angle;
                maps.width[[row, col]] = label.width;
            }
        }
    }
}
