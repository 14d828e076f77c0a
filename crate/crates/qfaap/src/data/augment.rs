//! Joint raster/label augmentation: right-angle rotations and center zoom.

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DatasetRecord;
use crate::grasp::{wrap_half_pi, GraspCandidate};
use crate::resize::{resize_bilinear, resize_nearest};
use crate::types::{Frame, HandMask};

/// Seeded augmentation: zoom in [0.5, 1.0] and a quarter-turn rotation, both
/// applied jointly to rasters and labels. Labels leaving the canvas are
/// dropped; if none survive, the draw is retried up to 5 times before
/// returning the record unaugmented.
pub fn augment(record: &DatasetRecord, seed: u64) -> DatasetRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..5 {
        let zoom = rng.random_range(0.5..=1.0);
        let quarter_turns = rng.random_range(0..4u8);
        let out = augment_with(record, zoom, quarter_turns);
        if !out.labels.is_empty() {
            return out;
        }
    }
    record.clone()
}

/// Deterministic augmentation with explicit parameters. `quarter_turns`
/// counts 90-degree rotations; `zoom` in (0, 1] crops the central
/// `zoom * side` window and rescales it back.
pub fn augment_with(record: &DatasetRecord, zoom: f64, quarter_turns: u8) -> DatasetRecord {
    let rotated = rotate_record(record, quarter_turns % 4);
    zoom_record(&rotated, zoom)
}

fn rot90_array2(src: &Array2<f64>) -> Array2<f64> {
    let (h, w) = src.dim();
    Array2::from_shape_fn((w, h), |(r, c)| src[[h - 1 - c, r]])
}

fn rotate_record(record: &DatasetRecord, quarter_turns: u8) -> DatasetRecord {
    if quarter_turns == 0 {
        return record.clone();
    }
    let mut out = record.clone();
    for _ in 0..quarter_turns {
        let (h, _w) = (out.rgb.height(), out.rgb.width());

        let data = out.rgb.data();
        let (c, hh, ww) = data.dim();
        let mut rot = Array3::zeros((c, ww, hh));
        for ch in 0..c {
            let plane = data.index_axis(ndarray::Axis(0), ch).to_owned();
            rot.index_axis_mut(ndarray::Axis(0), ch)
                .assign(&rot90_array2(&plane));
        }
        out.rgb = Frame::from_raw(rot);

        out.depth = out.depth.as_ref().map(rot90_array2);
        out.hand_mask = out.hand_mask.as_ref().map(|m| {
            let f = m.data().mapv(|v| v as f64);
            let r = rot90_array2(&f);
            HandMask::new(r.mapv(|v| v as u8)).expect("rotation preserves binary mask")
        });

        out.labels = out
            .labels
            .iter()
            .map(|l| GraspCandidate {
                col: (h - 1) as f64 - l.row,
                row: l.col,
                angle: wrap_half_pi(l.angle + std::f64::consts::FRAC_PI_2),
                ..*l
            })
            .collect();
    }
    out
}

fn zoom_record(record: &DatasetRecord, zoom: f64) -> DatasetRecord {
    if (zoom - 1.0).abs() < 1e-12 {
        return record.clone();
    }
    let h = record.rgb.height();
    let w = record.rgb.width();
    let side_h = ((h as f64) * zoom).round().max(1.0) as usize;
    let side_w = ((w as f64) * zoom).round().max(1.0) as usize;
    let off_r = (h - side_h) / 2;
    let off_c = (w - side_w) / 2;

    let crop3 = |a: &Array3<f64>| {
        a.slice(ndarray::s![
            ..,
            off_r..off_r + side_h,
            off_c..off_c + side_w
        ])
        .to_owned()
    };
    let crop2 = |a: &Array2<f64>| {
        a.slice(ndarray::s![off_r..off_r + side_h, off_c..off_c + side_w])
            .to_owned()
    };

    let rgb = resize_bilinear(&crop3(record.rgb.data()), h, w)
        .mapv(|v| v.clamp(0.0, 1.0));
    let depth = record
        .depth
        .as_ref()
        .map(|d| resize_nearest(&crop2(d), h, w));
    let hand_mask = record.hand_mask.as_ref().map(|m| {
        let f = m.data().mapv(|v| v as f64);
        HandMask::new(resize_nearest(&crop2(&f), h, w).mapv(|v| v as u8))
            .expect("nearest preserves binary mask")
    });

    let scale_r = h as f64 / side_h as f64;
    let scale_c = w as f64 / side_w as f64;
    let scale = (scale_r + scale_c) / 2.0;
    let labels = record
        .labels
        .iter()
        .filter_map(|l| {
            let candidate = GraspCandidate {
                col: (l.col - off_c as f64 + 0.5) * scale_c - 0.5,
                row: (l.row - off_r as f64 + 0.5) * scale_r - 0.5,
                width: l.width * scale,
                height: l.height * scale,
                ..*l
            };
            candidate.inside_canvas(h, w).then_some(candidate)
        })
        .collect();

    DatasetRecord {
        id: record.id.clone(),
        rgb: Frame::from_raw(rgb),
        depth,
        labels,
        hand_mask,
    }
}
