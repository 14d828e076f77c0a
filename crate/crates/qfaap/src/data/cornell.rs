//! Cornell-layout dataset loader: per-image RGB plus `cpos` rectangle files
//! of four corner lines per grasp.

use std::path::{Path, PathBuf};

use super::DatasetRecord;
use crate::error::{Error, Result};
use crate::grasp::{wrap_half_pi, GraspCandidate};

/// What the loader skipped and why.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CornellReport {
    pub records_loaded: usize,
    /// RGB files without a readable cpos companion.
    pub records_skipped: usize,
    /// Rectangles dropped (non-finite corners, malformed lines).
    pub rectangles_skipped: usize,
    /// Labels dropped because they left the crop window.
    pub labels_cropped_away: usize,
}

/// Center-crop coordinate transform applied to the rasters and labels.
#[derive(Debug, Clone, Copy)]
pub struct CropTransform {
    pub off_col: f64,
    pub off_row: f64,
}

impl CropTransform {
    pub fn apply(&self, g: &GraspCandidate) -> GraspCandidate {
        GraspCandidate {
            col: g.col - self.off_col,
            row: g.row - self.off_row,
            ..*g
        }
    }

    pub fn invert(&self, g: &GraspCandidate) -> GraspCandidate {
        GraspCandidate {
            col: g.col + self.off_col,
            row: g.row + self.off_row,
            ..*g
        }
    }
}

/// Converts four rectangle corners (col,row per line, first edge along the
/// gripper-closing axis) into a grasp candidate.
pub fn corners_to_candidate(corners: &[[f64; 2]; 4]) -> Result<GraspCandidate> {
    if corners.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite rectangle corner".into()));
    }
    let cx = corners.iter().map(|p| p[0]).sum::<f64>() / 4.0;
    let cy = corners.iter().map(|p| p[1]).sum::<f64>() / 4.0;
    let w = (corners[1][0] - corners[0][0]).hypot(corners[1][1] - corners[0][1]);
    let h = (corners[2][0] - corners[1][0]).hypot(corners[2][1] - corners[1][1]);
    let angle = wrap_half_pi((corners[1][1] - corners[0][1]).atan2(corners[1][0] - corners[0][0]));
    GraspCandidate::new(cx, cy, w, h, angle, 1.0)
}

fn parse_cpos(path: &Path, report: &mut CornellReport) -> Result<Vec<GraspCandidate>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut points: Vec<[f64; 2]> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let x: f64 = it.next().and_then(|t| t.parse().ok()).unwrap_or(f64::NAN);
        let y: f64 = it.next().and_then(|t| t.parse().ok()).unwrap_or(f64::NAN);
        points.push([x, y]);
    }
    let mut out = Vec::new();
    for quad in points.chunks(4) {
        if quad.len() < 4 {
            report.rectangles_skipped += 1;
            continue;
        }
        let corners = [quad[0], quad[1], quad[2], quad[3]];
        match corners_to_candidate(&corners) {
            Ok(g) => out.push(g),
            Err(_) => report.rectangles_skipped += 1,
        }
    }
    Ok(out)
}

/// Loads a Cornell-layout directory (`pcdNNNNr.png` + `pcdNNNNcpos.txt`),
/// center-cropping rasters and labels to `crop x crop` pixels.
pub fn load_cornell(dir: &Path, crop: usize) -> Result<(Vec<DatasetRecord>, CornellReport)> {
    let mut rgb_files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .map(|n| {
                    let n = n.to_string_lossy();
                    n.starts_with("pcd") && n.ends_with("r.png")
                })
                .unwrap_or(false)
        })
        .collect();
    rgb_files.sort();
    if rgb_files.is_empty() {
        return Err(Error::Dataset(format!(
            "no Cornell rgb files (pcd*r.png) under {}",
            dir.display()
        )));
    }

    let mut report = CornellReport::default();
    let mut records = Vec::new();
    for rgb_path in rgb_files {
        let stem = rgb_path
            .file_name()
            .unwrap()
            .to_string_lossy()
            .trim_end_matches("r.png")
            .to_string();
        let cpos = dir.join(format!("{stem}cpos.txt"));
        if !cpos.exists() {
            log::warn!("{}: missing cpos file, skipped", rgb_path.display());
            report.records_skipped += 1;
            continue;
        }
        let rgb = match crate::imgio::load_frame_png(&rgb_path) {
            Ok(f) => f,
            Err(e) => {
                log::warn!("{}: unreadable rgb ({e}), skipped", rgb_path.display());
                report.records_skipped += 1;
                continue;
            }
        };
        let labels_full = parse_cpos(&cpos, &mut report)?;

        let (h, w) = (rgb.height(), rgb.width());
        if h < crop || w < crop {
            log::warn!("{}: smaller than crop window, skipped", rgb_path.display());
            report.records_skipped += 1;
            continue;
        }
        let off_row = (h - crop) / 2;
        let off_col = (w - crop) / 2;
        let transform = CropTransform {
            off_col: off_col as f64,
            off_row: off_row as f64,
        };
        let cropped = rgb
            .data()
            .slice(ndarray::s![.., off_row..off_row + crop, off_col..off_col + crop])
            .to_owned();

        let mut labels = Vec::new();
        for g in &labels_full {
            let t = transform.apply(g);
            if t.inside_canvas(crop, crop) {
                labels.push(t);
            } else {
                report.labels_cropped_away += 1;
            }
        }
        if labels.is_empty() {
            log::warn!("{stem}: no labels inside crop window, skipped");
            report.records_skipped += 1;
            continue;
        }
        records.push(DatasetRecord {
            id: stem,
            rgb: crate::types::Frame::from_raw(cropped),
            depth: None,
            labels,
            hand_mask: None,
        });
        report.records_loaded += 1;
    }
    if records.is_empty() {
        return Err(Error::Dataset(format!(
            "no loadable records under {}",
            dir.display()
        )));
    }
    Ok((records, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Frame;
    use tempfile::tempdir;

    fn write_scene(dir: &Path, stem: &str, rects: &[[[f64; 2]; 4]]) {
        let frame = Frame::zeros(480, 640);
        crate::imgio::save_frame_png(&dir.join(format!("{stem}r.png")), &frame, &[]).unwrap();
        let mut text = String::new();
        for quad in rects {
            for p in quad {
                text.push_str(&format!("{} {}\n", p[0], p[1]));
            }
        }
        std::fs::write(dir.join(format!("{stem}cpos.txt")), text).unwrap();
    }

    #[test]
    fn axis_aligned_corners_convert_exactly() {
        let corners = [[35.0, 44.0], [65.0, 44.0], [65.0, 56.0], [35.0, 56.0]];
        let g = corners_to_candidate(&corners).unwrap();
        assert!((g.col - 50.0).abs() < 1e-12);
        assert!((g.row - 50.0).abs() < 1e-12);
        assert!((g.width - 30.0).abs() < 1e-12);
        assert!((g.height - 12.0).abs() < 1e-12);
        assert_eq!(g.angle, 0.0);
    }

    #[test]
    fn corner_conversion_roundtrips_through_corner_regeneration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..30 {
            let g = GraspCandidate::new(
                rng.random_range(100.0..500.0),
                rng.random_range(100.0..380.0),
                rng.random_range(20.0..80.0),
                rng.random_range(10.0..40.0),
                rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2),
                1.0,
            )
            .unwrap();
            let corners = g.corners();
            let back = corners_to_candidate(&corners).unwrap();
            assert!((back.col - g.col).abs() < 1e-9);
            assert!((back.row - g.row).abs() < 1e-9);
            assert!((back.width - g.width).abs() < 1e-9);
            assert!((back.height - g.height).abs() < 1e-9);
            assert!(crate::grasp::angle_difference(back.angle, g.angle) < 1e-9);
        }
    }

    #[test]
    fn crop_transform_roundtrip_within_half_pixel() {
        let t = CropTransform {
            off_col: 208.0,
            off_row: 128.0,
        };
        let g = GraspCandidate::new(320.0, 240.0, 40.0, 18.0, 0.7, 1.0).unwrap();
        let back = t.invert(&t.apply(&g));
        assert!((back.col - g.col).abs() < 0.5);
        assert!((back.row - g.row).abs() < 0.5);
    }

    #[test]
    fn loads_synthetic_cornell_layout() {
        let dir = tempdir().unwrap();
        // centered rect -> survives the 224 crop (window cols 208.., rows 128..)
        write_scene(
            dir.path(),
            "pcd0100",
            &[
                [[305.0, 234.0], [335.0, 234.0], [335.0, 246.0], [305.0, 246.0]],
                [[f64::NAN, 1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 4.0]],
            ],
        );
        let (records, report) = load_cornell(dir.path(), 224).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(report.records_loaded, 1);
        assert_eq!(report.rectangles_skipped, 1);
        let g = &records[0].labels[0];
        assert!((g.col - (320.0 - 208.0)).abs() < 1e-9);
        assert!((g.row - (240.0 - 128.0)).abs() < 1e-9);
        assert!((g.width - 30.0).abs() < 1e-9);
    }

    #[test]
    fn missing_cpos_skips_record() {
        let dir = tempdir().unwrap();
        write_scene(
            dir.path(),
            "pcd0101",
            &[[[305.0, 234.0], [335.0, 234.0], [335.0, 246.0], [305.0, 246.0]]],
        );
        let frame = Frame::zeros(480, 640);
        crate::imgio::save_frame_png(&dir.path().join("pcd0102r.png"), &frame, &[]).unwrap();
        let (records, report) = load_cornell(dir.path(), 224).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(report.records_skipped, 1);
    }

    #[test]
    fn empty_dir_is_an_error() {
        let dir = tempdir().unwrap();
        assert!(load_cornell(dir.path(), 224).is_err());
    }
}
