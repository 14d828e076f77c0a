//! Dataset ingestion, splitting, augmentation, and the synthetic desk-scale
//! scene generator.

mod augment;
mod cornell;
mod split;
mod synthetic;

pub use augment::{augment, augment_with};
pub use cornell::{corners_to_candidate, load_cornell, CornellReport, CropTransform};
pub use split::split_imagewise;
pub use synthetic::{
    gen_synthetic, load_scene_dir, load_synthetic_dataset, save_synthetic_dataset, HandPlacement,
    HandSpec, SceneMeta, ShapeSpec, SyntheticSceneSpec,
};

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grasp::GraspCandidate;
use crate::types::{Frame, HandMask};

/// One dataset sample: an RGB frame, optional depth, grasp labels, and an
/// optional hand mask.
#[derive(Debug, Clone)]
pub struct DatasetRecord {
    pub id: String,
    pub rgb: Frame,
    pub depth: Option<Array2<f64>>,
    pub labels: Vec<GraspCandidate>,
    pub hand_mask: Option<HandMask>,
}

impl DatasetRecord {
    pub fn validate(&self) -> Result<()> {
        let (h, w) = (self.rgb.height(), self.rgb.width());
        if let Some(d) = &self.depth {
            if d.dim() != (h, w) {
                return Err(Error::ShapeMismatch(format!(
                    "{}: depth {:?} vs rgb {h}x{w}",
                    self.id,
                    d.dim()
                )));
            }
        }
        if let Some(m) = &self.hand_mask {
            if (m.height(), m.width()) != (h, w) {
                return Err(Error::ShapeMismatch(format!(
                    "{}: mask {}x{} vs rgb {h}x{w}",
                    self.id,
                    m.height(),
                    m.width()
                )));
            }
        }
        for (i, label) in self.labels.iter().enumerate() {
            if !label.inside_canvas(h, w) {
                return Err(Error::Dataset(format!(
                    "{}: label {i} outside canvas",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// Writes grasp labels as CSV lines `cx,cy,w,h,theta_deg`.
pub fn save_grasps_csv(path: &Path, labels: &[GraspCandidate]) -> Result<()> {
    let mut out = String::new();
    for l in labels {
        out.push_str(&format!(
            "{:.4},{:.4},{:.4},{:.4},{:.4}\n",
            l.col,
            l.row,
            l.width,
            l.height,
            l.angle.to_degrees()
        ));
    }
    crate::imgio::write_atomic(path, out.as_bytes())
}

/// Reads grasp labels from CSV lines `cx,cy,w,h,theta_deg` (degrees in
/// [-90, 90)).
pub fn load_grasps_csv(path: &Path) -> Result<Vec<GraspCandidate>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Dataset(format!(
                "{}:{}: expected 5 fields, got {}",
                path.display(),
                ln + 1,
                fields.len()
            )));
        }
        let mut vals = [0.0f64; 5];
        for (i, f) in fields.iter().enumerate() {
            vals[i] = f.trim().parse::<f64>().map_err(|e| {
                Error::Dataset(format!("{}:{}: bad number: {e}", path.display(), ln + 1))
            })?;
        }
        let angle = crate::grasp::wrap_half_pi(vals[4].to_radians());
        labels.push(GraspCandidate::new(
            vals[0], vals[1], vals[2], vals[3], angle, 1.0,
        )?);
    }
    Ok(labels)
}
