//! Non-dangerous detection accuracy: fraction of scenes whose selected grasp
//! center avoids both the hand mask and the objects adjacent to it.

use crate::data::{DatasetRecord, SceneMeta};
use crate::error::{Error, Result};
use crate::grasp::GraspCandidate;
use crate::types::HandMask;

/// A scene with its hand mask and the shape metadata needed to rebuild
/// object regions.
#[derive(Debug, Clone)]
pub struct Scene {
    pub record: DatasetRecord,
    pub meta: SceneMeta,
}

#[derive(Debug, Clone, Copy)]
pub struct NdaccOptions {
    /// Hand-to-object pixel distance that counts as adjacent.
    pub adjacency_px: f64,
}

impl Default for NdaccOptions {
    fn default() -> Self {
        NdaccOptions { adjacency_px: 20.0 }
    }
}

/// Per-scene outcome for reporting.
#[derive(Debug, Clone)]
pub struct NdaccOutcome {
    pub scene_id: String,
    pub center_row: usize,
    pub center_col: usize,
    pub on_hand: bool,
    pub on_adjacent_object: bool,
    pub safe: bool,
}

/// Evaluates a selection strategy over annotated scenes. `select` maps a
/// scene to the grasp it would execute; the fraction of scenes whose grasp
/// center lands outside hand-union-adjacent-objects is returned along with
/// per-scene outcomes.
pub fn eval_ndacc<F>(
    scenes: &[Scene],
    select: F,
    opts: &NdaccOptions,
) -> Result<(f64, Vec<NdaccOutcome>)>
where
    F: Fn(&Scene) -> Result<GraspCandidate>,
{
    if scenes.is_empty() {
        return Err(Error::InvalidInput("empty scene list".into()));
    }
    let mut outcomes = Vec::with_capacity(scenes.len());
    let mut safe_count = 0usize;
    for scene in scenes {
        let hand = scene
            .record
            .hand_mask
            .as_ref()
            .ok_or_else(|| Error::Dataset(format!("{}: scene has no hand mask", scene.meta.id)))?;
        let hazard = hazard_region(scene, hand, opts.adjacency_px);

        let grasp = select(scene)?;
        let row = grasp.row.round() as usize;
        let col = grasp.col.round() as usize;
        let on_hand = hand.is_set(row, col);
        let on_adjacent = !on_hand && hazard.adjacent.is_set(row, col);
        let safe = !on_hand && !on_adjacent;
        if safe {
            safe_count += 1;
        }
        outcomes.push(NdaccOutcome {
            scene_id: scene.meta.id.clone(),
            center_row: row,
            center_col: col,
            on_hand,
            on_adjacent_object: on_adjacent,
            safe,
        });
    }
    Ok((safe_count as f64 / scenes.len() as f64, outcomes))
}

struct Hazard {
    adjacent: HandMask,
}

/// Union of the masks of objects whose pixels fall within `adjacency_px` of
/// the hand.
fn hazard_region(scene: &Scene, hand: &HandMask, adjacency_px: f64) -> Hazard {
    let n = scene.meta.canvas;
    let dilated = hand.dilate(adjacency_px);
    let mut adjacent = HandMask::zeros(n, n);
    for shape in &scene.meta.objects {
        let om = shape.rasterize(n, n);
        let touches = om
            .indexed_iter()
            .any(|((r, c), v)| *v == 1 && dilated.is_set(r, c));
        if touches {
            for ((r, c), v) in om.indexed_iter() {
                if *v == 1 {
                    adjacent.set(r, c, true);
                }
            }
        }
    }
    Hazard { adjacent }
}
