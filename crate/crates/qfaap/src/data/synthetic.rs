//! Synthetic desk-scale scenes: flat-shaded graspable shapes on a textured
//! background, antipodal grasp labels, and an optional hand (ellipse palm
//! plus finger capsules) with its mask.

use std::path::Path;

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DatasetRecord;
use crate::error::{Error, Result};
use crate::grasp::{wrap_half_pi, GraspCandidate};
use crate::types::{Frame, HandMask};

/// Where the hand goes, if anywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HandPlacement {
    None,
    NearBestObject,
    Random,
}

/// Generator parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSceneSpec {
    /// Square canvas side in pixels.
    pub canvas: usize,
    /// Inclusive range of object counts per scene.
    pub object_count: (usize, usize),
    pub hand: HandPlacement,
    /// Maximum fraction of any single object's pixels the hand may cover.
    pub max_hand_overlap: f64,
    /// Pixel gap that counts as "adjacent" for near-best-object placement.
    pub adjacency_px: f64,
    pub seed: u64,
}

impl Default for SyntheticSceneSpec {
    fn default() -> Self {
        SyntheticSceneSpec {
            canvas: 224,
            object_count: (3, 5),
            hand: HandPlacement::None,
            max_hand_overlap: 0.4,
            adjacency_px: 20.0,
            seed: 0,
        }
    }
}

/// Shape parameters, sufficient to re-rasterize the object mask exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeSpec {
    Bar {
        col: f64,
        row: f64,
        angle: f64,
        length: f64,
        thickness: f64,
    },
    Tee {
        col: f64,
        row: f64,
        angle: f64,
        length: f64,
        thickness: f64,
        cross_length: f64,
    },
    Disc {
        col: f64,
        row: f64,
        radius: f64,
    },
}

impl ShapeSpec {
    /// Conservative bounding radius around the shape center.
    pub fn bounding_radius(&self) -> f64 {
        match self {
            ShapeSpec::Bar {
                length, thickness, ..
            } => 0.5 * (length * length + thickness * thickness).sqrt(),
            ShapeSpec::Tee {
                length,
                thickness,
                cross_length,
                ..
            } => 0.5 * (length + thickness).hypot(*cross_length),
            ShapeSpec::Disc { radius, .. } => *radius,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        match self {
            ShapeSpec::Bar { col, row, .. }
            | ShapeSpec::Tee { col, row, .. }
            | ShapeSpec::Disc { col, row, .. } => (*col, *row),
        }
    }

    fn contains(&self, pcol: f64, prow: f64) -> bool {
        match self {
            ShapeSpec::Bar {
                col,
                row,
                angle,
                length,
                thickness,
            } => in_rot_rect(pcol - col, prow - row, *angle, *length, *thickness),
            ShapeSpec::Tee {
                col,
                row,
                angle,
                length,
                thickness,
                cross_length,
            } => {
                let dx = pcol - col;
                let dy = prow - row;
                if in_rot_rect(dx, dy, *angle, *length, *thickness) {
                    return true;
                }
                // Cross bar sits at the +length/2 end of the stem.
                let (s, c) = angle.sin_cos();
                let ex = col + (length / 2.0 - thickness / 2.0) * c;
                let ey = row + (length / 2.0 - thickness / 2.0) * s;
                in_rot_rect(
                    pcol - ex,
                    prow - ey,
                    angle + std::f64::consts::FRAC_PI_2,
                    *cross_length,
                    *thickness,
                )
            }
            ShapeSpec::Disc { col, row, radius } => {
                let dx = pcol - col;
                let dy = prow - row;
                dx * dx + dy * dy <= radius * radius
            }
        }
    }

    /// Rasterizes the shape onto a binary mask.
    pub fn rasterize(&self, height: usize, width: usize) -> Array2<u8> {
        let mut mask = Array2::<u8>::zeros((height, width));
        let (cx, cy) = self.center();
        let r = self.bounding_radius() + 1.0;
        let c0 = ((cx - r).floor().max(0.0)) as usize;
        let c1 = ((cx + r).ceil().min((width - 1) as f64)) as usize;
        let r0 = ((cy - r).floor().max(0.0)) as usize;
        let r1 = ((cy + r).ceil().min((height - 1) as f64)) as usize;
        for row in r0..=r1 {
            for col in c0..=c1 {
                if self.contains(col as f64, row as f64) {
                    mask[[row, col]] = 1;
                }
            }
        }
        mask
    }

    /// Antipodal grasp labels across the shape's short axis.
    fn grasp_labels(&self, jaw_clearance: f64) -> Vec<GraspCandidate> {
        let mut labels = Vec::new();
        match self {
            ShapeSpec::Bar {
                col,
                row,
                angle,
                length,
                thickness,
            } => {
                let grasp_angle = wrap_half_pi(angle + std::f64::consts::FRAC_PI_2);
                let w = thickness + jaw_clearance;
                let h = (length / 3.0).clamp(6.0, 28.0);
                let (s, c) = angle.sin_cos();
                for t in [-0.28f64, 0.0, 0.28] {
                    let gx = col + t * length * c;
                    let gy = row + t * length * s;
                    labels.push(
                        GraspCandidate::new(gx, gy, w, h, grasp_angle, 1.0)
                            .expect("generated label in range"),
                    );
                }
            }
            ShapeSpec::Tee {
                col,
                row,
                angle,
                length,
                thickness,
                cross_length,
            } => {
                let stem = ShapeSpec::Bar {
                    col: *col,
                    row: *row,
                    angle: *angle,
                    length: *length,
                    thickness: *thickness,
                };
                // Keep stem grasps away from the junction at +length/2.
                let stem_angle = wrap_half_pi(angle + std::f64::consts::FRAC_PI_2);
                let w = thickness + jaw_clearance;
                let h = (length / 4.0).clamp(6.0, 24.0);
                let (s, c) = angle.sin_cos();
                for t in [-0.3f64, 0.0] {
                    labels.push(
                        GraspCandidate::new(
                            col + t * length * c,
                            row + t * length * s,
                            w,
                            h,
                            stem_angle,
                            1.0,
                        )
                        .expect("generated label in range"),
                    );
                }
                let _ = stem;
                let (ex, ey) = {
                    let off = length / 2.0 - thickness / 2.0;
                    (col + off * c, row + off * s)
                };
                let cross_angle = wrap_half_pi(*angle);
                let ch = (cross_length / 4.0).clamp(6.0, 24.0);
                let (cs, cc) = (angle + std::f64::consts::FRAC_PI_2).sin_cos();
                for t in [-0.3f64, 0.3] {
                    labels.push(
                        GraspCandidate::new(
                            ex + t * cross_length * cc,
                            ey + t * cross_length * cs,
                            w,
                            ch,
                            cross_angle,
                            1.0,
                        )
                        .expect("generated label in range"),
                    );
                }
            }
            ShapeSpec::Disc { col, row, radius } => {
                let w = 2.0 * radius + jaw_clearance;
                let h = (radius * 0.9).clamp(6.0, 24.0);
                for k in 0..4 {
                    let angle = wrap_half_pi(k as f64 * std::f64::consts::FRAC_PI_4);
                    labels.push(
                        GraspCandidate::new(*col, *row, w, h, angle, 1.0)
                            .expect("generated label in range"),
                    );
                }
            }
        }
        labels
    }
}

fn in_rot_rect(dx: f64, dy: f64, angle: f64, length: f64, thickness: f64) -> bool {
    let (s, c) = angle.sin_cos();
    let u = dx * c + dy * s;
    let v = -dx * s + dy * c;
    u.abs() <= length / 2.0 && v.abs() <= thickness / 2.0
}

/// Hand model: an ellipse palm with finger capsules.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HandSpec {
    pub palm_col: f64,
    pub palm_row: f64,
    pub palm_a: f64,
    pub palm_b: f64,
    pub palm_angle: f64,
    /// Finger capsules: (base_col, base_row, angle, length, thickness).
    pub fingers: Vec<(f64, f64, f64, f64, f64)>,
}

impl HandSpec {
    fn contains(&self, pcol: f64, prow: f64) -> bool {
        let (s, c) = self.palm_angle.sin_cos();
        let dx = pcol - self.palm_col;
        let dy = prow - self.palm_row;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        if (u / self.palm_a).powi(2) + (v / self.palm_b).powi(2) <= 1.0 {
            return true;
        }
        for &(bc, br, angle, len, th) in &self.fingers {
            let (fs, fc) = angle.sin_cos();
            let tipc = bc + len * fc;
            let tipr = br + len * fs;
            if dist_point_segment(pcol, prow, bc, br, tipc, tipr) <= th / 2.0 {
                return true;
            }
        }
        false
    }

    pub fn rasterize(&self, height: usize, width: usize) -> HandMask {
        let mut mask = HandMask::zeros(height, width);
        let reach = self.palm_a.max(self.palm_b)
            + self
                .fingers
                .iter()
                .map(|f| f.3 + f.4)
                .fold(0.0f64, f64::max);
        let c0 = ((self.palm_col - reach).floor().max(0.0)) as usize;
        let c1 = ((self.palm_col + reach).ceil().min((width - 1) as f64)) as usize;
        let r0 = ((self.palm_row - reach).floor().max(0.0)) as usize;
        let r1 = ((self.palm_row + reach).ceil().min((height - 1) as f64)) as usize;
        for row in r0..=r1 {
            for col in c0..=c1 {
                if self.contains(col as f64, row as f64) {
                    mask.set(row, col, true);
                }
            }
        }
        mask
    }
}

fn dist_point_segment(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let abx = bx - ax;
    let aby = by - ay;
    let apx = px - ax;
    let apy = py - ay;
    let len2 = abx * abx + aby * aby;
    let t = if len2 > 0.0 {
        ((apx * abx + apy * aby) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let cx = ax + t * abx;
    let cy = ay + t * aby;
    (px - cx).hypot(py - cy)
}

/// Everything needed to reconstruct scene regions: object shapes, the tagged
/// best object, and the hand model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneMeta {
    pub id: String,
    pub seed: u64,
    pub scene_index: usize,
    pub canvas: usize,
    pub best_object: usize,
    pub objects: Vec<ShapeSpec>,
    pub hand: Option<HandSpec>,
}

const JAW_CLEARANCE: f64 = 14.0;

/// Generates `n_scenes` deterministic scenes. Each scene derives its own RNG
/// stream from `(spec.seed, index)`, so scenes are order-independent.
pub fn gen_synthetic(spec: &SyntheticSceneSpec, n_scenes: usize) -> Result<Vec<(DatasetRecord, SceneMeta)>> {
    if spec.canvas < 64 {
        return Err(Error::InvalidInput("canvas must be at least 64 px".into()));
    }
    if spec.object_count.0 == 0 || spec.object_count.0 > spec.object_count.1 {
        return Err(Error::InvalidInput(format!(
            "bad object count range {:?}",
            spec.object_count
        )));
    }
    (0..n_scenes).map(|i| gen_scene(spec, i)).collect()
}

fn scene_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

fn gen_scene(spec: &SyntheticSceneSpec, index: usize) -> Result<(DatasetRecord, SceneMeta)> {
    let n = spec.canvas;
    for attempt in 0..64 {
        let mut rng = scene_rng(spec.seed.wrapping_add(attempt * 0x9e37), index);
        if let Some(out) = try_scene(spec, index, &mut rng)? {
            return Ok(out);
        }
    }
    Err(Error::Dataset(format!(
        "scene {index}: unsatisfiable placement after bounded retries ({n}px canvas)"
    )))
}

fn try_scene(
    spec: &SyntheticSceneSpec,
    index: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Option<(DatasetRecord, SceneMeta)>> {
    let n = spec.canvas;
    let nf = n as f64;
    let count = rng.random_range(spec.object_count.0..=spec.object_count.1);

    // Sample shapes first, then place them with margins.
    let mut objects: Vec<ShapeSpec> = Vec::with_capacity(count);
    for _ in 0..count {
        let kind = rng.random_range(0..3u8);
        let shape = match kind {
            0 => ShapeSpec::Bar {
                col: 0.0,
                row: 0.0,
                angle: rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2),
                length: rng.random_range(42.0..72.0),
                thickness: rng.random_range(9.0..16.0),
            },
            1 => ShapeSpec::Tee {
                col: 0.0,
                row: 0.0,
                angle: rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2),
                length: rng.random_range(42.0..64.0),
                thickness: rng.random_range(9.0..14.0),
                cross_length: rng.random_range(30.0..46.0),
            },
            _ => ShapeSpec::Disc {
                col: 0.0,
                row: 0.0,
                radius: rng.random_range(11.0..20.0),
            },
        };
        objects.push(shape);
    }

    // Label reach bounds the placement margin so all labels stay in-canvas.
    let margin_of = |s: &ShapeSpec| s.bounding_radius() + JAW_CLEARANCE + 8.0;

    let mut placed: Vec<(f64, f64, f64)> = Vec::new(); // (col, row, radius)
    for shape in objects.iter_mut() {
        let m = margin_of(shape);
        if 2.0 * m >= nf {
            return Ok(None);
        }
        let mut ok = false;
        for _ in 0..60 {
            let col = rng.random_range(m..nf - m);
            let row = rng.random_range(m..nf - m);
            let r = shape.bounding_radius();
            let fits = placed
                .iter()
                .all(|(pc, pr, prr)| (col - pc).hypot(row - pr) >= r + prr + 14.0);
            if fits {
                set_center(shape, col, row);
                placed.push((col, row, r));
                ok = true;
                break;
            }
        }
        if !ok {
            return Ok(None);
        }
    }

    let best_object = rng.random_range(0..objects.len());

    // Hand placement.
    let hand = match spec.hand {
        HandPlacement::None => None,
        HandPlacement::Random => {
            let aim = rng_point(rng, nf);
            let pc = rng.random_range(nf * 0.15..nf * 0.85);
            let pr = rng.random_range(nf * 0.15..nf * 0.85);
            Some(sample_hand(rng, pc, pr, nf, aim))
        }
        HandPlacement::NearBestObject => {
            let (bc, br) = objects[best_object].center();
            let rr = objects[best_object].bounding_radius();
            // Aim the fingertips at the object edge with a small gap.
            let gap = rng.random_range(2.0..spec.adjacency_px.max(3.0));
            let dir = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let finger_len = rng.random_range(20.0..28.0);
            let palm_dist = rr + gap + finger_len + 16.0;
            let pc = bc + palm_dist * dir.cos();
            let pr = br + palm_dist * dir.sin();
            Some(sample_hand(rng, pc, pr, nf, (bc, br)))
        }
    };

    // Validate hand constraints against object masks.
    let object_masks: Vec<Array2<u8>> = objects.iter().map(|s| s.rasterize(n, n)).collect();
    let hand_mask = hand.as_ref().map(|h| h.rasterize(n, n));
    if let (Some(hm), Some(_)) = (&hand_mask, &hand) {
        if hm.count_ones() < 200 {
            return Ok(None); // hand mostly off-canvas
        }
        for (i, om) in object_masks.iter().enumerate() {
            let total = om.iter().filter(|v| **v == 1).count().max(1);
            let covered = om
                .indexed_iter()
                .filter(|((r, c), v)| **v == 1 && hm.is_set(*r, *c))
                .count();
            let frac = covered as f64 / total as f64;
            let limit = if i == best_object {
                spec.max_hand_overlap
            } else {
                0.02
            };
            if frac > limit {
                return Ok(None);
            }
        }
        if spec.hand == HandPlacement::NearBestObject {
            // Exactly the tagged object may sit within the adjacency band.
            let dilated = hm.dilate(spec.adjacency_px);
            for (i, om) in object_masks.iter().enumerate() {
                let touches = om
                    .indexed_iter()
                    .any(|((r, c), v)| *v == 1 && dilated.is_set(r, c));
                if i == best_object && !touches {
                    return Ok(None);
                }
                if i != best_object && touches {
                    return Ok(None);
                }
            }
        }
    }

    // Render.
    let mut rgb = render_background(n, rng);
    for (shape, om) in objects.iter().zip(&object_masks) {
        let color = sample_object_color(rng);
        paint_mask(&mut rgb, om, color, rng);
        let _ = shape;
    }
    if let Some(hm) = &hand_mask {
        paint_hand(&mut rgb, hm, rng);
    }

    // Depth: flat table with raised objects and a closer hand.
    let mut depth = Array2::<f64>::from_elem((n, n), 0.55);
    for om in &object_masks {
        for ((r, c), v) in om.indexed_iter() {
            if *v == 1 {
                depth[[r, c]] = 0.52;
            }
        }
    }
    if let Some(hm) = &hand_mask {
        for r in 0..n {
            for c in 0..n {
                if hm.is_set(r, c) {
                    depth[[r, c]] = 0.50;
                }
            }
        }
    }
    for v in depth.iter_mut() {
        *v += rng.random_range(-0.0005..0.0005);
    }

    let mut labels = Vec::new();
    for shape in &objects {
        labels.extend(shape.grasp_labels(JAW_CLEARANCE));
    }
    // Generated labels must satisfy the rasterizer precondition.
    for l in &labels {
        if !l.inside_canvas(n, n) {
            return Ok(None);
        }
    }

    let id = format!("scene_{index:05}");
    let record = DatasetRecord {
        id: id.clone(),
        rgb: Frame::new(rgb)?,
        depth: Some(depth),
        labels,
        hand_mask: hand_mask.clone(),
    };
    let meta = SceneMeta {
        id,
        seed: spec.seed,
        scene_index: index,
        canvas: n,
        best_object,
        objects,
        hand,
    };
    Ok(Some((record, meta)))
}

fn rng_point(rng: &mut ChaCha8Rng, nf: f64) -> (f64, f64) {
    (
        rng.random_range(nf * 0.2..nf * 0.8),
        rng.random_range(nf * 0.2..nf * 0.8),
    )
}

fn set_center(shape: &mut ShapeSpec, new_col: f64, new_row: f64) {
    match shape {
        ShapeSpec::Bar { col, row, .. }
        | ShapeSpec::Tee { col, row, .. }
        | ShapeSpec::Disc { col, row, .. } => {
            *col = new_col;
            *row = new_row;
        }
    }
}

/// Palm at (pc,pr); fingers fan toward `aim`.
fn sample_hand(
    rng: &mut ChaCha8Rng,
    pc: f64,
    pr: f64,
    nf: f64,
    aim: (f64, f64),
) -> HandSpec {
    let pc = pc.clamp(10.0, nf - 10.0);
    let pr = pr.clamp(10.0, nf - 10.0);
    let toward = (aim.1 - pr).atan2(aim.0 - pc);
    let palm_a = rng.random_range(15.0..20.0);
    let palm_b = rng.random_range(11.0..15.0);
    let n_fingers = rng.random_range(2..=5usize);
    let spread = rng.random_range(0.5..0.9);
    let mut fingers = Vec::with_capacity(n_fingers);
    for i in 0..n_fingers {
        let frac = if n_fingers == 1 {
            0.0
        } else {
            i as f64 / (n_fingers - 1) as f64 - 0.5
        };
        let angle = toward + frac * spread + rng.random_range(-0.06..0.06);
        let base_c = pc + (palm_a - 2.0) * angle.cos();
        let base_r = pr + (palm_a - 2.0) * angle.sin();
        fingers.push((
            base_c,
            base_r,
            angle,
            rng.random_range(18.0..28.0),
            rng.random_range(6.0..9.0),
        ));
    }
    HandSpec {
        palm_col: pc,
        palm_row: pr,
        palm_a,
        palm_b,
        palm_angle: toward,
        fingers,
    }
}

fn render_background(n: usize, rng: &mut ChaCha8Rng) -> Array3<f64> {
    // Coarse value-noise grid bilinearly upsampled, plus fine per-pixel jitter.
    let grid = 8usize;
    let base: Vec<f64> = (0..grid * grid).map(|_| rng.random_range(0.0..1.0)).collect();
    let tone = rng.random_range(0.28..0.45);
    let mut rgb = Array3::<f64>::zeros((3, n, n));
    for r in 0..n {
        for c in 0..n {
            let gy = r as f64 / n as f64 * (grid - 1) as f64;
            let gx = c as f64 / n as f64 * (grid - 1) as f64;
            let y0 = gy.floor() as usize;
            let x0 = gx.floor() as usize;
            let y1 = (y0 + 1).min(grid - 1);
            let x1 = (x0 + 1).min(grid - 1);
            let fy = gy - y0 as f64;
            let fx = gx - x0 as f64;
            let v = base[y0 * grid + x0] * (1.0 - fy) * (1.0 - fx)
                + base[y0 * grid + x1] * (1.0 - fy) * fx
                + base[y1 * grid + x0] * fy * (1.0 - fx)
                + base[y1 * grid + x1] * fy * fx;
            let shade = tone + 0.08 * (v - 0.5);
            let jitter = rng.random_range(-0.015..0.015);
            rgb[[0, r, c]] = (shade + jitter + 0.02).clamp(0.0, 1.0);
            rgb[[1, r, c]] = (shade + jitter).clamp(0.0, 1.0);
            rgb[[2, r, c]] = (shade + jitter - 0.02).clamp(0.0, 1.0);
        }
    }
    rgb
}

fn sample_object_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    // Saturated distinct hues, away from both the background and skin tones.
    let h = rng.random_range(0.0..1.0);
    let s = rng.random_range(0.55..0.95);
    let v = rng.random_range(0.45..0.9);
    hsv_to_rgb(h, s, v)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let i = (h * 6.0).floor();
    let f = h * 6.0 - i;
    let p = v * (1.0 - s);
    let q = v * (1.0 - f * s);
    let t = v * (1.0 - (1.0 - f) * s);
    match (i as i64).rem_euclid(6) {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

fn paint_mask(rgb: &mut Array3<f64>, mask: &Array2<u8>, color: [f64; 3], rng: &mut ChaCha8Rng) {
    for ((r, c), v) in mask.indexed_iter() {
        if *v == 1 {
            let shade = rng.random_range(-0.03..0.03);
            for ch in 0..3 {
                rgb[[ch, r, c]] = (color[ch] + shade).clamp(0.0, 1.0);
            }
        }
    }
}

fn paint_hand(rgb: &mut Array3<f64>, mask: &HandMask, rng: &mut ChaCha8Rng) {
    let base: [f64; 3] = [
        rng.random_range(0.72..0.84),
        rng.random_range(0.55..0.64),
        rng.random_range(0.45..0.52),
    ];
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            if mask.is_set(r, c) {
                let shade = rng.random_range(-0.04..0.04);
                for ch in 0..3 {
                    rgb[[ch, r, c]] = (base[ch] + shade).clamp(0.0, 1.0);
                }
            }
        }
    }
}

/// Writes a dataset as `scenes/<id>/{rgb.png, depth.png, mask.png,
/// grasps.csv, meta.json}` under `dir`.
pub fn save_synthetic_dataset(
    dir: &Path,
    scenes: &[(DatasetRecord, SceneMeta)],
    text: &[(String, String)],
) -> Result<()> {
    for (record, meta) in scenes {
        let scene_dir = dir.join("scenes").join(&record.id);
        std::fs::create_dir_all(&scene_dir).map_err(|e| Error::io(&scene_dir, e))?;
        crate::imgio::save_frame_png(&scene_dir.join("rgb.png"), &record.rgb, text)?;
        if let Some(d) = &record.depth {
            crate::imgio::save_depth_png(&scene_dir.join("depth.png"), d, text)?;
        }
        if let Some(m) = &record.hand_mask {
            crate::imgio::save_mask_png(&scene_dir.join("mask.png"), m, text)?;
        }
        super::save_grasps_csv(&scene_dir.join("grasps.csv"), &record.labels)?;
        let meta_json = serde_json::to_vec_pretty(meta)?;
        crate::imgio::write_atomic(&scene_dir.join("meta.json"), &meta_json)?;
    }
    Ok(())
}

/// Loads one scene directory.
pub fn load_scene_dir(scene_dir: &Path) -> Result<(DatasetRecord, SceneMeta)> {
    let rgb = crate::imgio::load_frame_png(&scene_dir.join("rgb.png"))?;
    let depth_path = scene_dir.join("depth.png");
    let depth = if depth_path.exists() {
        Some(crate::imgio::load_depth_png(&depth_path)?)
    } else {
        None
    };
    let mask_path = scene_dir.join("mask.png");
    let hand_mask = if mask_path.exists() {
        Some(crate::imgio::load_mask_png(&mask_path)?)
    } else {
        None
    };
    let labels = super::load_grasps_csv(&scene_dir.join("grasps.csv"))?;
    let meta_bytes = std::fs::read(scene_dir.join("meta.json"))
        .map_err(|e| Error::io(scene_dir.join("meta.json"), e))?;
    let meta: SceneMeta = serde_json::from_slice(&meta_bytes)?;
    let record = DatasetRecord {
        id: meta.id.clone(),
        rgb,
        depth,
        labels,
        hand_mask,
    };
    record.validate()?;
    Ok((record, meta))
}

/// Loads every scene under `dir/scenes`, sorted by id.
pub fn load_synthetic_dataset(dir: &Path) -> Result<Vec<(DatasetRecord, SceneMeta)>> {
    let scenes_dir = dir.join("scenes");
    let mut ids: Vec<String> = std::fs::read_dir(&scenes_dir)
        .map_err(|e| Error::io(&scenes_dir, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    ids.sort();
    if ids.is_empty() {
        return Err(Error::Dataset(format!(
            "no scenes under {}",
            scenes_dir.display()
        )));
    }
    ids.iter()
        .map(|id| load_scene_dir(&scenes_dir.join(id)))
        .collect()
}
