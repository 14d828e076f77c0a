//! Quality heatmap rendering: color overlay at 50% opacity with the selected
//! grasp drawn as a rotated box and center dot.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grasp::GraspCandidate;
use crate::types::Frame;

/// Five-stop blue-to-red gradient.
fn colormap(q: f64) -> [f64; 3] {
    const STOPS: [(f64, [f64; 3]); 5] = [
        (0.0, [0.05, 0.03, 0.53]),
        (0.25, [0.0, 0.55, 0.85]),
        (0.5, [0.1, 0.82, 0.35]),
        (0.75, [0.99, 0.85, 0.13]),
        (1.0, [0.90, 0.10, 0.11]),
    ];
    let q = q.clamp(0.0, 1.0);
    for w in STOPS.windows(2) {
        let (a, ca) = w[0];
        let (b, cb) = w[1];
        if q <= b {
            let t = if b > a { (q - a) / (b - a) } else { 0.0 };
            return [
                ca[0] + t * (cb[0] - ca[0]),
                ca[1] + t * (cb[1] - ca[1]),
                ca[2] + t * (cb[2] - ca[2]),
            ];
        }
    }
    STOPS[4].1
}

const BOX_COLOR: [u8; 3] = [255, 0, 255];
const DOT_COLOR: [u8; 3] = [255, 255, 255];

fn put(buf: &mut [u8], w: usize, h: usize, row: i64, col: i64, color: [u8; 3]) {
    if row < 0 || col < 0 || row >= h as i64 || col >= w as i64 {
        return;
    }
    let idx = (row as usize * w + col as usize) * 3;
    buf[idx..idx + 3].copy_from_slice(&color);
}

fn draw_line(buf: &mut [u8], w: usize, h: usize, a: [f64; 2], b: [f64; 2], color: [u8; 3]) {
    // Bresenham on rounded endpoints.
    let (mut x0, mut y0) = (a[0].round() as i64, a[1].round() as i64);
    let (x1, y1) = (b[0].round() as i64, b[1].round() as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        put(buf, w, h, y0, x0, color);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

/// Renders the quality map over the frame at 50% opacity, draws the grasp
/// box and its center dot when given, and writes a PNG with the provided
/// text chunks. Output bytes are a pure function of the inputs.
pub fn emit_heatmap(
    quality: &Array2<f64>,
    frame: &Frame,
    grasp: Option<&GraspCandidate>,
    path: &Path,
    text: &[(String, String)],
) -> Result<()> {
    let (h, w) = quality.dim();
    if frame.height() != h || frame.width() != w {
        return Err(Error::ShapeMismatch(format!(
            "quality {h}x{w} vs frame {}x{}",
            frame.height(),
            frame.width()
        )));
    }
    let mut buf = vec![0u8; h * w * 3];
    for r in 0..h {
        for c in 0..w {
            let cm = colormap(quality[[r, c]]);
            for ch in 0..3 {
                let v = 0.5 * frame.data()[[ch, r, c]] + 0.5 * cm[ch];
                buf[(r * w + c) * 3 + ch] = (v * 255.0).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    if let Some(g) = grasp {
        let corners = g.corners();
        for i in 0..4 {
            draw_line(&mut buf, w, h, corners[i], corners[(i + 1) % 4], BOX_COLOR);
        }
        let (cr, cc) = (g.row.round() as i64, g.col.round() as i64);
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                put(&mut buf, w, h, cr + dr, cc + dc, DOT_COLOR);
            }
        }
    }
    crate::imgio::save_rgb_bytes_png(path, h, w, &buf, text)
}
