//! Argmax grasp selection from dense quality maps.

use ndarray::Array2;

use super::{GraspCandidate, GraspMaps};
use crate::error::{Error, Result};
use crate::types::HandMask;

/// Configuration for [`select_best_grasp`].
#[derive(Debug, Clone, Copy)]
pub struct SelectionConfig {
    /// Standard deviation in pixels of the Gaussian applied to the quality
    /// map before the argmax. 0 disables smoothing.
    pub smooth_sigma: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig { smooth_sigma: 2.0 }
    }
}

/// Separable Gaussian smoothing with reflected borders. Sigma <= 0 returns
/// the input unchanged.
pub fn smooth_quality(quality: &Array2<f64>, sigma: f64) -> Array2<f64> {
    if sigma <= 0.0 {
        return quality.clone();
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for i in -radius..=radius {
        kernel.push((-(i * i) as f64 / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= sum;
    }

    let (h, w) = quality.dim();
    let reflect = |i: i64, n: usize| -> usize {
        let n = n as i64;
        let mut i = i;
        // Mirror without repeating the edge sample.
        while i < 0 || i >= n {
            if i < 0 {
                i = -i - 1;
            }
            if i >= n {
                i = 2 * n - i - 1;
            }
        }
        i as usize
    };

    let mut tmp = Array2::<f64>::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                let cc = reflect(c as i64 + ki as i64 - radius, w);
                acc += k * quality[[r, cc]];
            }
            tmp[[r, c]] = acc;
        }
    }
    let mut out = Array2::<f64>::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                let rr = reflect(r as i64 + ki as i64 - radius, h);
                acc += k * tmp[[rr, c]];
            }
            out[[r, c]] = acc;
        }
    }
    out
}

/// Returns the argmax grasp of the quality map over pixels where the
/// exclusion mask (if any) is 0. Ties break to the smallest row-major index.
/// The candidate's angle and width are read from the same pixel of the
/// unsmoothed maps; its height is set to half the width (visualization only).
pub fn select_best_grasp(
    maps: &GraspMaps,
    exclusion: Option<&HandMask>,
    cfg: &SelectionConfig,
) -> Result<GraspCandidate> {
    maps.validate()?;
    let (h, w) = maps.quality.dim();
    if let Some(mask) = exclusion {
        if mask.height() != h || mask.width() != w {
            return Err(Error::ShapeMismatch(format!(
                "exclusion mask {}x{} does not match maps {h}x{w}",
                mask.height(),
                mask.width()
            )));
        }
    }

    let quality = smooth_quality(&maps.quality, cfg.smooth_sigma);

    let mut best: Option<(usize, usize, f64)> = None;
    for row in 0..h {
        for col in 0..w {
            if exclusion.map(|m| m.is_set(row, col)).unwrap_or(false) {
                continue;
            }
            let q = quality[[row, col]];
            match best {
                Some((_, _, bq)) if q <= bq => {}
                _ => best = Some((row, col, q)),
            }
        }
    }

    let (row, col, q) = best.ok_or(Error::NoCandidate)?;
    let width = maps.width[[row, col]].max(1.0);
    let angle = super::wrap_half_pi(maps.angle[[row, col]]);
    Ok(GraspCandidate {
        col: col as f64,
        row: row as f64,
        width,
        height: width / 2.0,
        angle,
        quality: q.clamp(0.0, 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn maps_with_quality(q: Array2<f64>) -> GraspMaps {
        let dim = q.dim();
        GraspMaps {
            quality: q,
            angle: Array2::from_elem(dim, 0.25),
            width: Array2::from_elem(dim, 40.0),
        }
    }

    const NO_SMOOTH: SelectionConfig = SelectionConfig { smooth_sigma: 0.0 };

    #[test]
    fn unique_maximum_selected() {
        let mut q = Array2::zeros((10, 10));
        q[[7, 3]] = 1.0;
        let g = select_best_grasp(&maps_with_quality(q), None, &NO_SMOOTH).unwrap();
        assert_eq!((g.col, g.row), (3.0, 7.0));
        assert_eq!(g.quality, 1.0);
        assert_eq!(g.width, 40.0);
        assert_eq!(g.height, 20.0);
    }

    #[test]
    fn uniform_quality_ties_to_row_major_first() {
        let q = Array2::from_elem((6, 6), 0.5);
        let g = select_best_grasp(&maps_with_quality(q), None, &NO_SMOOTH).unwrap();
        assert_eq!((g.col, g.row), (0.0, 0.0));
    }

    #[test]
    fn exclusion_moves_argmax_to_second_best() {
        let mut q = Array2::zeros((10, 10));
        q[[7, 3]] = 1.0;
        q[[2, 9]] = 0.8;
        let mut mask = HandMask::zeros(10, 10);
        mask.set(7, 3, true);
        let g = select_best_grasp(&maps_with_quality(q), Some(&mask), &NO_SMOOTH).unwrap();
        assert_eq!((g.col, g.row), (9.0, 2.0));
        assert!((g.quality - 0.8).abs() < 1e-12);
    }

    #[test]
    fn full_exclusion_yields_no_candidate() {
        let q = Array2::from_elem((4, 4), 0.9);
        let mut mask = HandMask::zeros(4, 4);
        for r in 0..4 {
            for c in 0..4 {
                mask.set(r, c, true);
            }
        }
        let err = select_best_grasp(&maps_with_quality(q), Some(&mask), &NO_SMOOTH).unwrap_err();
        assert!(matches!(err, Error::NoCandidate));
    }

    #[test]
    fn unsmoothed_matches_brute_force_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let q = Array2::from_shape_fn((12, 9), |_| rng.random::<f64>());
            // Independent full-scan argmax.
            let mut best = (0usize, 0usize);
            let mut bq = f64::NEG_INFINITY;
            for r in 0..12 {
                for c in 0..9 {
                    if q[[r, c]] > bq {
                        bq = q[[r, c]];
                        best = (r, c);
                    }
                }
            }
            let g = select_best_grasp(&maps_with_quality(q), None, &NO_SMOOTH).unwrap();
            assert_eq!((g.row as usize, g.col as usize), best);
        }
    }

    #[test]
    fn smoothing_preserves_mass_location_on_blob() {
        let mut q = Array2::zeros((21, 21));
        q[[10, 10]] = 1.0;
        let g = select_best_grasp(
            &maps_with_quality(q),
            None,
            &SelectionConfig { smooth_sigma: 2.0 },
        )
        .unwrap();
        assert_eq!((g.col, g.row), (10.0, 10.0));
        assert!(g.quality < 1.0); // blurred peak
    }

    #[test]
    fn smooth_kernel_preserves_constant_map() {
        let q = Array2::from_elem((16, 16), 0.7);
        let s = smooth_quality(&q, 2.0);
        for v in s.iter() {
            assert!((v - 0.7).abs() < 1e-12);
        }
    }
}
