//! Bilinear resampling with an exact adjoint, shared by augmentation, patch
//! placement, and frame-size patch adaptation.

use ndarray::{Array2, Array3};

/// Source coordinate of a destination sample under half-pixel-center
/// alignment.
#[inline]
fn src_coord(dst: usize, scale: f64) -> f64 {
    (dst as f64 + 0.5) * scale - 0.5
}

/// Four-tap weights for one axis: (i0, i1, w0, w1) with indices clamped.
#[inline]
fn taps(x: f64, n: usize) -> (usize, usize, f64, f64) {
    let xf = x.floor();
    let frac = x - xf;
    let i0 = (xf as i64).clamp(0, n as i64 - 1) as usize;
    let i1 = (xf as i64 + 1).clamp(0, n as i64 - 1) as usize;
    (i0, i1, 1.0 - frac, frac)
}

/// Bilinear resize of a `(C, H, W)` image to `(C, out_h, out_w)`.
pub fn resize_bilinear(src: &Array3<f64>, out_h: usize, out_w: usize) -> Array3<f64> {
    let (c, h, w) = src.dim();
    let sy = h as f64 / out_h as f64;
    let sx = w as f64 / out_w as f64;
    let mut dst = Array3::<f64>::zeros((c, out_h, out_w));
    for oy in 0..out_h {
        let (y0, y1, wy0, wy1) = taps(src_coord(oy, sy), h);
        for ox in 0..out_w {
            let (x0, x1, wx0, wx1) = taps(src_coord(ox, sx), w);
            for ch in 0..c {
                dst[[ch, oy, ox]] = wy0 * (wx0 * src[[ch, y0, x0]] + wx1 * src[[ch, y0, x1]])
                    + wy1 * (wx0 * src[[ch, y1, x0]] + wx1 * src[[ch, y1, x1]]);
            }
        }
    }
    dst
}

/// Adjoint of [`resize_bilinear`]: scatters output-space gradients back to
/// source pixels. `(src_h, src_w)` is the original size.
pub fn resize_bilinear_backward(
    grad_out: &Array3<f64>,
    src_h: usize,
    src_w: usize,
) -> Array3<f64> {
    let (c, out_h, out_w) = grad_out.dim();
    let sy = src_h as f64 / out_h as f64;
    let sx = src_w as f64 / out_w as f64;
    let mut g = Array3::<f64>::zeros((c, src_h, src_w));
    for oy in 0..out_h {
        let (y0, y1, wy0, wy1) = taps(src_coord(oy, sy), src_h);
        for ox in 0..out_w {
            let (x0, x1, wx0, wx1) = taps(src_coord(ox, sx), src_w);
            for ch in 0..c {
                let go = grad_out[[ch, oy, ox]];
                g[[ch, y0, x0]] += wy0 * wx0 * go;
                g[[ch, y0, x1]] += wy0 * wx1 * go;
                g[[ch, y1, x0]] += wy1 * wx0 * go;
                g[[ch, y1, x1]] += wy1 * wx1 * go;
            }
        }
    }
    g
}

/// Nearest-neighbor resize for label-like rasters (masks).
pub fn resize_nearest(src: &Array2<f64>, out_h: usize, out_w: usize) -> Array2<f64> {
    let (h, w) = src.dim();
    let sy = h as f64 / out_h as f64;
    let sx = w as f64 / out_w as f64;
    Array2::from_shape_fn((out_h, out_w), |(oy, ox)| {
        let y = (src_coord(oy, sy).round() as i64).clamp(0, h as i64 - 1) as usize;
        let x = (src_coord(ox, sx).round() as i64).clamp(0, w as i64 - 1) as usize;
        src[[y, x]]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_size_resize_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let src = Array3::from_shape_fn((3, 7, 5), |_| rng.random::<f64>());
        let out = resize_bilinear(&src, 7, 5);
        assert_eq!(out, src);
    }

    #[test]
    fn constant_image_stays_constant() {
        let src = Array3::from_elem((1, 4, 4), 0.7);
        let out = resize_bilinear(&src, 9, 13);
        for v in out.iter() {
            assert!((v - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_identity_holds() {
        // <resize(x), y> == <x, resize_backward(y)>
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array3::from_shape_fn((2, 6, 6), |_| rng.random::<f64>());
        let y = Array3::from_shape_fn((2, 9, 4), |_| rng.random::<f64>());
        let lhs = (&resize_bilinear(&x, 9, 4) * &y).sum();
        let rhs = (&x * &resize_bilinear_backward(&y, 6, 6)).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn nearest_preserves_binary_values() {
        let mut src = Array2::zeros((4, 4));
        src[[1, 1]] = 1.0;
        let out = resize_nearest(&src, 8, 8);
        for v in out.iter() {
            assert!(*v == 0.0 || *v == 1.0);
        }
        assert_eq!(out[[3, 3]], 1.0);
    }
}
