//! Raster types shared across the pipeline: RGB frames and binary hand masks.

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};

/// RGB image with values in `[0,1]`, stored channel-first as `(3, H, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame(Array3<f64>);

impl Frame {
    pub fn new(data: Array3<f64>) -> Result<Self> {
        let (c, _, _) = data.dim();
        if c != 3 {
            return Err(Error::ShapeMismatch(format!(
                "frame must have 3 channels, got {c}"
            )));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::InvalidInput(
                "frame values must be finite and in [0,1]".into(),
            ));
        }
        Ok(Frame(data))
    }

    /// Builds a frame without the range scan. Caller guarantees values in `[0,1]`.
    pub(crate) fn from_raw(data: Array3<f64>) -> Self {
        debug_assert_eq!(data.dim().0, 3);
        Frame(data)
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Frame(Array3::zeros((3, height, width)))
    }

    pub fn height(&self) -> usize {
        self.0.dim().1
    }

    pub fn width(&self) -> usize {
        self.0.dim().2
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.0
    }

    pub fn data_mut(&mut self) -> &mut Array3<f64> {
        &mut self.0
    }

    pub fn into_inner(self) -> Array3<f64> {
        self.0
    }
}

/// Binary hand-region mask; 1 marks a hand pixel. Same spatial size as its frame.
#[derive(Debug, Clone, PartialEq)]
pub struct HandMask(Array2<u8>);

impl HandMask {
    pub fn new(data: Array2<u8>) -> Result<Self> {
        if data.iter().any(|v| *v > 1) {
            return Err(Error::InvalidInput("mask values must be 0 or 1".into()));
        }
        Ok(HandMask(data))
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        HandMask(Array2::zeros((height, width)))
    }

    pub fn height(&self) -> usize {
        self.0.dim().0
    }

    pub fn width(&self) -> usize {
        self.0.dim().1
    }

    pub fn is_set(&self, row: usize, col: usize) -> bool {
        self.0[[row, col]] == 1
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.0[[row, col]] = u8::from(value);
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|v| **v == 1).count()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|v| *v == 0)
    }

    pub fn data(&self) -> &Array2<u8> {
        &self.0
    }

    /// Morphological dilation with a euclidean disk of the given radius in pixels.
    /// Radius 0 returns the mask unchanged.
    pub fn dilate(&self, radius: f64) -> HandMask {
        if radius <= 0.0 || self.is_empty() {
            return self.clone();
        }
        let (h, w) = self.0.dim();
        let r = radius.floor() as i64;
        let mut offsets = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                if (dy * dy + dx * dx) as f64 <= radius * radius {
                    offsets.push((dy, dx));
                }
            }
        }
        let mut out = Array2::<u8>::zeros((h, w));
        for row in 0..h {
            for col in 0..w {
                if self.0[[row, col]] == 1 {
                    for &(dy, dx) in &offsets {
                        let rr = row as i64 + dy;
                        let cc = col as i64 + dx;
                        if rr >= 0 && rr < h as i64 && cc >= 0 && cc < w as i64 {
                            out[[rr as usize, cc as usize]] = 1;
                        }
                    }
                }
            }
        }
        HandMask(out)
    }
}
