//! Minimal dense-prediction building blocks with explicit backprop.
//!
//! Everything is f64 and per-sample `(C, H, W)`; batching is a loop at the
//! call site so gradient reductions keep a fixed order.

mod adam;
mod conv;

pub use adam::Adam;
pub use conv::{Conv2d, ConvGrad, ConvTranspose2d, PadMode};

use ndarray::Array3;

pub fn relu(x: &Array3<f64>) -> Array3<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Gradient of relu given the forward input.
pub fn relu_backward(x: &Array3<f64>, grad_out: &Array3<f64>) -> Array3<f64> {
    let mut g = grad_out.clone();
    g.zip_mut_with(x, |gv, xv| {
        if *xv <= 0.0 {
            *gv = 0.0;
        }
    });
    g
}

pub fn sigmoid(x: &Array3<f64>) -> Array3<f64> {
    x.mapv(|v| 1.0 / (1.0 + (-v).exp()))
}

/// Gradient of sigmoid given the forward *output*.
pub fn sigmoid_backward(y: &Array3<f64>, grad_out: &Array3<f64>) -> Array3<f64> {
    let mut g = grad_out.clone();
    g.zip_mut_with(y, |gv, yv| *gv *= yv * (1.0 - yv));
    g
}

/// Sign with sgn(0) = 0.
pub fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
