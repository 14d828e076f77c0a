//! im2col-based 2-D convolution and transposed convolution with explicit
//! forward/backward passes.

use ndarray::{Array1, Array2, Array3, Array4};
use rand::Rng;

/// Spatial padding mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadMode {
    Zero,
    /// Mirror without repeating the edge sample. Keeps border features on
    /// the same statistics as the interior.
    Reflect,
}

/// Output spatial size of a convolution along one axis.
fn conv_out(n: usize, k: usize, stride: usize, pad: usize, dilation: usize) -> usize {
    let eff = dilation * (k - 1) + 1;
    (n + 2 * pad - eff) / stride + 1
}

/// Maps a (possibly out-of-range) source index according to the pad mode;
/// `None` means the tap contributes zero.
#[inline]
fn pad_index(i: i64, n: usize, mode: PadMode) -> Option<usize> {
    if i >= 0 && i < n as i64 {
        return Some(i as usize);
    }
    match mode {
        PadMode::Zero => None,
        PadMode::Reflect => {
            let n = n as i64;
            let mut i = i;
            while i < 0 || i >= n {
                if i < 0 {
                    i = -i - 1;
                }
                if i >= n {
                    i = 2 * n - i - 1;
                }
            }
            Some(i as usize)
        }
    }
}

/// Unfolds `(C, H, W)` into `(C*K*K, Ho*Wo)` patches.
fn im2col(
    x: &Array3<f64>,
    k: usize,
    stride: usize,
    pad: usize,
    dilation: usize,
    mode: PadMode,
) -> (Array2<f64>, usize, usize) {
    let (c, h, w) = x.dim();
    let ho = conv_out(h, k, stride, pad, dilation);
    let wo = conv_out(w, k, stride, pad, dilation);
    let mut cols = Array2::<f64>::zeros((c * k * k, ho * wo));
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                for oy in 0..ho {
                    let Some(iy) = pad_index(
                        (oy * stride + ky * dilation) as i64 - pad as i64,
                        h,
                        mode,
                    ) else {
                        continue;
                    };
                    for ox in 0..wo {
                        let Some(ix) = pad_index(
                            (ox * stride + kx * dilation) as i64 - pad as i64,
                            w,
                            mode,
                        ) else {
                            continue;
                        };
                        cols[[row, oy * wo + ox]] = x[[ci, iy, ix]];
                    }
                }
            }
        }
    }
    (cols, ho, wo)
}

/// Adjoint of [`im2col`]: scatter-adds `(C*K*K, Ho*Wo)` back into `(C, H, W)`.
fn col2im(
    cols: &Array2<f64>,
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    dilation: usize,
    mode: PadMode,
) -> Array3<f64> {
    let ho = conv_out(h, k, stride, pad, dilation);
    let wo = conv_out(w, k, stride, pad, dilation);
    let mut x = Array3::<f64>::zeros((c, h, w));
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                for oy in 0..ho {
                    let Some(iy) = pad_index(
                        (oy * stride + ky * dilation) as i64 - pad as i64,
                        h,
                        mode,
                    ) else {
                        continue;
                    };
                    for ox in 0..wo {
                        let Some(ix) = pad_index(
                            (ox * stride + kx * dilation) as i64 - pad as i64,
                            w,
                            mode,
                        ) else {
                            continue;
                        };
                        x[[ci, iy, ix]] += cols[[row, oy * wo + ox]];
                    }
                }
            }
        }
    }
    x
}

/// 2-D convolution layer.
#[derive(Debug, Clone)]
pub struct Conv2d {
    /// `(Cout, Cin, K, K)`
    pub weight: Array4<f64>,
    pub bias: Array1<f64>,
    pub stride: usize,
    pub pad: usize,
    pub dilation: usize,
    pub pad_mode: PadMode,
}

/// Weight/bias gradients of one layer.
#[derive(Debug, Clone)]
pub struct ConvGrad {
    pub weight: Array4<f64>,
    pub bias: Array1<f64>,
}

impl Conv2d {
    pub fn new(
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        pad: usize,
        dilation: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = (cin * k * k) as f64;
        let bound = (6.0 / fan_in).sqrt();
        let weight =
            Array4::from_shape_fn((cout, cin, k, k), |_| rng.random_range(-bound..bound));
        Conv2d {
            weight,
            bias: Array1::zeros(cout),
            stride,
            pad,
            dilation,
            pad_mode: PadMode::Zero,
        }
    }

    pub fn with_pad_mode(mut self, mode: PadMode) -> Self {
        self.pad_mode = mode;
        self
    }

    pub fn kernel(&self) -> usize {
        self.weight.dim().2
    }

    fn weight_2d(&self) -> Array2<f64> {
        let (cout, cin, k, _) = self.weight.dim();
        self.weight
            .to_shape((cout, cin * k * k))
            .expect("contiguous weight")
            .to_owned()
    }

    pub fn forward(&self, x: &Array3<f64>) -> Array3<f64> {
        let (cout, _, k, _) = self.weight.dim();
        let (cols, ho, wo) = im2col(x, k, self.stride, self.pad, self.dilation, self.pad_mode);
        let y2 = self.weight_2d().dot(&cols);
        let mut y = y2
            .into_shape_with_order((cout, ho, wo))
            .expect("conv output shape");
        for co in 0..cout {
            let b = self.bias[co];
            y.index_axis_mut(ndarray::Axis(0), co).mapv_inplace(|v| v + b);
        }
        y
    }

    /// Returns the input gradient and the parameter gradients.
    pub fn backward(&self, x: &Array3<f64>, grad_out: &Array3<f64>) -> (Array3<f64>, ConvGrad) {
        let (cout, cin, k, _) = self.weight.dim();
        let (_, h, w) = x.dim();
        let (cols, ho, wo) = im2col(x, k, self.stride, self.pad, self.dilation, self.pad_mode);
        let gy2 = grad_out
            .to_shape((cout, ho * wo))
            .expect("contiguous grad")
            .to_owned();
        let gw2 = gy2.dot(&cols.t());
        let gweight = gw2
            .into_shape_with_order((cout, cin, k, k))
            .expect("weight grad shape");
        let gbias = Array1::from_iter((0..cout).map(|co| gy2.row(co).sum()));
        let gcols = self.weight_2d().t().dot(&gy2);
        let gx = col2im(&gcols, cin, h, w, k, self.stride, self.pad, self.dilation, self.pad_mode);
        (
            gx,
            ConvGrad {
                weight: gweight,
                bias: gbias,
            },
        )
    }

    /// Input gradient only; skips the weight-gradient GEMM.
    pub fn backward_input(&self, input_dim: (usize, usize, usize), grad_out: &Array3<f64>) -> Array3<f64> {
        let (cout, cin, k, _) = self.weight.dim();
        let (_, h, w) = input_dim;
        let (_, ho, wo) = grad_out.dim();
        let gy2 = grad_out
            .to_shape((cout, ho * wo))
            .expect("contiguous grad")
            .to_owned();
        let gcols = self.weight_2d().t().dot(&gy2);
        col2im(&gcols, cin, h, w, k, self.stride, self.pad, self.dilation, self.pad_mode)
    }
}

/// 2-D transposed convolution (stride-s upsampling), the adjoint of a
/// convolution with the same geometry, normalized by the per-position tap
/// count so border outputs share the interior scale.
#[derive(Debug, Clone)]
pub struct ConvTranspose2d {
    /// `(Cin, Cout, K, K)`
    pub weight: Array4<f64>,
    pub bias: Array1<f64>,
    pub stride: usize,
    pub pad: usize,
}

impl ConvTranspose2d {
    pub fn new(cin: usize, cout: usize, k: usize, stride: usize, pad: usize, rng: &mut impl Rng) -> Self {
        let fan_in = (cin * k * k) as f64;
        let bound = (6.0 / fan_in).sqrt();
        let weight = Array4::from_shape_fn((cin, cout, k, k), |_| rng.random_range(-bound..bound));
        ConvTranspose2d {
            weight,
            bias: Array1::zeros(cout),
            stride,
            pad,
        }
    }

    pub fn kernel(&self) -> usize {
        self.weight.dim().2
    }

    pub fn out_size(&self, n: usize) -> usize {
        (n - 1) * self.stride + self.kernel() - 2 * self.pad
    }

    fn weight_2d(&self) -> Array2<f64> {
        let (cin, cout, k, _) = self.weight.dim();
        self.weight
            .to_shape((cin, cout * k * k))
            .expect("contiguous weight")
            .to_owned()
    }

    /// Taps landing on each output position along one axis; border cells
    /// receive fewer than interior cells.
    fn axis_counts(&self, n_in: usize) -> Vec<f64> {
        let n_out = self.out_size(n_in);
        let k = self.kernel();
        let mut counts = vec![0.0f64; n_out];
        for i in 0..n_in {
            for kk in 0..k {
                let o = (i * self.stride + kk) as i64 - self.pad as i64;
                if o >= 0 && (o as usize) < n_out {
                    counts[o as usize] += 1.0;
                }
            }
        }
        counts
    }

    fn apply_count_norm(&self, y: &mut Array3<f64>, h_in: usize, w_in: usize, invert: bool) {
        let rows = self.axis_counts(h_in);
        let cols = self.axis_counts(w_in);
        let (c, ho, wo) = y.dim();
        for ch in 0..c {
            for r in 0..ho {
                for cc in 0..wo {
                    let n = rows[r] * cols[cc];
                    if invert {
                        y[[ch, r, cc]] *= n;
                    } else {
                        y[[ch, r, cc]] /= n;
                    }
                }
            }
        }
    }

    pub fn forward(&self, x: &Array3<f64>) -> Array3<f64> {
        let (cin, cout, k, _) = self.weight.dim();
        let (cx, h, w) = x.dim();
        debug_assert_eq!(cx, cin);
        let ho = self.out_size(h);
        let wo = self.out_size(w);
        let x2 = x.to_shape((cin, h * w)).expect("contiguous input").to_owned();
        let cols = self.weight_2d().t().dot(&x2); // (Cout*K*K, H*W)
        let mut y = col2im(&cols, cout, ho, wo, k, self.stride, self.pad, 1, PadMode::Zero);
        self.apply_count_norm(&mut y, h, w, false);
        for co in 0..cout {
            let b = self.bias[co];
            y.index_axis_mut(ndarray::Axis(0), co).mapv_inplace(|v| v + b);
        }
        y
    }

    pub fn backward(&self, x: &Array3<f64>, grad_out: &Array3<f64>) -> (Array3<f64>, ConvGrad) {
        let (cin, cout, k, _) = self.weight.dim();
        let (_, h, w) = x.dim();
        // Bias sits after the normalization, so its gradient uses the raw
        // output gradient; everything else sees the normalized one.
        let mut gbias = Array1::<f64>::zeros(cout);
        for co in 0..cout {
            gbias[co] = grad_out.index_axis(ndarray::Axis(0), co).sum();
        }
        let mut gnorm = grad_out.clone();
        self.apply_count_norm(&mut gnorm, h, w, false);
        let (gcols, ho, wo) = im2col(&gnorm, k, self.stride, self.pad, 1, PadMode::Zero);
        debug_assert_eq!((ho, wo), (h, w));
        let x2 = x.to_shape((cin, h * w)).expect("contiguous input").to_owned();
        let gw2 = x2.dot(&gcols.t()); // (Cin, Cout*K*K)
        let gweight = gw2
            .into_shape_with_order((cin, cout, k, k))
            .expect("weight grad shape");
        let gx2 = self.weight_2d().dot(&gcols); // (Cin, H*W)
        let gx = gx2
            .into_shape_with_order((cin, h, w))
            .expect("input grad shape");
        (
            gx,
            ConvGrad {
                weight: gweight,
                bias: gbias,
            },
        )
    }

    /// Input gradient only; skips the weight-gradient GEMM.
    pub fn backward_input(&self, input_dim: (usize, usize, usize), grad_out: &Array3<f64>) -> Array3<f64> {
        let (cin, _, k, _) = self.weight.dim();
        let (_, h, w) = input_dim;
        let mut gnorm = grad_out.clone();
        self.apply_count_norm(&mut gnorm, h, w, false);
        let (gcols, ho, wo) = im2col(&gnorm, k, self.stride, self.pad, 1, PadMode::Zero);
        debug_assert_eq!((ho, wo), (h, w));
        let gx2 = self.weight_2d().dot(&gcols);
        gx2.into_shape_with_order((cin, h, w))
            .expect("input grad shape")
    }
}
