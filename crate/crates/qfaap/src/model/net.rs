//! Grasp network forward/backward passes.

use ndarray::{Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ArchKind, HeadMaps, ModelConfig};
use crate::error::{Error, Result};
use crate::grasp::GraspMaps;
use crate::nn::{relu, relu_backward, sigmoid, sigmoid_backward, Conv2d, ConvGrad, ConvTranspose2d, PadMode};
use crate::types::Frame;

// ref-fcn channel plan
const ENC_CH: [usize; 4] = [3, 16, 24, 32];
const RES_DILATION: [usize; 3] = [2, 4, 8];
const DEC_CH: [usize; 4] = [32, 16, 8, 8];

enum Layer {
    Conv(Conv2d),
    Tconv(ConvTranspose2d),
}

impl Layer {
    fn grad_like(&self) -> ConvGrad {
        match self {
            Layer::Conv(c) => ConvGrad {
                weight: ndarray::Array4::zeros(c.weight.dim()),
                bias: ndarray::Array1::zeros(c.bias.dim()),
            },
            Layer::Tconv(t) => ConvGrad {
                weight: ndarray::Array4::zeros(t.weight.dim()),
                bias: ndarray::Array1::zeros(t.bias.dim()),
            },
        }
    }
}

/// Dense grasp-quality network with explicit backprop through both the
/// parameters and the input image.
pub struct GraspNet {
    pub config: ModelConfig,
    layers: Vec<Layer>,
    names: Vec<String>,
}

/// Cached activations of one forward pass.
pub struct NetForward {
    input: Array3<f64>,
    /// Pre-activation output of every relu site, in forward order.
    pre_relu: Vec<Array3<f64>>,
    /// Inputs to each layer, aligned with the layer list.
    layer_in: Vec<Array3<f64>>,
    w_sig: Array3<f64>,
    pub heads: HeadMaps,
}

/// Gradients of a scalar loss with respect to the four head maps
/// (`quality`/`width_norm` post-sigmoid, `sin`/`cos` raw).
#[derive(Debug, Clone)]
pub struct HeadGrads {
    pub quality: Array2<f64>,
    pub sin: Array2<f64>,
    pub cos: Array2<f64>,
    pub width_norm: Array2<f64>,
}

impl HeadGrads {
    pub fn zeros(h: usize, w: usize) -> Self {
        HeadGrads {
            quality: Array2::zeros((h, w)),
            sin: Array2::zeros((h, w)),
            cos: Array2::zeros((h, w)),
            width_norm: Array2::zeros((h, w)),
        }
    }
}

// Layer indices within `layers` for the ref-fcn plan:
// 0..3 encoder convs, 3..9 residual convs (2 per block), 9..12 decoder
// tconvs, 12..16 heads (quality, sin, cos, width).
const REF_RES0: usize = 3;
const REF_DEC0: usize = 9;
const REF_HEAD0: usize = 12;

impl GraspNet {
    pub fn init(config: ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        let mut names = Vec::new();
        match config.arch {
            ArchKind::RefFcn => {
                for i in 0..3 {
                    layers.push(Layer::Conv(
                        Conv2d::new(ENC_CH[i], ENC_CH[i + 1], 3, 2, 1, 1, &mut rng)
                            .with_pad_mode(PadMode::Reflect),
                    ));
                    names.push(format!("enc{i}"));
                }
                let ch = ENC_CH[3];
                for (i, &d) in RES_DILATION.iter().enumerate() {
                    for j in 0..2 {
                        layers.push(Layer::Conv(
                            Conv2d::new(ch, ch, 3, 1, d, d, &mut rng)
                                .with_pad_mode(PadMode::Reflect),
                        ));
                        names.push(format!("res{i}.conv{j}"));
                    }
                }
                for i in 0..3 {
                    layers.push(Layer::Tconv(ConvTranspose2d::new(
                        DEC_CH[i],
                        DEC_CH[i + 1],
                        4,
                        2,
                        1,
                        &mut rng,
                    )));
                    names.push(format!("dec{i}"));
                }
                for head in ["head_quality", "head_sin", "head_cos", "head_width"] {
                    layers.push(Layer::Conv(Conv2d::new(DEC_CH[3], 1, 1, 1, 0, 1, &mut rng)));
                    names.push(head.to_string());
                }
            }
            ArchKind::Tiny => {
                layers.push(Layer::Conv(
                    Conv2d::new(3, 8, 3, 1, 1, 1, &mut rng).with_pad_mode(PadMode::Reflect),
                ));
                names.push("conv0".to_string());
                layers.push(Layer::Conv(
                    Conv2d::new(8, 4, 3, 1, 1, 1, &mut rng).with_pad_mode(PadMode::Reflect),
                ));
                names.push("conv1".to_string());
            }
        }
        GraspNet {
            config,
            layers,
            names,
        }
    }

    pub fn input_size(&self) -> usize {
        self.config.input_size
    }

    fn conv(&self, i: usize) -> &Conv2d {
        match &self.layers[i] {
            Layer::Conv(c) => c,
            Layer::Tconv(_) => unreachable!("layer {i} is not a conv"),
        }
    }

    fn tconv(&self, i: usize) -> &ConvTranspose2d {
        match &self.layers[i] {
            Layer::Tconv(t) => t,
            Layer::Conv(_) => unreachable!("layer {i} is not a tconv"),
        }
    }

    /// Runs the network and keeps every intermediate needed for backprop.
    pub fn forward(&self, frame: &Frame) -> Result<NetForward> {
        let n = self.config.input_size;
        if frame.height() != n || frame.width() != n {
            return Err(Error::ShapeMismatch(format!(
                "frame {}x{} does not match model input {n}x{n}",
                frame.height(),
                frame.width()
            )));
        }
        let input = frame.data().clone();
        match self.config.arch {
            ArchKind::RefFcn => self.forward_ref(input),
            ArchKind::Tiny => self.forward_tiny(input),
        }
    }

    /// Convenience forward that decodes straight to grasp maps.
    pub fn infer(&self, frame: &Frame) -> Result<GraspMaps> {
        Ok(self
            .forward(frame)?
            .heads
            .to_grasp_maps(self.config.width_scale))
    }

    fn forward_tiny(&self, input: Array3<f64>) -> Result<NetForward> {
        let mut layer_in = Vec::new();
        let mut pre_relu = Vec::new();

        layer_in.push(input.clone());
        let a0 = self.conv(0).forward(&input);
        pre_relu.push(a0.clone());
        let r0 = relu(&a0);
        layer_in.push(r0.clone());
        let a1 = self.conv(1).forward(&r0);

        let slice = |c: usize| -> Array3<f64> {
            a1.index_axis(ndarray::Axis(0), c)
                .to_owned()
                .insert_axis(ndarray::Axis(0))
        };
        let q_raw = slice(0);
        let s_raw = slice(1);
        let c_raw = slice(2);
        let w_raw = slice(3);
        let w_sig = sigmoid(&w_raw);
        let to2 = |a: &Array3<f64>| a.index_axis(ndarray::Axis(0), 0).to_owned();
        let heads = HeadMaps {
            quality: to2(&q_raw),
            sin: to2(&s_raw),
            cos: to2(&c_raw),
            width_norm: to2(&w_sig),
        };
        Ok(NetForward {
            input,
            pre_relu,
            layer_in,
            w_sig,
            heads,
        })
    }

    fn forward_ref(&self, input: Array3<f64>) -> Result<NetForward> {
        let mut layer_in = Vec::with_capacity(16);
        let mut pre_relu = Vec::new();

        // encoder
        let mut x = input.clone();
        for i in 0..3 {
            layer_in.push(x.clone());
            let a = self.conv(i).forward(&x);
            pre_relu.push(a.clone());
            x = relu(&a);
        }

        // dilated residual blocks
        for b in 0..3 {
            let block_in = x.clone();
            layer_in.push(block_in.clone());
            let a1 = self.conv(REF_RES0 + 2 * b).forward(&block_in);
            pre_relu.push(a1.clone());
            let r1 = relu(&a1);
            layer_in.push(r1.clone());
            let a2 = self.conv(REF_RES0 + 2 * b + 1).forward(&r1);
            let s = &block_in + &a2;
            pre_relu.push(s.clone());
            x = relu(&s);
        }

        // decoder with crop-to-size for odd encoder stages
        let n = self.config.input_size;
        let enc_sizes = {
            let mut v = vec![n];
            for _ in 0..3 {
                let last = *v.last().unwrap();
                v.push((last + 2 - 3) / 2 + 1);
            }
            v // [n, s1, s2, s3]
        };
        for i in 0..3 {
            layer_in.push(x.clone());
            let t = self.tconv(REF_DEC0 + i).forward(&x);
            let target = enc_sizes[2 - i];
            let t = crop_to(t, target);
            pre_relu.push(t.clone());
            x = relu(&t);
        }

        // four 1x1 heads
        layer_in.push(x.clone());
        let q_raw = self.conv(REF_HEAD0).forward(&x);
        let s_raw = self.conv(REF_HEAD0 + 1).forward(&x);
        let c_raw = self.conv(REF_HEAD0 + 2).forward(&x);
        let w_raw = self.conv(REF_HEAD0 + 3).forward(&x);
        let w_sig = sigmoid(&w_raw);
        let to2 = |a: &Array3<f64>| a.index_axis(ndarray::Axis(0), 0).to_owned();
        let heads = HeadMaps {
            quality: to2(&q_raw),
            sin: to2(&s_raw),
            cos: to2(&c_raw),
            width_norm: to2(&w_sig),
        };
        Ok(NetForward {
            input,
            pre_relu,
            layer_in,
            w_sig,
            heads,
        })
    }

    /// Backpropagates head gradients to the input image and, when requested,
    /// to the flattened parameter vector.
    pub fn backward(
        &self,
        fwd: &NetForward,
        grads: &HeadGrads,
        want_params: bool,
    ) -> (Array3<f64>, Option<Vec<f64>>) {
        match self.config.arch {
            ArchKind::RefFcn => self.backward_ref(fwd, grads, want_params),
            ArchKind::Tiny => self.backward_tiny(fwd, grads, want_params),
        }
    }

    fn backward_tiny(
        &self,
        fwd: &NetForward,
        grads: &HeadGrads,
        want_params: bool,
    ) -> (Array3<f64>, Option<Vec<f64>>) {
        let up = |a: &Array2<f64>| a.clone().insert_axis(ndarray::Axis(0));
        let gq = up(&grads.quality);
        let gw = sigmoid_backward(&fwd.w_sig, &up(&grads.width_norm));
        let (_, h, w) = fwd.input.dim();
        let mut ga1 = Array3::<f64>::zeros((4, h, w));
        for r in 0..h {
            for c in 0..w {
                ga1[[0, r, c]] = gq[[0, r, c]];
                ga1[[1, r, c]] = grads.sin[[r, c]];
                ga1[[2, r, c]] = grads.cos[[r, c]];
                ga1[[3, r, c]] = gw[[0, r, c]];
            }
        }
        let (gr0, g1) = self.conv(1).backward(&fwd.layer_in[1], &ga1);
        let ga0 = relu_backward(&fwd.pre_relu[0], &gr0);
        let (gx, g0) = self.conv(0).backward(&fwd.layer_in[0], &ga0);
        let params = want_params.then(|| self.flatten_grads(vec![g0, g1]));
        (gx, params)
    }

    fn backward_ref(
        &self,
        fwd: &NetForward,
        grads: &HeadGrads,
        want_params: bool,
    ) -> (Array3<f64>, Option<Vec<f64>>) {
        let up = |a: &Array2<f64>| a.clone().insert_axis(ndarray::Axis(0));
        let mut layer_grads: Vec<ConvGrad> = Vec::new();
        if want_params {
            layer_grads = self.layers.iter().map(|l| l.grad_like()).collect();
        }

        // Cache layout (forward order):
        //   layer_in: enc inputs 0..3; per res block: block_in 3+2b, relu(a1)
        //   4+2b; decoder inputs 9..12; head-bank input 12.
        //   pre_relu: enc 0..3; per res block: a1 3+2b, sum 4+2b; decoder 9..12.
        let conv_bwd = |conv: &Conv2d,
                        x: &Array3<f64>,
                        gy: &Array3<f64>,
                        slot: usize,
                        lg: &mut Vec<ConvGrad>| {
            if want_params {
                let (gi, gp) = conv.backward(x, gy);
                lg[slot] = gp;
                gi
            } else {
                conv.backward_input(x.dim(), gy)
            }
        };

        // heads
        let gq_raw = up(&grads.quality);
        let gw_raw = sigmoid_backward(&fwd.w_sig, &up(&grads.width_norm));
        let head_in = &fwd.layer_in[12];
        let raw_grads = [gq_raw, up(&grads.sin), up(&grads.cos), gw_raw];
        let mut g = Array3::<f64>::zeros(head_in.dim());
        for (k, graw) in raw_grads.iter().enumerate() {
            g += &conv_bwd(
                self.conv(REF_HEAD0 + k),
                head_in,
                graw,
                REF_HEAD0 + k,
                &mut layer_grads,
            );
        }

        // decoder (reverse)
        for i in (0..3).rev() {
            let gpre = relu_backward(&fwd.pre_relu[9 + i], &g);
            let dec_in = &fwd.layer_in[9 + i];
            let tc = self.tconv(REF_DEC0 + i);
            let full = tc.out_size(dec_in.dim().1);
            let gfull = uncrop_to(&gpre, full);
            if want_params {
                let (gi, gp) = tc.backward(dec_in, &gfull);
                layer_grads[REF_DEC0 + i] = gp;
                g = gi;
            } else {
                g = tc.backward_input(dec_in.dim(), &gfull);
            }
        }

        // residual blocks (reverse)
        for b in (0..3).rev() {
            let gs = relu_backward(&fwd.pre_relu[4 + 2 * b], &g);
            let grb1 = conv_bwd(
                self.conv(REF_RES0 + 2 * b + 1),
                &fwd.layer_in[4 + 2 * b],
                &gs,
                REF_RES0 + 2 * b + 1,
                &mut layer_grads,
            );
            let gb1 = relu_backward(&fwd.pre_relu[3 + 2 * b], &grb1);
            let gin = conv_bwd(
                self.conv(REF_RES0 + 2 * b),
                &fwd.layer_in[3 + 2 * b],
                &gb1,
                REF_RES0 + 2 * b,
                &mut layer_grads,
            );
            g = gs + &gin;
        }

        // encoder (reverse)
        for i in (0..3).rev() {
            let ga = relu_backward(&fwd.pre_relu[i], &g);
            g = conv_bwd(self.conv(i), &fwd.layer_in[i], &ga, i, &mut layer_grads);
        }

        let params = want_params.then(|| self.flatten_grads(layer_grads));
        (g, params)
    }

    fn flatten_grads(&self, grads: Vec<ConvGrad>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for g in &grads {
            out.extend(g.weight.iter());
            out.extend(g.bias.iter());
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Conv(c) => c.weight.len() + c.bias.len(),
                Layer::Tconv(t) => t.weight.len() + t.bias.len(),
            })
            .sum()
    }

    /// Parameter names and shapes in canonical (serialization) order.
    pub fn manifest(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (layer, name) in self.layers.iter().zip(&self.names) {
            let (wd, bd) = match layer {
                Layer::Conv(c) => (c.weight.dim(), c.bias.len()),
                Layer::Tconv(t) => (t.weight.dim(), t.bias.len()),
            };
            out.push((format!("{name}.weight"), vec![wd.0, wd.1, wd.2, wd.3]));
            out.push((format!("{name}.bias"), vec![bd]));
        }
        out
    }

    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.extend(c.weight.iter());
                    out.extend(c.bias.iter());
                }
                Layer::Tconv(t) => {
                    out.extend(t.weight.iter());
                    out.extend(t.bias.iter());
                }
            }
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "parameter vector length");
        let mut off = 0;
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => {
                    for v in c.weight.iter_mut() {
                        *v = flat[off];
                        off += 1;
                    }
                    for v in c.bias.iter_mut() {
                        *v = flat[off];
                        off += 1;
                    }
                }
                Layer::Tconv(t) => {
                    for v in t.weight.iter_mut() {
                        *v = flat[off];
                        off += 1;
                    }
                    for v in t.bias.iter_mut() {
                        *v = flat[off];
                        off += 1;
                    }
                }
            }
        }
    }
}

fn crop_to(x: Array3<f64>, side: usize) -> Array3<f64> {
    let (_, h, w) = x.dim();
    if h == side && w == side {
        return x;
    }
    x.slice(ndarray::s![.., 0..side, 0..side]).to_owned()
}

fn uncrop_to(g: &Array3<f64>, side: usize) -> Array3<f64> {
    let (c, h, w) = g.dim();
    if h == side && w == side {
        return g.clone();
    }
    let mut out = Array3::zeros((c, side, side));
    out.slice_mut(ndarray::s![.., 0..h, 0..w]).assign(g);
    out
}
