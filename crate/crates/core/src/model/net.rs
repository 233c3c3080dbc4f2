use super::{CnnModel, LayerParams, LayerSpec, Shape};
use crate::error::{Error, Result};

/// Activations entering each layer plus the final logits.
#[derive(Debug, Clone)]
pub struct Trace {
    pub shapes: Vec<Shape>,
    pub activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn logits(&self) -> [f64; 2] {
        let out = self.activations.last().expect("trace has output");
        [out[0], out[1]]
    }
}

/// Per-layer parameter gradients, aligned with `CnnModel::params`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerParams>,
}

impl Gradients {
    pub fn zeros_like(model: &CnnModel) -> Self {
        Gradients {
            layers: model
                .params
                .iter()
                .map(|p| LayerParams {
                    weights: vec![0.0; p.weights.len()],
                    bias: vec![0.0; p.bias.len()],
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *v *= k;
            }
        }
    }
}

pub fn softmax2(logits: &[f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

/// Cross-entropy of the softmax of `logits` against `label`.
pub fn cross_entropy(logits: &[f64; 2], label: u8) -> f64 {
    let m = logits[0].max(logits[1]);
    let lse = m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
    lse - logits[label as usize]
}

/// Valid output positions `o` for which `o * stride + tap - pad` lands in
/// `0..len`.
#[inline]
fn valid_range(out_len: usize, in_len: usize, tap: usize, pad: usize, stride: usize) -> (usize, usize) {
    let lo = if tap >= pad { 0 } else { (pad - tap).div_ceil(stride) };
    // largest o with o*stride + tap - pad <= in_len - 1
    let limit = in_len + pad - 1;
    let hi = if limit < tap { 0 } else { ((limit - tap) / stride + 1).min(out_len) };
    (lo, hi.max(lo))
}

fn conv_forward(
    x: &[f64],
    xs: Shape,
    ys: Shape,
    p: &LayerParams,
    kernel: usize,
    stride: usize,
) -> Vec<f64> {
    let pad = kernel / 2;
    let mut y = vec![0.0; ys.len()];
    for (o, plane) in y.chunks_mut(ys.h * ys.w).enumerate() {
        plane.fill(p.bias[o]);
        for i in 0..xs.c {
            let xin = &x[i * xs.h * xs.w..][..xs.h * xs.w];
            let wk = &p.weights[(o * xs.c + i) * kernel * kernel..][..kernel * kernel];
            for ky in 0..kernel {
                let (oy0, oy1) = valid_range(ys.h, xs.h, ky, pad, stride);
                for kx in 0..kernel {
                    let w = wk[ky * kernel + kx];
                    let (ox0, ox1) = valid_range(ys.w, xs.w, kx, pad, stride);
                    if ox0 >= ox1 {
                        continue;
                    }
                    for oy in oy0..oy1 {
                        let iy = oy * stride + ky - pad;
                        let out_row = &mut plane[oy * ys.w + ox0..oy * ys.w + ox1];
                        let ix0 = ox0 * stride + kx - pad;
                        let in_row = &xin[iy * xs.w..][..xs.w];
                        if stride == 1 {
                            for (o, v) in out_row.iter_mut().zip(&in_row[ix0..]) {
                                *o += w * v;
                            }
                        } else {
                            for (j, o) in out_row.iter_mut().enumerate() {
                                *o += w * in_row[ix0 + j * stride];
                            }
                        }
                    }
                }
            }
        }
    }
    y
}

/// Returns input gradient (when `need_dx`) and accumulates parameter gradients.
#[allow(clippy::too_many_arguments)]
fn conv_backward(
    x: &[f64],
    xs: Shape,
    ys: Shape,
    p: &LayerParams,
    kernel: usize,
    stride: usize,
    dy: &[f64],
    g: &mut LayerParams,
    need_dx: bool,
) -> Vec<f64> {
    let pad = kernel / 2;
    let mut dx = if need_dx { vec![0.0; xs.len()] } else { Vec::new() };
    for o in 0..ys.c {
        let dplane = &dy[o * ys.h * ys.w..][..ys.h * ys.w];
        g.bias[o] += dplane.iter().sum::<f64>();
        for i in 0..xs.c {
            let xin = &x[i * xs.h * xs.w..][..xs.h * xs.w];
            let base = (o * xs.c + i) * kernel * kernel;
            for ky in 0..kernel {
                let (oy0, oy1) = valid_range(ys.h, xs.h, ky, pad, stride);
                for kx in 0..kernel {
                    let (ox0, ox1) = valid_range(ys.w, xs.w, kx, pad, stride);
                    if ox0 >= ox1 {
                        continue;
                    }
                    let w = p.weights[base + ky * kernel + kx];
                    let mut gw = 0.0;
                    for oy in oy0..oy1 {
                        let iy = oy * stride + ky - pad;
                        let drow = &dplane[oy * ys.w + ox0..oy * ys.w + ox1];
                        let ix0 = ox0 * stride + kx - pad;
                        let in_row = &xin[iy * xs.w..][..xs.w];
                        if stride == 1 {
                            gw += drow.iter().zip(&in_row[ix0..]).map(|(d, v)| d * v).sum::<f64>();
                            if need_dx {
                                let dx_row = &mut dx[i * xs.h * xs.w + iy * xs.w + ix0..][..drow.len()];
                                for (t, d) in dx_row.iter_mut().zip(drow) {
                                    *t += w * d;
                                }
                            }
                        } else {
                            for (j, d) in drow.iter().enumerate() {
                                let ix = ix0 + j * stride;
                                gw += d * in_row[ix];
                                if need_dx {
                                    dx[i * xs.h * xs.w + iy * xs.w + ix] += w * d;
                                }
                            }
                        }
                    }
                    g.weights[base + ky * kernel + kx] += gw;
                }
            }
        }
    }
    dx
}

fn maxpool_forward(x: &[f64], xs: Shape, ys: Shape) -> Vec<f64> {
    let mut y = vec![0.0; ys.len()];
    for c in 0..xs.c {
        let xin = &x[c * xs.h * xs.w..];
        for oy in 0..ys.h {
            for ox in 0..ys.w {
                let i = 2 * oy * xs.w + 2 * ox;
                y[c * ys.h * ys.w + oy * ys.w + ox] =
                    xin[i].max(xin[i + 1]).max(xin[i + xs.w]).max(xin[i + xs.w + 1]);
            }
        }
    }
    y
}

fn maxpool_backward(x: &[f64], xs: Shape, ys: Shape, dy: &[f64]) -> Vec<f64> {
    let mut dx = vec![0.0; xs.len()];
    for c in 0..xs.c {
        let off = c * xs.h * xs.w;
        for oy in 0..ys.h {
            for ox in 0..ys.w {
                let i = off + 2 * oy * xs.w + 2 * ox;
                // first maximum in row-major window order receives the gradient
                let mut best = i;
                for j in [i + 1, i + xs.w, i + xs.w + 1] {
                    if x[j] > x[best] {
                        best = j;
                    }
                }
                dx[best] += dy[c * ys.h * ys.w + oy * ys.w + ox];
            }
        }
    }
    dx
}

fn dense_forward(x: &[f64], p: &LayerParams) -> Vec<f64> {
    p.bias
        .iter()
        .zip(p.weights.chunks(x.len()))
        .map(|(b, row)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
        .collect()
}

/// Rounds non-negative activations onto an unsigned `bits`-wide grid with a
/// power-of-two step covering the maximum.
pub(crate) fn quantize_activations(v: &mut [f64], bits: u32) {
    let max = v.iter().fold(0.0f64, |m, &a| m.max(a.abs()));
    if max == 0.0 {
        return;
    }
    let levels = ((1u64 << bits) - 1) as f64;
    let mut exp = (max / levels).log2().ceil() as i32;
    while max / 2f64.powi(exp) > levels {
        exp += 1;
    }
    while exp > -1074 && max / 2f64.powi(exp - 1) <= levels {
        exp -= 1;
    }
    let step = 2f64.powi(exp);
    for a in v {
        *a = (*a / step).round() * step;
    }
}

pub(crate) fn forward_trace(model: &CnnModel, input: &[f64], act_bits: Option<u32>) -> Trace {
    let shapes = model.arch.shapes().expect("model architecture validated at construction");
    assert_eq!(input.len(), shapes[0].len(), "input length does not match {}", shapes[0]);
    let mut activations = Vec::with_capacity(shapes.len());
    activations.push(input.to_vec());
    for (l, layer) in model.arch.layers.iter().enumerate() {
        let x = &activations[l];
        let (xs, ys) = (shapes[l], shapes[l + 1]);
        let p = &model.params[l];
        let mut y = match *layer {
            LayerSpec::Conv { kernel, stride, .. } => conv_forward(x, xs, ys, p, kernel, stride),
            LayerSpec::MaxPool2 => maxpool_forward(x, xs, ys),
            LayerSpec::Relu => x.iter().map(|v| v.max(0.0)).collect(),
            LayerSpec::GlobalAvgPool => x
                .chunks(xs.h * xs.w)
                .map(|c| c.iter().sum::<f64>() / c.len() as f64)
                .collect(),
            LayerSpec::Dense { .. } => dense_forward(x, p),
        };
        if let (LayerSpec::Relu, Some(bits)) = (layer, act_bits) {
            quantize_activations(&mut y, bits);
        }
        activations.push(y);
    }
    Trace { shapes, activations }
}

pub(crate) fn logits(model: &CnnModel, input: &[f64], act_bits: Option<u32>) -> [f64; 2] {
    forward_trace(model, input, act_bits).logits()
}

/// Gradients of the loss with respect to every parameter, given the
/// gradient at the logits.
pub(crate) fn backward(model: &CnnModel, trace: &Trace, dlogits: [f64; 2]) -> Gradients {
    let mut grads = Gradients::zeros_like(model);
    let mut dy = dlogits.to_vec();
    for l in (0..model.arch.layers.len()).rev() {
        let x = &trace.activations[l];
        let (xs, ys) = (trace.shapes[l], trace.shapes[l + 1]);
        let need_dx = l > 0;
        dy = match model.arch.layers[l] {
            LayerSpec::Conv { kernel, stride, .. } => conv_backward(
                x,
                xs,
                ys,
                &model.params[l],
                kernel,
                stride,
                &dy,
                &mut grads.layers[l],
                need_dx,
            ),
            LayerSpec::MaxPool2 => maxpool_backward(x, xs, ys, &dy),
            LayerSpec::Relu => x
                .iter()
                .zip(&dy)
                .map(|(&v, &d)| if v > 0.0 { d } else { 0.0 })
                .collect(),
            LayerSpec::GlobalAvgPool => {
                let n = (xs.h * xs.w) as f64;
                dy.iter()
                    .flat_map(|&d| std::iter::repeat_n(d / n, xs.h * xs.w))
                    .collect()
            }
            LayerSpec::Dense { .. } => {
                let p = &model.params[l];
                let g = &mut grads.layers[l];
                let mut dx = vec![0.0; x.len()];
                for (o, &d) in dy.iter().enumerate() {
                    g.bias[o] += d;
                    let row = &p.weights[o * x.len()..][..x.len()];
                    let grow = &mut g.weights[o * x.len()..][..x.len()];
                    for ((gw, &v), (t, &w)) in grow.iter_mut().zip(x).zip(dx.iter_mut().zip(row)) {
                        *gw += d * v;
                        *t += d * w;
                    }
                }
                dx
            }
        };
    }
    grads
}

/// Cross-entropy loss and its parameter gradients for one sample.
pub fn loss_and_grad(model: &CnnModel, input: &[f64], label: u8) -> Result<(f64, Gradients)> {
    let trace = forward_trace(model, input, None);
    let logits = trace.logits();
    let loss = cross_entropy(&logits, label);
    if !loss.is_finite() {
        let layer = trace
            .activations
            .iter()
            .skip(1)
            .position(|a| a.iter().any(|v| !v.is_finite()))
            .unwrap_or(model.arch.layers.len() - 1);
        return Err(Error::NonFinite { what: "loss", layer });
    }
    let p = softmax2(&logits);
    let mut d = p;
    d[label as usize] -= 1.0;
    Ok((loss, backward(model, &trace, d)))
}
