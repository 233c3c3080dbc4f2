//! A small framework-free CNN for binary classification of Super Characters
//! images, with SGD training and power-of-two fixed-point quantization.

mod checkpoint;
mod net;
mod quant;
mod train;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::glyph::BACKGROUND;
use crate::layout::{downsample_ink, IMAGE_SIDE};

pub use checkpoint::{load_fixed, load_model, save_fixed, save_model, FIXED_MAGIC, MODEL_MAGIC};
pub use net::{cross_entropy, loss_and_grad, softmax2, Gradients, Trace};
pub use quant::{quantize, quantize_tensor, FixedPointModel, QuantLayer, QuantTensor};
pub use train::{accuracy, train, InMemorySamples, SampleSource, TrainConfig, TrainReport, Trainer};

/// Activation tensor shape, channels-first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub const fn new(c: usize, h: usize, w: usize) -> Self {
        Shape { c, h, w }
    }

    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}×{}×{}", self.c, self.h, self.w)
    }
}

/// One layer of the stack. Convolutions pad by `kernel / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerSpec {
    Conv {
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    MaxPool2,
    Relu,
    GlobalAvgPool,
    Dense {
        out_dim: usize,
    },
}

impl LayerSpec {
    pub fn conv(out_channels: usize, kernel: usize) -> Self {
        LayerSpec::Conv {
            out_channels,
            kernel,
            stride: 1,
        }
    }

    pub fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. } | LayerSpec::Dense { .. })
    }

    fn output_shape(&self, input: Shape) -> std::result::Result<Shape, String> {
        match *self {
            LayerSpec::Conv {
                out_channels,
                kernel,
                stride,
            } => {
                if out_channels == 0 || kernel == 0 || stride == 0 {
                    return Err("conv needs positive channels, kernel and stride".into());
                }
                let pad = kernel / 2;
                if input.h + 2 * pad < kernel || input.w + 2 * pad < kernel {
                    return Err(format!("kernel {kernel} larger than padded input {input}"));
                }
                Ok(Shape::new(
                    out_channels,
                    (input.h + 2 * pad - kernel) / stride + 1,
                    (input.w + 2 * pad - kernel) / stride + 1,
                ))
            }
            LayerSpec::MaxPool2 => {
                if input.h < 2 || input.w < 2 {
                    return Err(format!("cannot 2×2 pool a {input} input"));
                }
                Ok(Shape::new(input.c, input.h / 2, input.w / 2))
            }
            LayerSpec::Relu => Ok(input),
            LayerSpec::GlobalAvgPool => Ok(Shape::new(input.c, 1, 1)),
            LayerSpec::Dense { out_dim } => {
                if out_dim == 0 {
                    return Err("dense needs a positive output size".into());
                }
                Ok(Shape::new(out_dim, 1, 1))
            }
        }
    }

    /// `(weight count, bias count)` given the layer's input shape.
    fn param_counts(&self, input: Shape) -> (usize, usize) {
        match *self {
            LayerSpec::Conv {
                out_channels,
                kernel,
                ..
            } => (out_channels * input.c * kernel * kernel, out_channels),
            LayerSpec::Dense { out_dim } => (out_dim * input.len(), out_dim),
            _ => (0, 0),
        }
    }

    fn fan_in(&self, input: Shape) -> usize {
        match *self {
            LayerSpec::Conv { kernel, .. } => input.c * kernel * kernel,
            LayerSpec::Dense { .. } => input.len(),
            _ => 0,
        }
    }
}

/// Input shape plus layer stack; the output must be two logits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CnnArch {
    pub input: Shape,
    pub layers: Vec<LayerSpec>,
}

impl CnnArch {
    /// conv3×3(16)-relu-pool, conv3×3(32)-relu-pool, conv3×3(64)-relu-pool,
    /// conv3×3(64)-relu-pool, global average pool, dense(2).
    pub fn standard(input: Shape) -> Self {
        let mut layers = Vec::new();
        for ch in [16, 32, 64, 64] {
            layers.extend([LayerSpec::conv(ch, 3), LayerSpec::Relu, LayerSpec::MaxPool2]);
        }
        layers.extend([LayerSpec::GlobalAvgPool, LayerSpec::Dense { out_dim: 2 }]);
        CnnArch { input, layers }
    }

    /// A much cheaper stack for desk-scale protocol runs: a strided first
    /// convolution and two narrow convolutions.
    pub fn compact(input: Shape) -> Self {
        CnnArch {
            input,
            layers: vec![
                LayerSpec::Conv {
                    out_channels: 8,
                    kernel: 3,
                    stride: 2,
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool2,
                LayerSpec::conv(16, 3),
                LayerSpec::Relu,
                LayerSpec::MaxPool2,
                LayerSpec::GlobalAvgPool,
                LayerSpec::Dense { out_dim: 2 },
            ],
        }
    }

    /// Shapes entering each layer, followed by the output shape.
    pub fn shapes(&self) -> Result<Vec<Shape>> {
        if self.input.is_empty() {
            return Err(Error::Shape {
                layer: 0,
                message: format!("empty input shape {}", self.input),
            });
        }
        let mut shapes = vec![self.input];
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer
                .output_shape(shapes[i])
                .map_err(|message| Error::Shape { layer: i, message })?;
            shapes.push(next);
        }
        let out = *shapes.last().expect("input shape present");
        if out != Shape::new(2, 1, 1) {
            return Err(Error::Shape {
                layer: self.layers.len().saturating_sub(1),
                message: format!("final output is {out}, expected 2 logits"),
            });
        }
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<()> {
        self.shapes().map(|_| ())
    }
}

/// Weights and biases of one layer; empty for parameter-free layers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerParams {
    fn zeros(counts: (usize, usize)) -> Self {
        LayerParams {
            weights: vec![0.0; counts.0],
            bias: vec![0.0; counts.1],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub arch: CnnArch,
    /// One entry per layer, aligned with `arch.layers`.
    pub params: Vec<LayerParams>,
    pub rng_seed: u64,
}

/// He-scaled uniform initialization from ChaCha8 seeded with `seed`; biases
/// start at zero.
pub fn init_model(arch: &CnnArch, seed: u64) -> Result<CnnModel> {
    let shapes = arch.shapes()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = arch
        .layers
        .iter()
        .zip(&shapes)
        .map(|(layer, &input)| {
            let mut p = LayerParams::zeros(layer.param_counts(input));
            if !p.weights.is_empty() {
                let bound = (6.0 / layer.fan_in(input) as f64).sqrt();
                for w in &mut p.weights {
                    *w = rng.random_range(-bound..bound);
                }
            }
            p
        })
        .collect();
    Ok(CnnModel {
        arch: arch.clone(),
        params,
        rng_seed: seed,
    })
}

impl CnnModel {
    /// A model with every parameter zero.
    pub fn zeros(arch: &CnnArch) -> Result<Self> {
        let shapes = arch.shapes()?;
        Ok(CnnModel {
            arch: arch.clone(),
            params: arch
                .layers
                .iter()
                .zip(&shapes)
                .map(|(l, &s)| LayerParams::zeros(l.param_counts(s)))
                .collect(),
            rng_seed: 0,
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(LayerParams::len).sum()
    }

    pub fn check_finite(&self) -> Result<()> {
        for (layer, p) in self.params.iter().enumerate() {
            if p.weights.iter().chain(&p.bias).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: "weights",
                    layer,
                });
            }
        }
        Ok(())
    }

    /// Rounds every parameter through `f32`, the checkpoint precision.
    pub fn round_to_f32(&mut self) {
        for p in &mut self.params {
            for v in p.weights.iter_mut().chain(p.bias.iter_mut()) {
                *v = *v as f32 as f64;
            }
        }
    }

    /// Class probabilities `(p0, p1)`.
    pub fn forward(&self, input: &[f64]) -> [f64; 2] {
        softmax2(&net::logits(self, input, None))
    }

    pub fn predict(&self, input: &[f64]) -> u8 {
        let p = self.forward(input);
        u8::from(p[1] > p[0])
    }
}

/// How images are turned into network input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InputScale {
    /// 3×224×224, grayscale replicated per channel.
    Full,
    /// 1×112×112 after ink-preserving 2×2 downsampling.
    Desk,
}

impl InputScale {
    pub fn shape(self) -> Shape {
        match self {
            InputScale::Full => Shape::new(3, IMAGE_SIDE, IMAGE_SIDE),
            InputScale::Desk => Shape::new(1, IMAGE_SIDE / 2, IMAGE_SIDE / 2),
        }
    }

    /// Converts a 224×224 image to normalized input. Ink maps to 1, background to 0.
    pub fn to_input(self, pixels: &[u8]) -> Vec<f64> {
        let norm = |p: &u8| f64::from(BACKGROUND - p) / 255.0;
        match self {
            InputScale::Full => {
                let plane: Vec<f64> = pixels.iter().map(norm).collect();
                plane.repeat(3)
            }
            InputScale::Desk => downsample_ink(pixels, IMAGE_SIDE).iter().map(norm).collect(),
        }
    }
}
