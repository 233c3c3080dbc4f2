//! Binary checkpoints, all little-endian.
//!
//! Float model: `b"SCNN1"`, u64 seed, architecture, then for each layer with
//! parameters its weights and biases as f32.
//!
//! Fixed-point model: `b"SCFX1"`, u32 weight bits, u32 activation bits (0 for
//! none), architecture, then for each layer with parameters the weight
//! exponent and integers followed by the bias exponent and integers, all i32.
//!
//! Architecture: u32 c, h, w, u32 layer count, then per layer a tag byte and
//! three u32 fields.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::quant::{QuantLayer, QuantTensor};
use super::{CnnArch, CnnModel, FixedPointModel, LayerParams, LayerSpec, Shape};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 5] = b"SCNN1";
pub const FIXED_MAGIC: &[u8; 5] = b"SCFX1";

fn put_u32(w: &mut impl Write, v: usize) -> std::io::Result<()> {
    w.write_all(&(v as u32).to_le_bytes())
}

fn write_arch(w: &mut impl Write, arch: &CnnArch) -> std::io::Result<()> {
    for v in [arch.input.c, arch.input.h, arch.input.w, arch.layers.len()] {
        put_u32(w, v)?;
    }
    for layer in &arch.layers {
        let (tag, a, b, c) = match *layer {
            LayerSpec::Conv {
                out_channels,
                kernel,
                stride,
            } => (1u8, out_channels, kernel, stride),
            LayerSpec::MaxPool2 => (2, 0, 0, 0),
            LayerSpec::Relu => (3, 0, 0, 0),
            LayerSpec::GlobalAvgPool => (4, 0, 0, 0),
            LayerSpec::Dense { out_dim } => (5, out_dim, 0, 0),
        };
        w.write_all(&[tag])?;
        for v in [a, b, c] {
            put_u32(w, v)?;
        }
    }
    Ok(())
}

struct Cursor<'a, R> {
    r: R,
    path: &'a Path,
}

impl<R: Read> Cursor<'_, R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.r
            .read_exact(&mut b)
            .map_err(|_| Error::format(self.path, "unexpected end of file"))?;
        Ok(b)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.bytes()?) as usize)
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.bytes()?))
    }

    fn f32(&mut self) -> Result<f64> {
        Ok(f64::from(f32::from_le_bytes(self.bytes()?)))
    }

    fn magic(&mut self, expect: &[u8; 5]) -> Result<()> {
        if &self.bytes::<5>()? != expect {
            return Err(Error::format(self.path, "bad magic"));
        }
        Ok(())
    }

    fn arch(&mut self) -> Result<CnnArch> {
        let input = Shape::new(self.u32()?, self.u32()?, self.u32()?);
        let n = self.u32()?;
        if n > 4096 {
            return Err(Error::format(self.path, "implausible layer count"));
        }
        let mut layers = Vec::with_capacity(n);
        for _ in 0..n {
            let [tag] = self.bytes::<1>()?;
            let (a, b, c) = (self.u32()?, self.u32()?, self.u32()?);
            layers.push(match tag {
                1 => LayerSpec::Conv {
                    out_channels: a,
                    kernel: b,
                    stride: c,
                },
                2 => LayerSpec::MaxPool2,
                3 => LayerSpec::Relu,
                4 => LayerSpec::GlobalAvgPool,
                5 => LayerSpec::Dense { out_dim: a },
                t => return Err(Error::format(self.path, format!("unknown layer tag {t}"))),
            });
        }
        let arch = CnnArch { input, layers };
        arch.validate()?;
        Ok(arch)
    }

    fn quant(&mut self, len: usize) -> Result<QuantTensor> {
        let exponent = self.i32()?;
        let values = (0..len).map(|_| self.i32()).collect::<Result<_>>()?;
        Ok(QuantTensor { values, exponent })
    }

    fn at_end(&mut self) -> Result<()> {
        let mut b = [0u8; 1];
        match self.r.read(&mut b) {
            Ok(0) => Ok(()),
            _ => Err(Error::format(self.path, "trailing bytes")),
        }
    }
}

/// Writes `model` with f32 weights. Call [`CnnModel::round_to_f32`] first if
/// the in-memory model must equal what is loaded back.
pub fn save_model(model: &CnnModel, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(MODEL_MAGIC).map_err(io)?;
    w.write_all(&model.rng_seed.to_le_bytes()).map_err(io)?;
    write_arch(&mut w, &model.arch).map_err(io)?;
    for p in &model.params {
        for v in p.weights.iter().chain(&p.bias) {
            w.write_all(&(*v as f32).to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn load_model(path: &Path) -> Result<CnnModel> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut c = Cursor {
        r: BufReader::new(file),
        path,
    };
    c.magic(MODEL_MAGIC)?;
    let seed = u64::from_le_bytes(c.bytes()?);
    let arch = c.arch()?;
    let mut model = CnnModel::zeros(&arch)?;
    model.rng_seed = seed;
    for p in &mut model.params {
        for v in p.weights.iter_mut().chain(p.bias.iter_mut()) {
            *v = c.f32()?;
        }
    }
    c.at_end()?;
    Ok(model)
}

pub fn save_fixed(model: &FixedPointModel, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(FIXED_MAGIC).map_err(io)?;
    put_u32(&mut w, model.weight_bits as usize).map_err(io)?;
    put_u32(&mut w, model.activation_bits.unwrap_or(0) as usize).map_err(io)?;
    write_arch(&mut w, &model.arch).map_err(io)?;
    for layer in &model.layers {
        if layer.weights.values.is_empty() && layer.bias.values.is_empty() {
            continue;
        }
        for t in [&layer.weights, &layer.bias] {
            w.write_all(&t.exponent.to_le_bytes()).map_err(io)?;
            for q in &t.values {
                w.write_all(&q.to_le_bytes()).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

pub fn load_fixed(path: &Path) -> Result<FixedPointModel> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut c = Cursor {
        r: BufReader::new(file),
        path,
    };
    c.magic(FIXED_MAGIC)?;
    let weight_bits = c.u32()? as u32;
    let act = c.u32()? as u32;
    let arch = c.arch()?;
    let template = CnnModel::zeros(&arch)?;
    let layers = template
        .params
        .iter()
        .map(|p: &LayerParams| {
            if p.is_empty() {
                Ok(QuantLayer {
                    weights: QuantTensor {
                        values: Vec::new(),
                        exponent: 0,
                    },
                    bias: QuantTensor {
                        values: Vec::new(),
                        exponent: 0,
                    },
                })
            } else {
                Ok(QuantLayer {
                    weights: c.quant(p.weights.len())?,
                    bias: c.quant(p.bias.len())?,
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    c.at_end()?;
    let limit = 1i64 << (weight_bits.clamp(1, 31) - 1);
    if layers
        .iter()
        .flat_map(|l| l.weights.values.iter().chain(&l.bias.values))
        .any(|&q| i64::from(q).abs() >= limit)
    {
        return Err(Error::format(path, "integer exceeds declared bit width"));
    }
    Ok(FixedPointModel {
        arch,
        layers,
        weight_bits,
        activation_bits: (act != 0).then_some(act),
    })
}
