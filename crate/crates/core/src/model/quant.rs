//! Symmetric per-layer fixed-point weights with power-of-two scales.

use super::net::{forward_trace, softmax2};
use super::{CnnArch, CnnModel, LayerParams};
use crate::error::{Error, Result};

/// Signed integers sharing one scale `2^exponent`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantTensor {
    pub values: Vec<i32>,
    pub exponent: i32,
}

impl QuantTensor {
    pub fn scale(&self) -> f64 {
        2f64.powi(self.exponent)
    }

    pub fn dequantize(&self) -> Vec<f64> {
        let s = self.scale();
        self.values.iter().map(|&q| f64::from(q) * s).collect()
    }
}

/// Quantizes to `bits`-wide signed integers. The scale is the smallest power
/// of two for which `max |w| / scale` fits in `2^(bits-1) - 1`; an all-zero
/// tensor gets scale 1.
pub fn quantize_tensor(values: &[f64], bits: u32) -> QuantTensor {
    let qmax = ((1i64 << (bits - 1)) - 1) as f64;
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return QuantTensor {
            values: vec![0; values.len()],
            exponent: 0,
        };
    }
    let mut exp = (max / qmax).log2().ceil() as i32;
    while max / 2f64.powi(exp) > qmax {
        exp += 1;
    }
    while max / 2f64.powi(exp - 1) <= qmax {
        exp -= 1;
    }
    let scale = 2f64.powi(exp);
    QuantTensor {
        values: values
            .iter()
            .map(|v| (v / scale).round().clamp(-qmax, qmax) as i32)
            .collect(),
        exponent: exp,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantLayer {
    pub weights: QuantTensor,
    pub bias: QuantTensor,
}

/// Integer weights with per-layer power-of-two scales. Inference dequantizes
/// the weights exactly and accumulates in floating point.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointModel {
    pub arch: CnnArch,
    pub layers: Vec<QuantLayer>,
    pub weight_bits: u32,
    /// When set, post-ReLU activations are rounded to this many unsigned bits.
    pub activation_bits: Option<u32>,
}

pub fn quantize(model: &CnnModel, weight_bits: u32) -> Result<FixedPointModel> {
    if !(4..=16).contains(&weight_bits) {
        return Err(Error::InvalidArgument(format!(
            "weight bits must be in 4..=16, got {weight_bits}"
        )));
    }
    model.check_finite()?;
    Ok(FixedPointModel {
        arch: model.arch.clone(),
        layers: model
            .params
            .iter()
            .map(|p| QuantLayer {
                weights: quantize_tensor(&p.weights, weight_bits),
                bias: quantize_tensor(&p.bias, weight_bits),
            })
            .collect(),
        weight_bits,
        activation_bits: None,
    })
}

impl FixedPointModel {
    pub fn with_activation_bits(mut self, bits: Option<u32>) -> Self {
        self.activation_bits = bits;
        self
    }

    /// Float model carrying the dequantized weights.
    pub fn dequantize(&self) -> CnnModel {
        CnnModel {
            arch: self.arch.clone(),
            params: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    weights: l.weights.dequantize(),
                    bias: l.bias.dequantize(),
                })
                .collect(),
            rng_seed: 0,
        }
    }

    /// Class probabilities under fixed-point weights.
    pub fn forward(&self, input: &[f64]) -> [f64; 2] {
        self.forward_with(&self.dequantize(), input)
    }

    /// Same as [`forward`](Self::forward) with a pre-built dequantized model,
    /// for batch inference.
    pub fn forward_with(&self, dequantized: &CnnModel, input: &[f64]) -> [f64; 2] {
        softmax2(&forward_trace(dequantized, input, self.activation_bits).logits())
    }

    pub fn predict(&self, input: &[f64]) -> u8 {
        let p = self.forward(input);
        u8::from(p[1] > p[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_model, CnnArch, Shape};
    use proptest::prelude::*;

    #[test]
    fn zero_tensor_gets_unit_scale() {
        let q = quantize_tensor(&[0.0; 5], 8);
        assert_eq!(q.exponent, 0);
        assert!(q.values.iter().all(|&v| v == 0));
    }

    #[test]
    fn scale_is_smallest_covering_power_of_two() {
        // max 1.0, 8 bits: 1/127 -> 2^-6 = 0.015625 (1/0.015625 = 64 <= 127; 2^-7 gives 128 > 127)
        let q = quantize_tensor(&[1.0, -0.5, 0.25], 8);
        assert_eq!(q.exponent, -6);
        assert_eq!(q.values, vec![64, -32, 16]);
        let exact = quantize_tensor(&[127.0], 8);
        assert_eq!((exact.exponent, exact.values[0]), (0, 127));
        let over = quantize_tensor(&[128.0], 8);
        assert_eq!((over.exponent, over.values[0]), (1, 64));
    }

    #[test]
    fn bit_range_is_enforced() {
        let m = init_model(&CnnArch::compact(Shape::new(1, 16, 16)), 0).unwrap();
        assert!(quantize(&m, 3).is_err());
        assert!(quantize(&m, 17).is_err());
        assert!(quantize(&m, 4).is_ok());
    }

    proptest! {
        #[test]
        fn dequantization_error_within_half_step(
            values in proptest::collection::vec(-1e3f64..1e3, 1..64),
            bits in 4u32..=16,
        ) {
            let q = quantize_tensor(&values, bits);
            let limit = 1i32 << (bits - 1);
            prop_assert!(q.values.iter().all(|v| v.abs() < limit));
            let s = q.scale();
            for (w, d) in values.iter().zip(q.dequantize()) {
                prop_assert!((w - d).abs() <= s / 2.0);
            }
        }
    }
}
