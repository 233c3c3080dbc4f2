//! Backpropagation against central finite differences.

use superchars::model::{init_model, loss_and_grad, CnnArch, CnnModel, LayerSpec, Shape};

fn toy_arch() -> CnnArch {
    CnnArch {
        input: Shape::new(1, 8, 8),
        layers: vec![
            LayerSpec::conv(3, 3),
            LayerSpec::Relu,
            LayerSpec::MaxPool2,
            LayerSpec::Conv { out_channels: 4, kernel: 3, stride: 2 },
            LayerSpec::Relu,
            LayerSpec::GlobalAvgPool,
            LayerSpec::Dense { out_dim: 2 },
        ],
    }
}

/// Loss computed only through the public forward pass.
fn loss(model: &CnnModel, input: &[f64], label: u8) -> f64 {
    -model.forward(input)[label as usize].ln()
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let eps = 1e-4;
    let mut model = init_model(&toy_arch(), 17).unwrap();
    for (s, p) in model.params.iter_mut().enumerate() {
        for (i, b) in p.bias.iter_mut().enumerate() {
            *b = 0.05 * ((s + i) % 3) as f64 + 0.02;
        }
    }
    let input: Vec<f64> = (0..64).map(|i| ((i * 37 % 11) as f64) / 10.0).collect();
    let mut checked = 0;
    for label in [0u8, 1] {
        let (l, grad) = loss_and_grad(&model, &input, label).unwrap();
        assert!((l - loss(&model, &input, label)).abs() < 1e-12);
        for layer in 0..model.params.len() {
            let n_w = model.params[layer].weights.len();
            let n_b = model.params[layer].bias.len();
            for j in 0..n_w + n_b {
                let analytic = if j < n_w {
                    grad.layers[layer].weights[j]
                } else {
                    grad.layers[layer].bias[j - n_w]
                };
                let at = |m: &mut CnnModel, delta: f64| {
                    let p = &mut m.params[layer];
                    if j < n_w {
                        p.weights[j] += delta;
                    } else {
                        p.bias[j - n_w] += delta;
                    }
                };
                let mut plus = model.clone();
                at(&mut plus, eps);
                let mut minus = model.clone();
                at(&mut minus, -eps);
                let numeric = (loss(&plus, &input, label) - loss(&minus, &input, label)) / (2.0 * eps);
                let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-6);
                assert!(
                    rel < 1e-4,
                    "layer {layer} param {j} label {label}: analytic {analytic} numeric {numeric} rel {rel}"
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 200);
}
