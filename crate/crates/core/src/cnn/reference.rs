//! Plaintext forward pass in `f64`.

use super::image::PlainImage;
use super::model::{Activation, LayerKind, LayerSpec, NetworkSpec, Shape};
use crate::error::{Error, Result};

fn activate(x: f64, act: Activation) -> f64 {
    match act {
        Activation::Relu => x.max(0.0),
        Activation::Linear => x,
    }
}

/// One layer on a channel-major feature stack.
pub fn layer_forward(layer: &LayerSpec, input: &[f64], shape: Shape) -> Result<(Vec<f64>, Shape)> {
    if input.len() != shape.len() {
        return Err(Error::Shape(format!("{} values for a {shape} stack", input.len())));
    }
    let out_shape = layer.output_shape(shape)?;
    let out = match layer.kind {
        LayerKind::Convolution {
            kernel_size: k,
            pool_size: p,
        } => {
            let mut out = Vec::with_capacity(out_shape.len());
            for o in 0..out_shape.channels {
                let w = layer.weights_for(o);
                for py in 0..out_shape.height {
                    for px in 0..out_shape.width {
                        let mut best = f64::NEG_INFINITY;
                        for dy in 0..p {
                            for dx in 0..p {
                                let (y, x) = (py * p + dy, px * p + dx);
                                let mut acc = layer.biases[o];
                                let mut i = 0;
                                for c in 0..shape.channels {
                                    for ky in 0..k {
                                        for kx in 0..k {
                                            let v =
                                                input[c * shape.height * shape.width + (y + ky) * shape.width + x + kx];
                                            acc += w[i] * v;
                                            i += 1;
                                        }
                                    }
                                }
                                best = best.max(activate(acc, layer.activation));
                            }
                        }
                        out.push(best);
                    }
                }
            }
            out
        }
        LayerKind::FullyConnected => (0..layer.out_channels)
            .map(|o| {
                let acc = layer.biases[o] + layer.weights_for(o).iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
                activate(acc, layer.activation)
            })
            .collect(),
    };
    Ok((out, out_shape))
}

/// Scores of the plaintext network.
pub fn forward(net: &NetworkSpec, img: &PlainImage) -> Result<Vec<f64>> {
    img.expect_shape(net.input)?;
    let mut values = img.data.clone();
    let mut shape = net.input;
    for layer in &net.layers {
        (values, shape) = layer_forward(layer, &values, shape)?;
    }
    Ok(values)
}
