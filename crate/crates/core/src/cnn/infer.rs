//! Encrypted forward pass.

use rayon::prelude::*;

use super::image::PlainImage;
use super::model::{Activation, LayerKind, LayerSpec, NetworkSpec, Shape};
use crate::error::{Error, Result};
use crate::fhe::{Client, Evaluator};
use crate::fixedpoint::{self, FixedPointCipher, FixedPointFormat};

/// Encrypted input: one grid per channel, each row-major.
#[derive(Clone, Debug)]
pub struct EncImage {
    pub channels: Vec<Vec<FixedPointCipher>>,
    pub height: usize,
    pub width: usize,
}

impl EncImage {
    pub fn shape(&self) -> Shape {
        Shape {
            channels: self.channels.len(),
            height: self.height,
            width: self.width,
        }
    }

    pub fn from_flat(values: Vec<FixedPointCipher>, shape: Shape) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::Shape(format!(
                "{} values cannot form a {shape} image",
                values.len()
            )));
        }
        let plane = shape.height * shape.width;
        let mut it = values.into_iter();
        let channels = (0..shape.channels).map(|_| it.by_ref().take(plane).collect()).collect();
        Ok(EncImage {
            channels,
            height: shape.height,
            width: shape.width,
        })
    }

    /// Channel-major, then row, then column.
    pub fn flatten(&self) -> Vec<FixedPointCipher> {
        self.channels.iter().flatten().cloned().collect()
    }
}

/// Encrypted per-class scores; argmax is left to the key holder.
#[derive(Clone, Debug)]
pub struct EncScores {
    pub scores: Vec<FixedPointCipher>,
}

/// Encrypts every pixel; the value at flat index `i` uses nonce `i`.
pub fn encrypt_image(img: &PlainImage, format: FixedPointFormat, client: &Client) -> Result<EncImage> {
    let values = img
        .data
        .par_iter()
        .enumerate()
        .map(|(i, &v)| fixedpoint::encode(v, format, client, i as u64))
        .collect::<Result<Vec<_>>>()?;
    EncImage::from_flat(values, img.shape)
}

pub fn decrypt_values(values: &[FixedPointCipher], client: &Client) -> Result<Vec<f64>> {
    values.iter().map(|v| fixedpoint::decode(v, client)).collect()
}

pub fn decrypt_scores(scores: &EncScores, client: &Client) -> Result<Vec<f64>> {
    decrypt_values(&scores.scores, client)
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// A weight or bias as the server holds it.
#[derive(Clone, Debug)]
pub enum Weight {
    /// Public raw fixed-point integer; multiplied as a constant.
    Public(i64),
    /// Encrypted by the model owner.
    Secret(FixedPointCipher),
}

#[derive(Clone, Debug)]
pub struct PreparedLayer {
    pub weights: Vec<Weight>,
    pub biases: Vec<Weight>,
}

/// A network with its parameters in the form the evaluator consumes.
#[derive(Clone, Debug)]
pub struct PreparedNetwork<'a> {
    pub spec: &'a NetworkSpec,
    pub layers: Vec<PreparedLayer>,
}

impl<'a> PreparedNetwork<'a> {
    /// Weights stay public and are folded into constant multipliers.
    pub fn public(spec: &'a NetworkSpec) -> Result<Self> {
        let q = |x: &f64| spec.format.quantize(*x).map(Weight::Public);
        let layers = spec
            .layers
            .iter()
            .map(|l| {
                Ok(PreparedLayer {
                    weights: l.weights.iter().map(q).collect::<Result<_>>()?,
                    biases: l.biases.iter().map(q).collect::<Result<_>>()?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(PreparedNetwork { spec, layers })
    }

    /// Every weight and bias encrypted under `client`. Nonces start at
    /// `nonce_base` and count up through the layers.
    pub fn encrypted(spec: &'a NetworkSpec, client: &Client, nonce_base: u64) -> Result<Self> {
        let mut nonce = nonce_base;
        let mut enc = |x: &f64| {
            nonce += 1;
            fixedpoint::encode(*x, spec.format, client, nonce).map(Weight::Secret)
        };
        let mut layers = Vec::with_capacity(spec.layers.len());
        for l in &spec.layers {
            let weights = l.weights.iter().map(&mut enc).collect::<Result<_>>()?;
            let biases = l.biases.iter().map(&mut enc).collect::<Result<_>>()?;
            layers.push(PreparedLayer { weights, biases });
        }
        Ok(PreparedNetwork { spec, layers })
    }
}

/// `bias + Σ inputs[i]·weights[i]`, accumulated left to right starting from the bias.
pub fn dot_product_prepared(
    ev: &Evaluator,
    format: FixedPointFormat,
    inputs: &[&FixedPointCipher],
    weights: &[Weight],
    bias: &Weight,
) -> Result<FixedPointCipher> {
    if inputs.len() != weights.len() {
        return Err(Error::Shape(format!(
            "dot product of {} inputs with {} weights",
            inputs.len(),
            weights.len()
        )));
    }
    let mut acc = match bias {
        Weight::Public(z) => FixedPointCipher {
            bits: crate::gates::BitVector::constant(ev, *z, format.width()),
            format,
        },
        Weight::Secret(c) => c.clone(),
    };
    for (x, w) in inputs.iter().zip(weights) {
        let term = match w {
            Weight::Public(z) => fixedpoint::fp_mul_const_raw(ev, x, *z)?,
            Weight::Secret(c) => fixedpoint::fp_mul(ev, x, c)?,
        };
        acc = fixedpoint::fp_add(ev, &acc, &term)?;
    }
    Ok(acc)
}

/// Dot product with public real weights and bias.
pub fn dot_product(
    ev: &Evaluator,
    inputs: &[FixedPointCipher],
    weights: &[f64],
    bias: f64,
) -> Result<FixedPointCipher> {
    let format = inputs
        .first()
        .map(|x| x.format)
        .ok_or_else(|| Error::Shape("dot product of an empty vector".into()))?;
    let q = |x: f64| format.quantize(x).map(Weight::Public);
    let weights = weights.iter().map(|&w| q(w)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&FixedPointCipher> = inputs.iter().collect();
    dot_product_prepared(ev, format, &refs, &weights, &q(bias)?)
}

fn activate(ev: &Evaluator, x: FixedPointCipher, act: Activation) -> Result<FixedPointCipher> {
    match act {
        Activation::Relu => fixedpoint::fp_relu(ev, &x),
        Activation::Linear => Ok(x),
    }
}

/// Convolution over all input channels, bias, activation, then max pooling.
pub fn conv_layer(ev: &Evaluator, img: &EncImage, spec: &LayerSpec, prepared: &PreparedLayer) -> Result<EncImage> {
    let LayerKind::Convolution {
        kernel_size: k,
        pool_size: pool,
    } = spec.kind
    else {
        return Err(Error::Usage("conv_layer needs a convolution layer".into()));
    };
    let out_shape = spec.output_shape(img.shape())?;
    let format = img
        .channels
        .first()
        .and_then(|c| c.first())
        .map(|x| x.format)
        .ok_or_else(|| Error::Shape("empty image".into()))?;
    let fan_in = spec.fan_in();
    let tasks: Vec<(usize, usize, usize)> = (0..out_shape.channels)
        .flat_map(|o| (0..out_shape.height).flat_map(move |py| (0..out_shape.width).map(move |px| (o, py, px))))
        .collect();
    let values = tasks
        .par_iter()
        .map(|&(o, py, px)| {
            let weights = &prepared.weights[o * fan_in..(o + 1) * fan_in];
            let mut window = Vec::with_capacity(pool * pool);
            for dy in 0..pool {
                for dx in 0..pool {
                    let (y, x) = (py * pool + dy, px * pool + dx);
                    let mut inputs = Vec::with_capacity(fan_in);
                    for ch in &img.channels {
                        for ky in 0..k {
                            for kx in 0..k {
                                inputs.push(&ch[(y + ky) * img.width + x + kx]);
                            }
                        }
                    }
                    let z = dot_product_prepared(ev, format, &inputs, weights, &prepared.biases[o])?;
                    window.push(activate(ev, z, spec.activation)?);
                }
            }
            fixedpoint::fp_max(ev, &window)
        })
        .collect::<Result<Vec<_>>>()?;
    EncImage::from_flat(values, out_shape)
}

/// One dot product per output node, then the layer's activation.
pub fn fc_layer(
    ev: &Evaluator,
    features: &[FixedPointCipher],
    spec: &LayerSpec,
    prepared: &PreparedLayer,
) -> Result<Vec<FixedPointCipher>> {
    if spec.kind != LayerKind::FullyConnected {
        return Err(Error::Usage("fc_layer needs a fully connected layer".into()));
    }
    if features.len() != spec.in_channels {
        return Err(Error::Shape(format!(
            "fully connected layer expects {} inputs, got {}",
            spec.in_channels,
            features.len()
        )));
    }
    let format = features[0].format;
    let refs: Vec<&FixedPointCipher> = features.iter().collect();
    let n = spec.in_channels;
    (0..spec.out_channels)
        .into_par_iter()
        .map(|o| {
            let z = dot_product_prepared(
                ev,
                format,
                &refs,
                &prepared.weights[o * n..(o + 1) * n],
                &prepared.biases[o],
            )?;
            activate(ev, z, spec.activation)
        })
        .collect()
}

/// Runs every layer in order. Features are flattened channel-major before the
/// first fully connected layer.
pub fn classify(ev: &Evaluator, img: &EncImage, net: &PreparedNetwork<'_>) -> Result<EncScores> {
    let spec = net.spec;
    if img.shape() != spec.input {
        return Err(Error::Shape(format!(
            "network expects {} input, got {}",
            spec.input,
            img.shape()
        )));
    }
    if img.channels.iter().flatten().any(|x| x.format != spec.format) {
        return Err(Error::Usage("input format differs from the model format".into()));
    }
    let mut image = img.clone();
    let mut flat: Option<Vec<FixedPointCipher>> = None;
    for (layer, prepared) in spec.layers.iter().zip(&net.layers) {
        match layer.kind {
            LayerKind::Convolution { .. } => image = conv_layer(ev, &image, layer, prepared)?,
            LayerKind::FullyConnected => {
                let features = flat.take().unwrap_or_else(|| image.flatten());
                flat = Some(fc_layer(ev, &features, layer, prepared)?);
            }
        }
    }
    Ok(EncScores {
        scores: flat.unwrap_or_else(|| image.flatten()),
    })
}
