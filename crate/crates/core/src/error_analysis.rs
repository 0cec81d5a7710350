//! Worst-case numerical error of the fixed-point forward pass.
//!
//! For a network of convolution and fully connected layers the error of every
//! output is bounded by `Δ·∏ rᵢ·dᵢ`, where `Δ = 1/δ` is the encoding error,
//! `rᵢ = √sᵢ` with `sᵢ` the convolution size `k²` (or the input count of a
//! fully connected layer), and `dᵢ` is the largest Euclidean norm of one
//! output's weight vector over all its input channels. ReLU and max pooling
//! are 1-Lipschitz and contribute no factor.
//!
//! That product ignores the floor taken after every multiplication and the
//! quantization of the weights themselves. [`rescaling_slack`] propagates
//! those terms separately so that the sum is a sound bound.

use std::fmt;

use rayon::prelude::*;

use crate::cnn::{self, reference, LayerKind, LayerSpec, NetworkSpec, PlainImage, PreparedNetwork};
use crate::error::Result;
use crate::fhe::{derive_seed, Client};

#[derive(Clone, Debug, PartialEq)]
pub struct LayerErrorFactors {
    pub layer_index: usize,
    /// Convolution size `k²`, or the input count of a fully connected layer.
    pub s: usize,
    /// Full dot-product length, including input channels.
    pub fan_in: usize,
    pub r_i: f64,
    /// Largest Euclidean norm of one output's weights.
    pub d_i: f64,
    /// Largest sum of absolute weights of one output.
    pub d_abs_i: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorBoundReport {
    pub initial_delta: f64,
    pub factors: Vec<LayerErrorFactors>,
    pub r_product: f64,
    pub d_product: f64,
    pub total_bound: f64,
    /// Same product with `dᵢ` replaced by the sum of absolute weights.
    pub total_bound_abs: f64,
    /// Extra error from per-multiply flooring and weight quantization.
    pub rescaling_slack: f64,
    pub empirical_max_error: Option<f64>,
    pub empirical_mean: Option<f64>,
    pub empirical_std: Option<f64>,
    pub samples: usize,
    pub overflow_count: u64,
}

impl ErrorBoundReport {
    /// Fills in the empirical statistics from per-score absolute errors.
    pub fn record_errors(&mut self, errs: &[f64], overflow_count: u64) {
        self.overflow_count = overflow_count;
        self.samples = errs.len();
        if errs.is_empty() {
            return;
        }
        let n = errs.len() as f64;
        let mean = errs.iter().sum::<f64>() / n;
        let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
        self.empirical_max_error = Some(errs.iter().copied().fold(0.0, f64::max));
        self.empirical_mean = Some(mean);
        self.empirical_std = Some(var.sqrt());
    }

    pub fn bound_with_slack(&self) -> f64 {
        self.total_bound + self.rescaling_slack
    }

    /// Empirical error above `Δ·∏ rᵢ·dᵢ`.
    pub fn violates_bound(&self) -> bool {
        self.empirical_max_error.is_some_and(|e| e > self.total_bound)
    }

    /// Empirical error above the bound plus rescaling slack.
    pub fn violates_bound_with_slack(&self) -> bool {
        self.empirical_max_error.is_some_and(|e| e > self.bound_with_slack())
    }

    pub fn key_values(&self) -> Vec<(String, String)> {
        let mut kv = vec![
            ("initial_delta".to_string(), format!("{:e}", self.initial_delta)),
            ("layers".to_string(), self.factors.len().to_string()),
        ];
        for f in &self.factors {
            let i = f.layer_index;
            kv.push((format!("layer{i}.s"), f.s.to_string()));
            kv.push((format!("layer{i}.fan_in"), f.fan_in.to_string()));
            kv.push((format!("layer{i}.r"), format!("{}", f.r_i)));
            kv.push((format!("layer{i}.d"), format!("{}", f.d_i)));
            kv.push((format!("layer{i}.d_abs"), format!("{}", f.d_abs_i)));
        }
        kv.push(("r_product".into(), format!("{}", self.r_product)));
        kv.push(("d_product".into(), format!("{}", self.d_product)));
        kv.push(("total_bound".into(), format!("{:e}", self.total_bound)));
        kv.push(("total_bound_abs".into(), format!("{:e}", self.total_bound_abs)));
        kv.push(("rescaling_slack".into(), format!("{:e}", self.rescaling_slack)));
        if let (Some(max), Some(mean), Some(std)) = (self.empirical_max_error, self.empirical_mean, self.empirical_std)
        {
            kv.push(("samples".into(), self.samples.to_string()));
            kv.push(("empirical_max_error".into(), format!("{max:e}")));
            kv.push(("empirical_mean".into(), format!("{mean:e}")));
            kv.push(("empirical_std".into(), format!("{std:e}")));
            kv.push(("overflow_count".into(), self.overflow_count.to_string()));
            kv.push(("violation".into(), self.violates_bound().to_string()));
            kv.push((
                "violation_with_slack".into(),
                self.violates_bound_with_slack().to_string(),
            ));
        }
        kv
    }
}

impl fmt::Display for ErrorBoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "initial error  {:.6e}", self.initial_delta)?;
        writeln!(
            f,
            "{:>5} {:>6} {:>6} {:>12} {:>12} {:>12}",
            "layer", "s", "fan_in", "r", "d", "d_abs"
        )?;
        for l in &self.factors {
            writeln!(
                f,
                "{:>5} {:>6} {:>6} {:>12.6} {:>12.6} {:>12.6}",
                l.layer_index, l.s, l.fan_in, l.r_i, l.d_i, l.d_abs_i
            )?;
        }
        writeln!(f, "r product      {:.6}", self.r_product)?;
        writeln!(f, "bound          {:.6e}", self.total_bound)?;
        writeln!(f, "bound (abs)    {:.6e}", self.total_bound_abs)?;
        write!(f, "rescale slack  {:.6e}", self.rescaling_slack)?;
        if let (Some(max), Some(mean), Some(std)) = (self.empirical_max_error, self.empirical_mean, self.empirical_std)
        {
            writeln!(f)?;
            writeln!(f, "samples        {}", self.samples)?;
            writeln!(f, "max error      {max:.6e}")?;
            writeln!(f, "mean error     {mean:.6e}")?;
            writeln!(f, "std error      {std:.6e}")?;
            write!(
                f,
                "violation      {} (with slack: {})",
                self.violates_bound(),
                self.violates_bound_with_slack()
            )?;
        }
        Ok(())
    }
}

pub fn layer_factors(index: usize, spec: &LayerSpec) -> LayerErrorFactors {
    let fan_in = spec.fan_in();
    let s = match spec.kind {
        LayerKind::Convolution { kernel_size, .. } => kernel_size * kernel_size,
        LayerKind::FullyConnected => fan_in,
    };
    let norms = (0..spec.out_channels).map(|o| spec.weights_for(o));
    let d_i = norms
        .clone()
        .map(|w| w.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let d_abs_i = norms
        .map(|w| w.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    LayerErrorFactors {
        layer_index: index,
        s,
        fan_in,
        r_i: (s as f64).sqrt(),
        d_i,
        d_abs_i,
    }
}

/// Sound allowance for the error terms the product bound leaves out, given
/// inputs bounded by `input_magnitude` in absolute value.
///
/// With `E` the error bound and `M` the magnitude bound of a layer's input,
/// an output's error is at most `√n·d·E + Δ·(n·(1 + E + M) + 1)` for a dot
/// product of length `n`: the propagated term, then weight quantization,
/// product flooring and bias quantization. The slack is what this exceeds
/// `Δ·∏ rᵢ·dᵢ` by.
pub fn rescaling_slack(net: &NetworkSpec, input_magnitude: f64) -> f64 {
    let delta = net.format.resolution();
    let mut err = delta;
    let mut mag = input_magnitude;
    let mut product = delta;
    for (i, layer) in net.layers.iter().enumerate() {
        let f = layer_factors(i, layer);
        let n = f.fan_in as f64;
        err = n.sqrt() * f.d_i * err + delta * (n * (1.0 + err + mag) + 1.0);
        mag = (0..layer.out_channels)
            .map(|o| {
                let l1: f64 = layer.weights_for(o).iter().map(|w| w.abs()).sum();
                l1 * mag + layer.biases[o].abs()
            })
            .fold(0.0, f64::max);
        product *= f.r_i * f.d_i;
    }
    (err - product).max(0.0)
}

/// `Δ·∏ rᵢ·dᵢ` with inputs in `[-1, 1]`.
pub fn theorem_bound(net: &NetworkSpec) -> ErrorBoundReport {
    theorem_bound_for_inputs(net, 1.0)
}

/// As [`theorem_bound`], with the slack computed for inputs bounded by `input_magnitude`.
pub fn theorem_bound_for_inputs(net: &NetworkSpec, input_magnitude: f64) -> ErrorBoundReport {
    let delta = net.format.resolution();
    let factors: Vec<_> = net
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| layer_factors(i, l))
        .collect();
    let r_product: f64 = factors.iter().map(|f| f.r_i).product();
    let d_product: f64 = factors.iter().map(|f| f.d_i).product();
    let d_abs_product: f64 = factors.iter().map(|f| f.d_abs_i).product();
    ErrorBoundReport {
        initial_delta: delta,
        r_product,
        d_product,
        total_bound: delta * r_product * d_product,
        total_bound_abs: delta * r_product * d_abs_product,
        rescaling_slack: rescaling_slack(net, input_magnitude),
        factors,
        empirical_max_error: None,
        empirical_mean: None,
        empirical_std: None,
        samples: 0,
        overflow_count: 0,
    }
}

/// Absolute differences between the fixed-point scores and the `f64` reference
/// for one image, evaluated with public weights.
pub fn score_errors(net: &NetworkSpec, img: &PlainImage, client: &Client, seed: u64) -> Result<(Vec<f64>, u64)> {
    let ev = client.evaluator(seed)?;
    let prepared = PreparedNetwork::public(net)?;
    let enc = cnn::encrypt_image(img, net.format, client)?;
    let scores = cnn::classify(&ev, &enc, &prepared)?;
    let got = cnn::decrypt_scores(&scores, client)?;
    let want = reference::forward(net, img)?;
    let errs = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).collect();
    Ok((errs, ev.stats().overflow_count))
}

/// Runs every image through the fixed-point path and the reference and fills
/// in the empirical statistics.
pub fn empirical_error(net: &NetworkSpec, images: &[PlainImage], client: &Client) -> Result<ErrorBoundReport> {
    for img in images {
        img.expect_shape(net.input)?;
    }
    let magnitude = images
        .iter()
        .flat_map(|i| i.data.iter())
        .fold(1.0f64, |m, x| m.max(x.abs()));
    let mut report = theorem_bound_for_inputs(net, magnitude);
    let per_image = images
        .par_iter()
        .enumerate()
        .map(|(i, img)| score_errors(net, img, client, derive_seed(0x5eed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let errs: Vec<f64> = per_image.iter().flat_map(|(e, _)| e.iter().copied()).collect();
    report.record_errors(&errs, per_image.iter().map(|(_, o)| o).sum());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::{Activation, Shape};
    use crate::fixedpoint::FixedPointFormat;

    fn shape(c: usize, h: usize, w: usize) -> Shape {
        Shape {
            channels: c,
            height: h,
            width: w,
        }
    }

    #[test]
    fn identity_layer() {
        let fc = LayerSpec::fully_connected(1, 1, vec![1.0], vec![0.0], Activation::Linear).unwrap();
        let f = layer_factors(0, &fc);
        assert_eq!((f.s, f.fan_in, f.r_i, f.d_i, f.d_abs_i), (1, 1, 1.0, 1.0, 1.0));
        let net = NetworkSpec::new(shape(1, 1, 1), FixedPointFormat::PRESET, vec![fc]).unwrap();
        assert_eq!(theorem_bound(&net).total_bound, 2f64.powi(-16));
    }

    #[test]
    fn conv_factor_uses_all_channels() {
        let w: Vec<f64> = (0..2 * 3 * 9).map(|i| (i % 5) as f64 * 0.1 - 0.2).collect();
        let conv = LayerSpec::conv(3, 2, 3, 1, w.clone(), vec![0.0; 2], Activation::Relu).unwrap();
        let f = layer_factors(0, &conv);
        assert_eq!((f.s, f.fan_in, f.r_i), (9, 27, 3.0));
        let n0 = w[..27].iter().map(|x| x * x).sum::<f64>().sqrt();
        let n1 = w[27..].iter().map(|x| x * x).sum::<f64>().sqrt();
        assert_eq!(f.d_i, n0.max(n1));
    }

    #[test]
    fn zero_weight_network_has_no_error() {
        let fc = LayerSpec::fully_connected(4, 2, vec![0.0; 8], vec![0.0; 2], Activation::Linear).unwrap();
        let net = NetworkSpec::new(shape(1, 2, 2), FixedPointFormat::PRESET, vec![fc]).unwrap();
        let img = PlainImage::new(shape(1, 2, 2), vec![0.3, -0.7, 0.11, 0.9]).unwrap();
        let r = empirical_error(&net, &[img], &Client::Clear).unwrap();
        assert_eq!(r.empirical_max_error, Some(0.0));
        assert!(!r.violates_bound());
    }
}
