//! JSON model import.
//!
//! ```json
//! {
//!   "format": [32, 16],
//!   "input": [1, 28, 28],
//!   "layers": [
//!     {"type": "conv", "in": 1, "out": 4, "kernel": 5, "pool": 2, "activation": "relu",
//!      "weights": [[[[...]]]], "biases": [...]},
//!     {"type": "fc", "in": 240, "out": 10, "activation": "linear",
//!      "weights": [[...]], "biases": [...]}
//!   ]
//! }
//! ```
//!
//! Weight arrays may be nested to any depth; they are flattened row-major.
//! `format` defaults to 32 total and 16 fractional bits.

use fhecnn::cnn::{Activation, LayerSpec, NetworkSpec, Shape};
use fhecnn::fixedpoint::FixedPointFormat;
use fhecnn::{Error, Result};
use serde_json::Value;

fn bad(msg: impl Into<String>) -> Error {
    Error::Format(format!("model JSON: {}", msg.into()))
}

fn flatten(v: &Value, out: &mut Vec<f64>) -> Result<()> {
    match v {
        Value::Array(xs) => xs.iter().try_for_each(|x| flatten(x, out)),
        Value::Number(n) => {
            out.push(n.as_f64().ok_or_else(|| bad("non-finite number"))?);
            Ok(())
        }
        _ => Err(bad("weights must be numbers or arrays")),
    }
}

fn reals(obj: &Value, key: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    flatten(obj.get(key).ok_or_else(|| bad(format!("missing `{key}`")))?, &mut out)?;
    Ok(out)
}

fn uint(obj: &Value, key: &str) -> Result<usize> {
    obj.get(key)
        .and_then(Value::as_u64)
        .map(|x| x as usize)
        .ok_or_else(|| bad(format!("missing or non-integer `{key}`")))
}

fn uints(obj: &Value, key: &str, n: usize) -> Result<Vec<usize>> {
    let xs = obj
        .get(key)
        .and_then(Value::as_array)
        .filter(|a| a.len() == n)
        .ok_or_else(|| bad(format!("`{key}` must be an array of {n} integers")))?;
    xs.iter()
        .map(|x| {
            x.as_u64()
                .map(|v| v as usize)
                .ok_or_else(|| bad(format!("`{key}` must hold integers")))
        })
        .collect()
}

pub fn from_json(text: &str) -> Result<NetworkSpec> {
    let root: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let format = match root.get("format") {
        None => FixedPointFormat::PRESET,
        Some(_) => {
            let f = uints(&root, "format", 2)?;
            FixedPointFormat::new(f[0] as u32, f[1] as u32)?
        }
    };
    let i = uints(&root, "input", 3)?;
    let input = Shape {
        channels: i[0],
        height: i[1],
        width: i[2],
    };
    let layers = root
        .get("layers")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing `layers` array"))?
        .iter()
        .map(|l| {
            let activation = match l.get("activation").and_then(Value::as_str).unwrap_or("linear") {
                "relu" => Activation::Relu,
                "linear" => Activation::Linear,
                a => return Err(bad(format!("unknown activation `{a}`"))),
            };
            let (w, b) = (reals(l, "weights")?, reals(l, "biases")?);
            match l.get("type").and_then(Value::as_str) {
                Some("conv") => LayerSpec::conv(
                    uint(l, "in")?,
                    uint(l, "out")?,
                    uint(l, "kernel")?,
                    uint(l, "pool")?,
                    w,
                    b,
                    activation,
                ),
                Some("fc") => LayerSpec::fully_connected(uint(l, "in")?, uint(l, "out")?, w, b, activation),
                t => Err(bad(format!("unknown layer type {t:?}"))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    NetworkSpec::new(input, format, layers)
}
