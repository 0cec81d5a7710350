//! Network description and its text file format.
//!
//! ```text
//! # comments run to end of line
//! gcnn-model 1
//! format 32 16                  # total bits, fractional bits
//! input 1 28 28                 # channels, height, width
//! layer conv in=1 out=4 kernel=5 pool=2 activation=relu
//! weights  <out*in*kernel*kernel reals, order (out, in, row, col)>
//! biases   <out reals>
//! layer fc in=240 out=10 activation=linear
//! weights  <out*in reals, order (out, in)>
//! biases   <out reals>
//! end
//! ```
//!
//! Numbers may be spread over any number of lines. Convolution layers must
//! precede fully connected ones; a fully connected layer consumes its input
//! flattened channel-major, then by row, then by column.

use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::fixedpoint::FixedPointFormat;

pub const MODEL_MAGIC: &str = "gcnn-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Linear => "linear",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    /// Valid (unpadded) stride-1 convolution followed by non-overlapping max pooling.
    Convolution {
        kernel_size: usize,
        pool_size: usize,
    },
    FullyConnected,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    /// Convolution: `out × in × k × k`; fully connected: `out × in`. Row-major.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn conv(
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        pool_size: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        let l = LayerSpec {
            kind: LayerKind::Convolution { kernel_size, pool_size },
            in_channels,
            out_channels,
            weights,
            biases,
            activation,
        };
        l.validate()?;
        Ok(l)
    }

    pub fn fully_connected(
        inputs: usize,
        outputs: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        let l = LayerSpec {
            kind: LayerKind::FullyConnected,
            in_channels: inputs,
            out_channels: outputs,
            weights,
            biases,
            activation,
        };
        l.validate()?;
        Ok(l)
    }

    /// Length of one output's dot product.
    pub fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Convolution { kernel_size, .. } => kernel_size * kernel_size * self.in_channels,
            LayerKind::FullyConnected => self.in_channels,
        }
    }

    /// Weight vector feeding output `o`.
    pub fn weights_for(&self, o: usize) -> &[f64] {
        let s = self.fan_in();
        &self.weights[o * s..(o + 1) * s]
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Shape("layer channel counts must be positive".into()));
        }
        if let LayerKind::Convolution { kernel_size, pool_size } = self.kind {
            if kernel_size == 0 || pool_size == 0 {
                return Err(Error::Shape("kernel and pool sizes must be positive".into()));
            }
        }
        let expect = self.out_channels * self.fan_in();
        if self.weights.len() != expect {
            return Err(Error::Shape(format!(
                "layer expects {expect} weights, got {}",
                self.weights.len()
            )));
        }
        if self.biases.len() != self.out_channels {
            return Err(Error::Shape(format!(
                "layer expects {} biases, got {}",
                self.out_channels,
                self.biases.len()
            )));
        }
        if self.weights.iter().chain(&self.biases).any(|x| !x.is_finite()) {
            return Err(Error::Format("non-finite weight".into()));
        }
        Ok(())
    }

    /// Output shape for a given input shape.
    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        match self.kind {
            LayerKind::Convolution { kernel_size, pool_size } => {
                if input.channels != self.in_channels {
                    return Err(Error::Shape(format!(
                        "convolution expects {} input channels, got {}",
                        self.in_channels, input.channels
                    )));
                }
                if input.height < kernel_size || input.width < kernel_size {
                    return Err(Error::Shape(format!(
                        "{}x{} input smaller than {kernel_size}x{kernel_size} kernel",
                        input.height, input.width
                    )));
                }
                let (h, w) = (input.height - kernel_size + 1, input.width - kernel_size + 1);
                if h % pool_size != 0 || w % pool_size != 0 {
                    return Err(Error::Shape(format!(
                        "{h}x{w} convolution output not divisible by pool size {pool_size}"
                    )));
                }
                Ok(Shape {
                    channels: self.out_channels,
                    height: h / pool_size,
                    width: w / pool_size,
                })
            }
            LayerKind::FullyConnected => {
                if input.len() != self.in_channels {
                    return Err(Error::Shape(format!(
                        "fully connected layer expects {} inputs, got {}",
                        self.in_channels,
                        input.len()
                    )));
                }
                Ok(Shape {
                    channels: self.out_channels,
                    height: 1,
                    width: 1,
                })
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

/// Flat position of `(channel, row, col)` in a `channels × h × w` feature stack.
pub fn flatten_index(channel: usize, row: usize, col: usize, h: usize, w: usize) -> usize {
    channel * h * w + row * w + col
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    pub input: Shape,
    pub format: FixedPointFormat,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(input: Shape, format: FixedPointFormat, layers: Vec<LayerSpec>) -> Result<Self> {
        let net = NetworkSpec { input, format, layers };
        net.validate()?;
        Ok(net)
    }

    /// Shapes after each layer, starting with the input shape.
    pub fn shapes(&self) -> Result<Vec<Shape>> {
        let mut shapes = vec![self.input];
        for l in &self.layers {
            shapes.push(l.output_shape(*shapes.last().unwrap())?);
        }
        Ok(shapes)
    }

    pub fn output_len(&self) -> Result<usize> {
        Ok(self.shapes()?.last().unwrap().len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.is_empty() {
            return Err(Error::Shape("input shape must be nonempty".into()));
        }
        let mut seen_fc = false;
        for (i, l) in self.layers.iter().enumerate() {
            l.validate().map_err(|e| Error::Shape(format!("layer {i}: {e}")))?;
            match l.kind {
                LayerKind::FullyConnected => seen_fc = true,
                LayerKind::Convolution { .. } if seen_fc => {
                    return Err(Error::Shape(format!(
                        "layer {i}: convolution after a fully connected layer"
                    )))
                }
                LayerKind::Convolution { .. } => {}
            }
            for &x in l.weights.iter().chain(&l.biases) {
                self.format
                    .quantize(x)
                    .map_err(|e| Error::Shape(format!("layer {i}: weight not encodable: {e}")))?;
            }
        }
        if !self.layers.is_empty() && !seen_fc {
            return Err(Error::Shape("final layer must be fully connected".into()));
        }
        self.shapes()?;
        Ok(())
    }

    /// The 28×28 → conv5/pool2 ×4 → conv5/pool2 ×15 → FC 240→10 architecture.
    pub fn is_preset_architecture(&self) -> bool {
        let shape = |l: &LayerSpec| (l.kind, l.in_channels, l.out_channels);
        let conv = |k, p| LayerKind::Convolution {
            kernel_size: k,
            pool_size: p,
        };
        self.input
            == Shape {
                channels: 1,
                height: 28,
                width: 28,
            }
            && self.layers.iter().map(shape).collect::<Vec<_>>()
                == [
                    (conv(5, 2), 1, 4),
                    (conv(5, 2), 4, 15),
                    (LayerKind::FullyConnected, 240, 10),
                ]
    }

    /// Parses the text model format.
    pub fn parse(text: &str) -> Result<Self> {
        Parser::new(text).parse()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MODEL_MAGIC} {MODEL_VERSION}");
        let _ = writeln!(out, "format {} {}", self.format.total_bits, self.format.frac_bits);
        let _ = writeln!(
            out,
            "input {} {} {}",
            self.input.channels, self.input.height, self.input.width
        );
        for l in &self.layers {
            match l.kind {
                LayerKind::Convolution { kernel_size, pool_size } => {
                    let _ = writeln!(
                        out,
                        "layer conv in={} out={} kernel={kernel_size} pool={pool_size} activation={}",
                        l.in_channels,
                        l.out_channels,
                        l.activation.name()
                    );
                }
                LayerKind::FullyConnected => {
                    let _ = writeln!(
                        out,
                        "layer fc in={} out={} activation={}",
                        l.in_channels,
                        l.out_channels,
                        l.activation.name()
                    );
                }
            }
            let row = l.fan_in();
            out.push_str("weights\n");
            for chunk in l.weights.chunks(row.min(25)) {
                out.push_str(&join_reals(chunk));
                out.push('\n');
            }
            out.push_str("biases\n");
            out.push_str(&join_reals(&l.biases));
            out.push('\n');
        }
        out.push_str("end\n");
        out
    }
}

fn join_reals(xs: &[f64]) -> String {
    // `{:?}` prints the shortest string that reparses to the same f64
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

struct Parser<'a> {
    tokens: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        let tokens = text
            .lines()
            .enumerate()
            .flat_map(|(n, line)| {
                let line = line.split('#').next().unwrap_or("");
                line.split_whitespace().map(move |t| (n + 1, t))
            })
            .collect();
        Parser { tokens, pos: 0 }
    }

    fn err(&self, msg: impl fmt::Display) -> Error {
        let line = self
            .tokens
            .get(self.pos.min(self.tokens.len().saturating_sub(1)))
            .map_or(0, |t| t.0);
        Error::Format(format!("model line {line}: {msg}"))
    }

    fn next(&mut self) -> Result<&'a str> {
        let t = self
            .tokens
            .get(self.pos)
            .ok_or_else(|| self.err("unexpected end of file"))?;
        self.pos += 1;
        Ok(t.1)
    }

    fn expect(&mut self, word: &str) -> Result<()> {
        let t = self.next()?;
        if t != word {
            return Err(self.err(format!("expected `{word}`, found `{t}`")));
        }
        Ok(())
    }

    fn number<T: std::str::FromStr>(&mut self) -> Result<T> {
        let t = self.next()?;
        t.parse().map_err(|_| self.err(format!("bad number `{t}`")))
    }

    fn reals(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n)
            .map(|_| {
                let x: f64 = self.number()?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(self.err("non-finite number"))
                }
            })
            .collect()
    }

    fn key_values(&mut self) -> Result<Vec<(&'a str, &'a str)>> {
        let mut kv = Vec::new();
        while let Some(&(_, t)) = self.tokens.get(self.pos) {
            let Some((k, v)) = t.split_once('=') else { break };
            kv.push((k, v));
            self.pos += 1;
        }
        Ok(kv)
    }

    fn parse(mut self) -> Result<NetworkSpec> {
        self.expect(MODEL_MAGIC)?;
        let version: u32 = self.number()?;
        if version != MODEL_VERSION {
            return Err(self.err(format!("unsupported model version {version}")));
        }
        self.expect("format")?;
        let format = FixedPointFormat::new(self.number()?, self.number()?).map_err(|e| self.err(e))?;
        self.expect("input")?;
        let input = Shape {
            channels: self.number()?,
            height: self.number()?,
            width: self.number()?,
        };
        let mut layers = Vec::new();
        loop {
            match self.next()? {
                "end" => break,
                "layer" => layers.push(self.layer()?),
                t => return Err(self.err(format!("expected `layer` or `end`, found `{t}`"))),
            }
        }
        if self.pos != self.tokens.len() {
            return Err(self.err("trailing content after `end`"));
        }
        NetworkSpec::new(input, format, layers)
    }

    fn layer(&mut self) -> Result<LayerSpec> {
        let kind = self.next()?;
        let kv = self.key_values()?;
        let get = |key: &str| -> Result<&str> {
            kv.iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| self.err(format!("layer missing `{key}=`")))
        };
        let int = |key: &str| -> Result<usize> {
            let v = get(key)?;
            v.parse().map_err(|_| self.err(format!("bad `{key}` value `{v}`")))
        };
        let activation = match get("activation")? {
            "relu" => Activation::Relu,
            "linear" => Activation::Linear,
            a => return Err(self.err(format!("unknown activation `{a}`"))),
        };
        let (in_c, out_c) = (int("in")?, int("out")?);
        let kind = match kind {
            "conv" => LayerKind::Convolution {
                kernel_size: int("kernel")?,
                pool_size: int("pool")?,
            },
            "fc" => LayerKind::FullyConnected,
            k => return Err(self.err(format!("unknown layer kind `{k}`"))),
        };
        let fan_in = match kind {
            LayerKind::Convolution { kernel_size, .. } => kernel_size * kernel_size * in_c,
            LayerKind::FullyConnected => in_c,
        };
        self.expect("weights")?;
        let weights = self.reals(out_c * fan_in)?;
        self.expect("biases")?;
        let biases = self.reals(out_c)?;
        let layer = LayerSpec {
            kind,
            in_channels: in_c,
            out_channels: out_c,
            weights,
            biases,
            activation,
        };
        layer.validate().map_err(|e| self.err(e))?;
        Ok(layer)
    }
}
