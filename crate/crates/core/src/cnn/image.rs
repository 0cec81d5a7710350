//! Plaintext input images: 8-bit PGM or CSV of reals.

use super::model::Shape;
use crate::error::{Error, Result};

/// Real-valued input, channel-major then row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PlainImage {
    pub shape: Shape,
    pub data: Vec<f64>,
}

/// Maps an 8-bit pixel onto `[-1, 1]`.
pub fn normalize_pixel(p: u8) -> f64 {
    p as f64 / 127.5 - 1.0
}

impl PlainImage {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::Shape(format!(
                "image of shape {shape} needs {} values, got {}",
                shape.len(),
                data.len()
            )));
        }
        Ok(PlainImage { shape, data })
    }

    pub fn expect_shape(&self, shape: Shape) -> Result<()> {
        if self.shape != shape {
            return Err(Error::Shape(format!("expected {shape} image, got {}", self.shape)));
        }
        Ok(())
    }

    /// Parses binary (P5) or ASCII (P2) PGM with `maxval <= 255`.
    pub fn from_pgm(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut header = Vec::new();
        while header.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Format("truncated PGM header".into()));
            }
            header.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| Error::Format("bad PGM header".into()))?);
        }
        let magic = header[0];
        let num = |s: &str| -> Result<usize> { s.parse().map_err(|_| Error::Format(format!("bad PGM field `{s}`"))) };
        let (width, height, maxval) = (num(header[1])?, num(header[2])?, num(header[3])?);
        if maxval == 0 || maxval > 255 {
            return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
        }
        let n = width * height;
        let pixels: Vec<u8> = match magic {
            "P5" => {
                let body = &bytes[(pos + 1).min(bytes.len())..];
                if body.len() < n {
                    return Err(Error::Format(format!("PGM body has {} bytes, need {n}", body.len())));
                }
                body[..n].to_vec()
            }
            "P2" => std::str::from_utf8(&bytes[pos..])
                .map_err(|_| Error::Format("bad ASCII PGM".into()))?
                .split_whitespace()
                .take(n)
                .map(|t| t.parse::<u8>().map_err(|_| Error::Format(format!("bad pixel `{t}`"))))
                .collect::<Result<_>>()?,
            m => return Err(Error::Format(format!("not a PGM file (magic `{m}`)"))),
        };
        if pixels.len() != n || pixels.iter().any(|&p| p as usize > maxval) {
            return Err(Error::Format("PGM pixel data incomplete or above maxval".into()));
        }
        let scale = 255.0 / maxval as f64;
        let data = pixels
            .iter()
            .map(|&p| normalize_pixel((p as f64 * scale).round() as u8))
            .collect();
        PlainImage::new(
            Shape {
                channels: 1,
                height,
                width,
            },
            data,
        )
    }

    /// Reals separated by commas or whitespace, interpreted with the given shape.
    pub fn from_csv(text: &str, shape: Shape) -> Result<Self> {
        let data = text
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad CSV value `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        PlainImage::new(shape, data)
    }

    /// Binary PGM of a single-channel image, mapping `[-1, 1]` back to `0..=255`.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.shape.width, self.shape.height).into_bytes();
        out.extend(
            self.data[..self.shape.height * self.shape.width]
                .iter()
                .map(|&v| ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8),
        );
        out
    }
}
