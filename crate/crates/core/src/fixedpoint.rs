//! Fixed-point reals over encrypted bits.
//!
//! A real `r` is stored as the `w`-bit two's-complement integer `⌊r·2^f⌋`.
//! Products are rescaled by an arithmetic right shift of `f` bits, i.e. they
//! are floored as well, so every rounding step errs downward by less than `2^-f`.

use crate::error::{Error, Result};
use crate::fhe::{Client, EncBit, Evaluator};
use crate::gates::{self, BitVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FixedPointFormat {
    pub total_bits: u32,
    pub frac_bits: u32,
}

impl FixedPointFormat {
    /// 32 bits with 16 fractional bits, `δ = 65536`.
    pub const PRESET: FixedPointFormat = FixedPointFormat {
        total_bits: 32,
        frac_bits: 16,
    };

    pub fn new(total_bits: u32, frac_bits: u32) -> Result<Self> {
        if !(2..=32).contains(&total_bits) || frac_bits >= total_bits {
            return Err(Error::Usage(format!(
                "invalid fixed-point format: {total_bits} total bits, {frac_bits} fractional"
            )));
        }
        Ok(FixedPointFormat { total_bits, frac_bits })
    }

    pub fn scale(&self) -> i64 {
        1i64 << self.frac_bits
    }

    /// Representation step `1/δ`.
    pub fn resolution(&self) -> f64 {
        1.0 / self.scale() as f64
    }

    pub fn width(&self) -> usize {
        self.total_bits as usize
    }

    pub fn min_raw(&self) -> i64 {
        -(1i64 << (self.total_bits - 1))
    }

    pub fn max_raw(&self) -> i64 {
        (1i64 << (self.total_bits - 1)) - 1
    }

    /// `⌊r·δ⌋`, rejecting values outside the representable range.
    pub fn quantize(&self, r: f64) -> Result<i64> {
        let z = (r * self.scale() as f64).floor();
        if !z.is_finite() || z < self.min_raw() as f64 || z > self.max_raw() as f64 {
            return Err(Error::Range {
                value: r,
                int_bits: self.total_bits - self.frac_bits,
                frac_bits: self.frac_bits,
            });
        }
        Ok(z as i64)
    }

    pub fn to_real(&self, raw: i64) -> f64 {
        raw as f64 / self.scale() as f64
    }

    /// Wraps an integer into the format's signed range.
    pub fn wrap(&self, raw: i128) -> i64 {
        let w = self.total_bits;
        let m = raw.rem_euclid(1i128 << w);
        (if m >= 1i128 << (w - 1) { m - (1i128 << w) } else { m }) as i64
    }

    fn fits(&self, raw: i128) -> bool {
        raw >= self.min_raw() as i128 && raw <= self.max_raw() as i128
    }
}

#[derive(Clone, Debug)]
pub struct FixedPointCipher {
    pub bits: BitVector,
    pub format: FixedPointFormat,
}

impl FixedPointCipher {
    pub fn from_bits(bits: BitVector, format: FixedPointFormat) -> Result<Self> {
        if bits.width() != format.width() {
            return Err(Error::WidthMismatch {
                left: bits.width(),
                right: format.width(),
            });
        }
        Ok(FixedPointCipher { bits, format })
    }

    /// Raw integer when the bits are plaintext-oracle bits.
    pub fn clear_raw(&self) -> Option<i64> {
        self.bits.clear_signed()
    }

    pub fn clear_value(&self) -> Option<f64> {
        self.clear_raw().map(|z| self.format.to_real(z))
    }
}

/// Encrypts `⌊r·δ⌋`.
pub fn encode(r: f64, fmt: FixedPointFormat, client: &Client, nonce: u64) -> Result<FixedPointCipher> {
    let z = fmt.quantize(r)?;
    encode_raw(z, fmt, client, nonce)
}

pub fn encode_raw(z: i64, fmt: FixedPointFormat, client: &Client, nonce: u64) -> Result<FixedPointCipher> {
    Ok(FixedPointCipher {
        bits: BitVector::encrypt(client, z, fmt.width(), nonce)?,
        format: fmt,
    })
}

/// Public constant `⌊r·δ⌋` built from noiseless bits.
pub fn constant(r: f64, fmt: FixedPointFormat, ev: &Evaluator) -> Result<FixedPointCipher> {
    let z = fmt.quantize(r)?;
    Ok(FixedPointCipher {
        bits: BitVector::constant(ev, z, fmt.width()),
        format: fmt,
    })
}

pub fn decode_raw(x: &FixedPointCipher, client: &Client) -> Result<i64> {
    x.bits.decrypt_signed(client)
}

pub fn decode(x: &FixedPointCipher, client: &Client) -> Result<f64> {
    Ok(x.format.to_real(decode_raw(x, client)?))
}

fn same_format(a: &FixedPointCipher, b: &FixedPointCipher) -> Result<FixedPointFormat> {
    if a.format != b.format {
        return Err(Error::Usage(format!(
            "fixed-point format mismatch: {:?} vs {:?}",
            a.format, b.format
        )));
    }
    Ok(a.format)
}

/// Plaintext-oracle overflow diagnostic; encrypted values cannot be inspected.
fn check_range(ev: &Evaluator, fmt: FixedPointFormat, exact: Option<i128>, op: &str) {
    if let Some(v) = exact {
        if !fmt.fits(v) {
            ev.record_overflow();
            log::warn!("fixed-point overflow in {op}: {v} does not fit {} bits", fmt.total_bits);
        }
    }
}

pub fn fp_add(ev: &Evaluator, a: &FixedPointCipher, b: &FixedPointCipher) -> Result<FixedPointCipher> {
    let fmt = same_format(a, b)?;
    check_range(
        ev,
        fmt,
        a.clear_raw().zip(b.clear_raw()).map(|(x, y)| x as i128 + y as i128),
        "add",
    );
    Ok(FixedPointCipher {
        bits: gates::add(ev, &a.bits, &b.bits)?,
        format: fmt,
    })
}

pub fn fp_sub(ev: &Evaluator, a: &FixedPointCipher, b: &FixedPointCipher) -> Result<FixedPointCipher> {
    let fmt = same_format(a, b)?;
    check_range(
        ev,
        fmt,
        a.clear_raw().zip(b.clear_raw()).map(|(x, y)| x as i128 - y as i128),
        "sub",
    );
    Ok(FixedPointCipher {
        bits: gates::sub(ev, &a.bits, &b.bits)?,
        format: fmt,
    })
}

/// Keeps bits `[f, f + w)` of a `2w`-bit product: `⌊P / δ⌋ mod 2^w`.
fn rescale(product: &BitVector, fmt: FixedPointFormat) -> BitVector {
    product.slice(fmt.frac_bits as usize, fmt.width())
}

fn floor_product(fmt: FixedPointFormat, za: i64, zb: i64) -> i128 {
    (za as i128 * zb as i128).div_euclid(fmt.scale() as i128)
}

/// Ciphertext-ciphertext product `⌊z_a·z_b / δ⌋` via the Wallace multiplier.
pub fn fp_mul(ev: &Evaluator, a: &FixedPointCipher, b: &FixedPointCipher) -> Result<FixedPointCipher> {
    let fmt = same_format(a, b)?;
    check_range(
        ev,
        fmt,
        a.clear_raw().zip(b.clear_raw()).map(|(x, y)| floor_product(fmt, x, y)),
        "mul",
    );
    let product = gates::mul_wallace(ev, &a.bits, &b.bits)?;
    Ok(FixedPointCipher {
        bits: rescale(&product, fmt),
        format: fmt,
    })
}

/// Product with a public constant; bit-identical to `fp_mul` with the constant
/// encoded as noiseless bits.
///
/// Partial-product rows exist only for the set bits of `|⌊c·δ⌋|`, since the
/// rest are public zeros. A negative constant uses `-a·m = (!a)·m + m`.
pub fn fp_mul_const(ev: &Evaluator, a: &FixedPointCipher, c: f64) -> Result<FixedPointCipher> {
    let fmt = a.format;
    let zc = fmt.quantize(c)?;
    fp_mul_const_raw(ev, a, zc)
}

pub fn fp_mul_const_raw(ev: &Evaluator, a: &FixedPointCipher, zc: i64) -> Result<FixedPointCipher> {
    let fmt = a.format;
    let w = fmt.width();
    if zc < fmt.min_raw() || zc > fmt.max_raw() {
        return Err(Error::Range {
            value: fmt.to_real(zc),
            int_bits: fmt.total_bits - fmt.frac_bits,
            frac_bits: fmt.frac_bits,
        });
    }
    check_range(ev, fmt, a.clear_raw().map(|x| floor_product(fmt, x, zc)), "mul_const");
    if zc == 0 {
        return Ok(FixedPointCipher {
            bits: BitVector::constant(ev, 0, w),
            format: fmt,
        });
    }
    let m = zc.unsigned_abs();
    let row: Vec<EncBit> = if zc < 0 {
        a.bits
            .bits()
            .iter()
            .map(|b| gates::not_gate(ev, b))
            .collect::<Result<_>>()?
    } else {
        a.bits.bits().to_vec()
    };
    let width = 2 * w;
    let mut columns: Vec<Vec<EncBit>> = vec![Vec::new(); width];
    for j in (0..w).filter(|&j| (m >> j) & 1 == 1) {
        for (k, col) in columns.iter_mut().enumerate().skip(j) {
            col.push(row[(k - j).min(w - 1)].clone());
        }
    }
    if zc < 0 {
        for (j, col) in columns.iter_mut().enumerate().take(w) {
            if (m >> j) & 1 == 1 {
                col.push(ev.trivial_const(true));
            }
        }
    }
    let (product, _) = gates::sum_columns(ev, columns)?;
    Ok(FixedPointCipher {
        bits: rescale(&product, fmt),
        format: fmt,
    })
}

/// Set iff `x >= 0`: the negated sign bit.
pub fn fp_geq_zero(ev: &Evaluator, x: &FixedPointCipher) -> Result<EncBit> {
    gates::not_gate(ev, x.bits.sign_bit())
}

/// `b·x` with `b = [x >= 0]`; the output is bitwise `x` or bitwise zero.
pub fn fp_relu(ev: &Evaluator, x: &FixedPointCipher) -> Result<FixedPointCipher> {
    let keep = fp_geq_zero(ev, x)?;
    let zero = BitVector::constant(ev, 0, x.format.width());
    Ok(FixedPointCipher {
        bits: gates::mux(ev, &keep, &x.bits, &zero)?,
        format: x.format,
    })
}

/// Oblivious maximum folded left to right; ties keep the earlier value.
/// Pairwise differences must stay within the comparison range.
pub fn fp_max(ev: &Evaluator, values: &[FixedPointCipher]) -> Result<FixedPointCipher> {
    let (first, rest) = values
        .split_first()
        .ok_or_else(|| Error::Usage("max of an empty list".into()))?;
    let mut current = first.clone();
    for next in rest {
        let fmt = same_format(&current, next)?;
        let take_next = gates::less_than(ev, &current.bits, &next.bits)?;
        current = FixedPointCipher {
            bits: gates::mux(ev, &take_next, &next.bits, &current.bits)?,
            format: fmt,
        };
    }
    Ok(current)
}
