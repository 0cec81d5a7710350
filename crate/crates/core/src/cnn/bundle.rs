//! On-disk fixed-point tensors (encrypted images and scores).
//!
//! ```text
//! header (kind = tensor)
//! u8  backend (0 = clear, 1 = gsw)
//! u8  total_bits, u8 frac_bits
//! u32 rank, then rank × u32 dims
//! u64 value count
//! per bit, least significant first: one byte (clear) or a ciphertext record (gsw)
//! ```

use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fhe::wire::{self, PayloadKind};
use crate::fhe::{BackendKind, EncBit, FheParams};
use crate::fixedpoint::{FixedPointCipher, FixedPointFormat};
use crate::gates::BitVector;

#[derive(Clone, Debug)]
pub struct Tensor {
    pub backend: BackendKind,
    pub params: Option<FheParams>,
    pub format: FixedPointFormat,
    pub dims: Vec<usize>,
    pub values: Vec<FixedPointCipher>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, values: Vec<FixedPointCipher>, params: Option<FheParams>) -> Result<Self> {
        let first = values
            .first()
            .ok_or_else(|| Error::Shape("cannot store an empty tensor".into()))?;
        let format = first.format;
        let backend = first.bits.bits()[0].backend();
        if dims.iter().product::<usize>() != values.len() {
            return Err(Error::Shape(format!(
                "dims {dims:?} do not match {} values",
                values.len()
            )));
        }
        if values
            .iter()
            .any(|v| v.format != format || v.bits.bits()[0].backend() != backend)
        {
            return Err(Error::Usage("tensor mixes formats or backends".into()));
        }
        if (backend == BackendKind::Gsw) != params.is_some() {
            return Err(Error::Usage(
                "gsw tensors need parameters, clear tensors must not have them".into(),
            ));
        }
        Ok(Tensor {
            backend,
            params,
            format,
            dims,
            values,
        })
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        wire::write_header(w, PayloadKind::Tensor, self.params.as_ref())?;
        w.write_all(&[
            match self.backend {
                BackendKind::Clear => 0,
                BackendKind::Gsw => 1,
            },
            self.format.total_bits as u8,
            self.format.frac_bits as u8,
        ])?;
        w.write_all(&(self.dims.len() as u32).to_le_bytes())?;
        for &d in &self.dims {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        w.write_all(&(self.values.len() as u64).to_le_bytes())?;
        for v in &self.values {
            for b in v.bits.bits() {
                match b {
                    EncBit::Clear(x) => w.write_all(&[*x as u8])?,
                    EncBit::Gsw(ct) => wire::write_ciphertext(w, ct, self.params.as_ref().unwrap())?,
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let (kind, params) = wire::read_header(r)?;
        if kind != PayloadKind::Tensor {
            return Err(Error::Format("file does not hold a tensor".into()));
        }
        let mut head = [0u8; 7];
        r.read_exact(&mut head)?;
        let backend = match head[0] {
            0 => BackendKind::Clear,
            1 => BackendKind::Gsw,
            b => return Err(Error::Format(format!("unknown backend byte {b}"))),
        };
        if (backend == BackendKind::Gsw) != params.is_some() {
            return Err(Error::Format("backend byte disagrees with header parameters".into()));
        }
        let format = FixedPointFormat::new(head[1] as u32, head[2] as u32)
            .map_err(|e| Error::Format(format!("bad fixed-point format: {e}")))?;
        let rank = u32::from_le_bytes(head[3..7].try_into().unwrap()) as usize;
        if rank > 8 {
            return Err(Error::Format(format!("tensor rank {rank} too large")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            let mut d = [0u8; 4];
            r.read_exact(&mut d)?;
            dims.push(u32::from_le_bytes(d) as usize);
        }
        let mut n = [0u8; 8];
        r.read_exact(&mut n)?;
        let count = u64::from_le_bytes(n) as usize;
        if dims.iter().product::<usize>() != count || count == 0 {
            return Err(Error::Format(format!("dims {dims:?} disagree with count {count}")));
        }
        let width = format.width();
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            let mut bits = Vec::with_capacity(width);
            match &params {
                None => {
                    let mut raw = vec![0u8; width];
                    r.read_exact(&mut raw)?;
                    for b in raw {
                        if b > 1 {
                            return Err(Error::Format(format!("clear bit byte {b}")));
                        }
                        bits.push(EncBit::Clear(b == 1));
                    }
                }
                Some(p) => {
                    for _ in 0..width {
                        bits.push(EncBit::Gsw(Arc::new(wire::read_ciphertext(r, p)?)));
                    }
                }
            }
            values.push(FixedPointCipher::from_bits(BitVector::from_bits(bits)?, format)?);
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after tensor".into()));
        }
        Tensor::new(dims, values, params)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }
}
