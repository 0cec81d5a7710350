//! Binary key/ciphertext encoding. All integers are little-endian.
//!
//! ```text
//! header:
//!   0   4  magic "GCN1"
//!   4   1  payload kind (1 = secret key, 2 = fixed-point tensor)
//!   5   1  preset id (0 = none/custom, 1 = toy, 2 = demo)
//!   6   4  ct_dim        u32
//!   10  1  log_q         u8
//!   11  4  lattice_dim   u32
//!   15  8  noise_stddev  f64
//! secret key payload:
//!   u32 length (= lattice_dim + 1), then `length` entries
//! ciphertext record:
//!   f64 noise_estimate, u8 public flag (0 = none, 1 = constant 0, 2 = constant 1),
//!   then ct_dim² matrix entries, row-major
//! ```
//!
//! Every `Z_q` entry is an unsigned integer of `ceil(log_q / 8)` bytes.
//! A header for a clear-backend payload carries zeros in all parameter fields.

use std::io::{Read, Write};

use super::params::{FheParams, Preset};
use super::scheme::{Ciphertext, SecretKey};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GCN1";
pub const HEADER_LEN: usize = 23;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum PayloadKind {
    SecretKey = 1,
    Tensor = 2,
}

fn entry_bytes(log_q: u32) -> usize {
    log_q.div_ceil(8) as usize
}

pub fn write_header<W: Write>(w: &mut W, kind: PayloadKind, params: Option<&FheParams>) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[kind as u8])?;
    match params {
        Some(p) => {
            w.write_all(&[p.preset().map_or(0, Preset::id)])?;
            w.write_all(&(p.ct_dim as u32).to_le_bytes())?;
            w.write_all(&[p.log_q as u8])?;
            w.write_all(&(p.lattice_dim as u32).to_le_bytes())?;
            w.write_all(&p.noise_stddev.to_le_bytes())?;
        }
        None => w.write_all(&[0u8; HEADER_LEN - 5])?,
    }
    Ok(())
}

pub fn read_header<R: Read>(r: &mut R) -> Result<(PayloadKind, Option<FheParams>)> {
    let mut buf = [0u8; HEADER_LEN];
    r.read_exact(&mut buf)?;
    if &buf[..4] != MAGIC {
        return Err(Error::Format("bad magic, not a GCN1 file".into()));
    }
    let kind = match buf[4] {
        1 => PayloadKind::SecretKey,
        2 => PayloadKind::Tensor,
        k => return Err(Error::Format(format!("unknown payload kind {k}"))),
    };
    let preset = buf[5];
    let ct_dim = u32::from_le_bytes(buf[6..10].try_into().unwrap()) as usize;
    let log_q = buf[10] as u32;
    let lattice_dim = u32::from_le_bytes(buf[11..15].try_into().unwrap()) as usize;
    let stddev = f64::from_le_bytes(buf[15..23].try_into().unwrap());
    if ct_dim == 0 && log_q == 0 && lattice_dim == 0 {
        return Ok((kind, None));
    }
    let params = FheParams::new(lattice_dim, log_q, stddev)?;
    if params.ct_dim != ct_dim {
        return Err(Error::Format(format!(
            "header ct_dim {ct_dim} inconsistent with lattice_dim/log_q"
        )));
    }
    if preset != 0 && Preset::from_id(preset).map(Preset::params) != Some(params.clone()) {
        return Err(Error::Format(format!(
            "header preset id {preset} does not match parameters"
        )));
    }
    Ok((kind, Some(params)))
}

fn write_entry<W: Write>(w: &mut W, x: u32, width: usize) -> Result<()> {
    w.write_all(&x.to_le_bytes()[..width])?;
    Ok(())
}

fn read_entries<R: Read>(r: &mut R, count: usize, log_q: u32) -> Result<Vec<u32>> {
    let width = entry_bytes(log_q);
    let mut raw = vec![0u8; count * width];
    r.read_exact(&mut raw)?;
    let q = 1u64 << log_q;
    raw.chunks_exact(width)
        .map(|c| {
            let mut b = [0u8; 4];
            b[..width].copy_from_slice(c);
            let x = u32::from_le_bytes(b);
            if x as u64 >= q {
                Err(Error::Format(format!("entry {x} outside Z_q")))
            } else {
                Ok(x)
            }
        })
        .collect()
}

pub fn write_secret_key<W: Write>(w: &mut W, sk: &SecretKey, params: &FheParams) -> Result<()> {
    write_header(w, PayloadKind::SecretKey, Some(params))?;
    let s = sk.secret_vector();
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    let width = entry_bytes(params.log_q);
    for &x in s {
        write_entry(w, x, width)?;
    }
    Ok(())
}

pub fn read_secret_key<R: Read>(r: &mut R) -> Result<(FheParams, SecretKey)> {
    let (kind, params) = read_header(r)?;
    if kind != PayloadKind::SecretKey {
        return Err(Error::Format("file does not hold a secret key".into()));
    }
    let params = params.ok_or_else(|| Error::Format("secret key header without parameters".into()))?;
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_le_bytes(len) as usize;
    if len != params.lattice_dim + 1 {
        return Err(Error::Format(format!("secret length {len} != lattice_dim + 1")));
    }
    let s = read_entries(r, len, params.log_q)?;
    let sk = SecretKey::from_vector(s, &params)?;
    Ok((params, sk))
}

pub fn write_ciphertext<W: Write>(w: &mut W, ct: &Ciphertext, params: &FheParams) -> Result<()> {
    if ct.dim() != params.ct_dim {
        return Err(Error::Usage("ciphertext does not match parameters".into()));
    }
    w.write_all(&ct.noise_estimate.to_le_bytes())?;
    w.write_all(&[match ct.public_value() {
        None => 0,
        Some(false) => 1,
        Some(true) => 2,
    }])?;
    let width = entry_bytes(params.log_q);
    let mut buf = Vec::with_capacity(ct.matrix().len() * width);
    for &x in ct.matrix() {
        buf.extend_from_slice(&x.to_le_bytes()[..width]);
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_ciphertext<R: Read>(r: &mut R, params: &FheParams) -> Result<Ciphertext> {
    let mut head = [0u8; 9];
    r.read_exact(&mut head)?;
    let noise = f64::from_le_bytes(head[..8].try_into().unwrap());
    if noise.is_nan() || noise < 0.0 {
        return Err(Error::Format("negative or NaN noise estimate".into()));
    }
    let public = match head[8] {
        0 => None,
        1 => Some(false),
        2 => Some(true),
        f => return Err(Error::Format(format!("bad public flag {f}"))),
    };
    let dim = params.ct_dim;
    let matrix = read_entries(r, dim * dim, params.log_q)?;
    Ok(Ciphertext::from_parts(dim, matrix, noise, public))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fhe::{encrypt_bit, keygen, trivial_ciphertext};

    #[test]
    fn key_roundtrip_is_bit_exact() {
        let p = Preset::Toy.params();
        let sk = keygen(&p, 3).unwrap();
        let mut buf = Vec::new();
        write_secret_key(&mut buf, &sk, &p).unwrap();
        assert_eq!(&buf[..4], MAGIC);
        assert_eq!(buf.len(), HEADER_LEN + 4 + 9 * 2);
        let (p2, sk2) = read_secret_key(&mut buf.as_slice()).unwrap();
        assert_eq!((p2, sk2), (p.clone(), sk.clone()));
        let mut again = Vec::new();
        write_secret_key(&mut again, &sk, &p).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn ciphertext_roundtrip_is_bit_exact() {
        let p = Preset::Toy.params();
        let sk = keygen(&p, 3).unwrap();
        for ct in [encrypt_bit(&sk, &p, true, 4).unwrap(), trivial_ciphertext(&p, false)] {
            let mut buf = Vec::new();
            write_ciphertext(&mut buf, &ct, &p).unwrap();
            assert_eq!(buf.len(), 9 + 108 * 108 * 2);
            let back = read_ciphertext(&mut buf.as_slice(), &p).unwrap();
            assert_eq!(back, ct);
        }
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let p = Preset::Toy.params();
        let sk = keygen(&p, 3).unwrap();
        let mut buf = Vec::new();
        write_secret_key(&mut buf, &sk, &p).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_secret_key(&mut bad.as_slice()), Err(Error::Format(_))));
        let short = &buf[..buf.len() - 1];
        assert!(read_secret_key(&mut &short[..]).is_err());
    }
}
