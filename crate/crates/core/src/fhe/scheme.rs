//! GSW-style bit encryption with NAND as the only homomorphic operation.
//!
//! The secret is `s = (-t, 1)` over `Z_q` and `v = s ⊗ (1, 2, .., 2^{ℓ-1})` is its
//! gadget expansion of length `ct_dim`. A ciphertext `C` of bit `μ` satisfies
//! `C·v = μ·v + e` for a small error vector `e`. NAND is `I - G⁻¹(C_b)·C_a`,
//! where `G⁻¹` (flattening) re-expands each row into bits without changing its
//! inner product with `v`, so the product picks up `G⁻¹(C_b)·e_a` (at most
//! `ct_dim·|e_a|`) plus `μ_a·e_b`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::params::FheParams;
use super::rng::{hash_words, rng_from_seed, FheRng};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretKey {
    /// `(-t, 1)` over `Z_q`; length `lattice_dim + 1`.
    secret: Vec<u32>,
    /// Gadget expansion of the secret, length `ct_dim`.
    powers: Vec<u32>,
    log_q: u32,
}

impl SecretKey {
    pub fn from_vector(secret: Vec<u32>, params: &FheParams) -> Result<Self> {
        params.validate()?;
        if secret.len() != params.lattice_dim + 1 {
            return Err(Error::Params(format!(
                "secret length {} != lattice_dim + 1 = {}",
                secret.len(),
                params.lattice_dim + 1
            )));
        }
        if secret.last() != Some(&1) {
            return Err(Error::Params("secret key must end in 1".into()));
        }
        if secret.iter().any(|&x| x as u64 >= params.modulus) {
            return Err(Error::Params("secret entry outside [0, q)".into()));
        }
        let mask = params.mask();
        let powers = secret
            .iter()
            .flat_map(|&s| (0..params.log_q).map(move |j| s.wrapping_shl(j) & mask))
            .collect();
        Ok(SecretKey {
            secret,
            powers,
            log_q: params.log_q,
        })
    }

    pub fn secret_vector(&self) -> &[u32] {
        &self.secret
    }

    fn ct_dim(&self) -> usize {
        self.powers.len()
    }
}

/// Square `ct_dim × ct_dim` matrix over `Z_q`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Ciphertext {
    pub(crate) dim: usize,
    pub(crate) matrix: Vec<u32>,
    /// Tracked upper bound on `|e|_∞`.
    pub noise_estimate: f64,
    /// Set for noiseless public constants (`μ·I`), which NAND can fold.
    pub(crate) public: Option<bool>,
}

impl Ciphertext {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[u32] {
        &self.matrix
    }

    pub fn public_value(&self) -> Option<bool> {
        self.public
    }

    pub(crate) fn from_parts(dim: usize, matrix: Vec<u32>, noise_estimate: f64, public: Option<bool>) -> Self {
        debug_assert_eq!(matrix.len(), dim * dim);
        Ciphertext {
            dim,
            matrix,
            noise_estimate,
            public,
        }
    }

    fn row(&self, r: usize) -> &[u32] {
        &self.matrix[r * self.dim..(r + 1) * self.dim]
    }

    pub(crate) fn content_hash(&self) -> u64 {
        hash_words(&self.matrix)
    }
}

/// Samples a secret key. Deterministic in `rng_seed`.
pub fn keygen(params: &FheParams, rng_seed: u64) -> Result<SecretKey> {
    params.validate()?;
    let mut rng = rng_from_seed(rng_seed);
    let mask = params.mask();
    let mut secret: Vec<u32> = (0..params.lattice_dim).map(|_| rng.random::<u32>() & mask).collect();
    secret.push(1);
    SecretKey::from_vector(secret, params)
}

fn sample_noise(rng: &mut FheRng, params: &FheParams) -> i64 {
    let bound = params.fresh_noise_bound();
    let normal = Normal::new(0.0, params.noise_stddev).expect("validated noise width");
    let e: f64 = normal.sample(rng);
    e.round().clamp(-bound, bound) as i64
}

fn check_key(sk: &SecretKey, params: &FheParams) -> Result<()> {
    if sk.ct_dim() != params.ct_dim || sk.log_q != params.log_q {
        return Err(Error::Params("secret key does not match parameters".into()));
    }
    Ok(())
}

/// Encrypts one bit: `C = μ·I + BitDecomp(A)` where each row `(a, <a,t> + e)`
/// of `A` is an LWE sample with `<row, s> = e`.
pub fn encrypt_bit(sk: &SecretKey, params: &FheParams, bit: bool, rng_seed: u64) -> Result<Ciphertext> {
    check_key(sk, params)?;
    let mut rng = rng_from_seed(rng_seed);
    let n = params.lattice_dim;
    let l = params.log_q as usize;
    let dim = params.ct_dim;
    let mask = params.mask();
    let q = params.modulus as i64;
    let mut matrix = vec![0u32; dim * dim];
    let mut lwe = vec![0u32; n + 1];
    for r in 0..dim {
        // t_i = -s_i mod q
        let mut dot = 0u32;
        for (slot, &s) in lwe.iter_mut().zip(&sk.secret[..n]) {
            let a = rng.random::<u32>() & mask;
            *slot = a;
            let t = s.wrapping_neg() & mask;
            dot = dot.wrapping_add(a.wrapping_mul(t));
        }
        let e = sample_noise(&mut rng, params).rem_euclid(q) as u32;
        lwe[n] = dot.wrapping_add(e) & mask;
        let row = &mut matrix[r * dim..(r + 1) * dim];
        for (i, &x) in lwe.iter().enumerate() {
            for j in 0..l {
                row[i * l + j] = (x >> j) & 1;
            }
        }
        if bit {
            row[r] += 1;
        }
    }
    Ok(Ciphertext {
        dim,
        matrix,
        noise_estimate: params.fresh_noise_bound(),
        public: None,
    })
}

/// The noiseless encoding `μ·I`.
pub fn trivial_ciphertext(params: &FheParams, bit: bool) -> Ciphertext {
    let dim = params.ct_dim;
    let mut matrix = vec![0u32; dim * dim];
    if bit {
        for i in 0..dim {
            matrix[i * dim + i] = 1;
        }
    }
    Ciphertext {
        dim,
        matrix,
        noise_estimate: 0.0,
        public: Some(bit),
    }
}

/// `<C_row, v>` for the row whose gadget weight is `q/2`.
fn phase(sk: &SecretKey, ct: &Ciphertext) -> u64 {
    let l = sk.log_q as usize;
    let r = ct.dim - 1; // index (lattice_dim)·ℓ + ℓ-1, where v_r = 1·2^{ℓ-1}
    debug_assert_eq!(r, (sk.secret.len() - 1) * l + l - 1);
    let mut acc = 0u64;
    for (&c, &v) in ct.row(r).iter().zip(&sk.powers) {
        acc = acc.wrapping_add(c as u64 * v as u64);
    }
    acc & ((1u64 << sk.log_q) - 1)
}

fn check_ct(sk: &SecretKey, ct: &Ciphertext) -> Result<()> {
    if ct.dim != sk.ct_dim() || ct.matrix.len() != ct.dim * ct.dim {
        return Err(Error::Params("ciphertext dimension does not match key".into()));
    }
    Ok(())
}

/// Decrypts without consulting the tracked estimate.
pub fn decrypt_unchecked(sk: &SecretKey, ct: &Ciphertext) -> Result<bool> {
    check_ct(sk, ct)?;
    let q = 1u64 << sk.log_q;
    let x = phase(sk, ct);
    Ok(x >= q / 4 && x < 3 * q / 4)
}

pub fn decrypt_bit(sk: &SecretKey, params: &FheParams, ct: &Ciphertext) -> Result<bool> {
    if ct.noise_estimate >= params.noise_budget {
        return Err(Error::NoiseExhausted {
            estimate: ct.noise_estimate,
            budget: params.noise_budget,
        });
    }
    decrypt_unchecked(sk, ct)
}

/// Actual signed noise on the decryption row, given the true plaintext.
pub fn measured_noise(sk: &SecretKey, ct: &Ciphertext, bit: bool) -> Result<i64> {
    check_ct(sk, ct)?;
    let q = 1i64 << sk.log_q;
    let x = phase(sk, ct) as i64 - if bit { q / 2 } else { 0 };
    let e = x.rem_euclid(q);
    Ok(if e >= q / 2 { e - q } else { e })
}

/// Homomorphic NAND, `I - G⁻¹(C_b)·C_a`, with no budget checks.
pub fn nand_ciphertexts(params: &FheParams, a: &Ciphertext, b: &Ciphertext) -> Ciphertext {
    let dim = params.ct_dim;
    assert_eq!(a.dim, dim, "ciphertext/parameter mismatch");
    assert_eq!(b.dim, dim, "ciphertext/parameter mismatch");
    let mask = params.mask();
    match (a.public, b.public) {
        (Some(x), Some(y)) => return trivial_ciphertext(params, !(x && y)),
        (Some(false), _) | (_, Some(false)) => return trivial_ciphertext(params, true),
        (Some(true), None) => return identity_minus(params, b),
        (None, Some(true)) => return identity_minus(params, a),
        (None, None) => {}
    }
    let n1 = params.lattice_dim + 1;
    let l = params.log_q as usize;
    let mut out = vec![0u32; dim * dim];
    let mut acc = vec![0u32; dim];
    let mut folded = vec![0u32; n1];
    for r in 0..dim {
        // G⁻¹ of row r of C_b: fold the gadget digits, then re-expand into bits.
        let row_b = b.row(r);
        for (i, f) in folded.iter_mut().enumerate() {
            let mut y = 0u32;
            for j in 0..l {
                y = y.wrapping_add(row_b[i * l + j].wrapping_shl(j as u32));
            }
            *f = y & mask;
        }
        acc.fill(0);
        for (i, &y) in folded.iter().enumerate() {
            let mut bits = y;
            while bits != 0 {
                let j = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let src = a.row(i * l + j);
                for (dst, &s) in acc.iter_mut().zip(src) {
                    *dst = dst.wrapping_add(s);
                }
            }
        }
        let out_row = &mut out[r * dim..(r + 1) * dim];
        for (c, (o, &x)) in out_row.iter_mut().zip(&acc).enumerate() {
            *o = ((c == r) as u32).wrapping_sub(x) & mask;
        }
    }
    Ciphertext {
        dim,
        matrix: out,
        noise_estimate: params.nand_noise(a.noise_estimate, b.noise_estimate),
        public: None,
    }
}

/// `I - C`: NAND against the public constant 1. Noise is carried over exactly.
fn identity_minus(params: &FheParams, c: &Ciphertext) -> Ciphertext {
    let dim = params.ct_dim;
    let mask = params.mask();
    let matrix = c
        .matrix
        .iter()
        .enumerate()
        .map(|(k, &x)| (((k / dim == k % dim) as u32).wrapping_sub(x)) & mask)
        .collect();
    Ciphertext {
        dim,
        matrix,
        noise_estimate: c.noise_estimate,
        public: None,
    }
}

/// Trusted re-encryption oracle: decrypts with the secret key and encrypts afresh.
pub fn refresh(sk: &SecretKey, ct: &Ciphertext, params: &FheParams, rng_seed: u64) -> Result<Ciphertext> {
    if ct.public.is_some() {
        return Ok(ct.clone());
    }
    let bit = decrypt_bit(sk, params, ct)?;
    encrypt_bit(sk, params, bit, rng_seed)
}
