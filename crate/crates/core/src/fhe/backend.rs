//! The bit-backend contract shared by the plaintext oracle and the GSW scheme.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::params::FheParams;
use super::rng::derive_seed;
use super::scheme::{self, Ciphertext, SecretKey};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BackendKind {
    Clear,
    Gsw,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Clear => "clear",
            BackendKind::Gsw => "gsw",
        })
    }
}

/// One bit as seen by a circuit: either a plaintext oracle bit or a GSW ciphertext.
#[derive(Clone, Debug)]
pub enum EncBit {
    Clear(bool),
    Gsw(Arc<Ciphertext>),
}

impl EncBit {
    pub fn backend(&self) -> BackendKind {
        match self {
            EncBit::Clear(_) => BackendKind::Clear,
            EncBit::Gsw(_) => BackendKind::Gsw,
        }
    }

    pub fn clear_value(&self) -> Option<bool> {
        match self {
            EncBit::Clear(b) => Some(*b),
            EncBit::Gsw(_) => None,
        }
    }

    pub fn ciphertext(&self) -> Option<&Ciphertext> {
        match self {
            EncBit::Clear(_) => None,
            EncBit::Gsw(c) => Some(c),
        }
    }

    pub fn noise_estimate(&self) -> f64 {
        self.ciphertext().map_or(0.0, |c| c.noise_estimate)
    }
}

/// Plain snapshot of [`GateStats`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GateCounts {
    pub nand_count: u64,
    pub refresh_count: u64,
    pub max_noise_seen: f64,
    pub overflow_count: u64,
}

impl GateCounts {
    /// Counter deltas since an earlier snapshot.
    pub fn since(&self, earlier: &GateCounts) -> GateCounts {
        GateCounts {
            nand_count: self.nand_count - earlier.nand_count,
            refresh_count: self.refresh_count - earlier.refresh_count,
            max_noise_seen: self.max_noise_seen,
            overflow_count: self.overflow_count - earlier.overflow_count,
        }
    }
}

/// Monotone counters, safe to bump from many threads.
#[derive(Debug, Default)]
pub struct GateStats {
    nand_count: AtomicU64,
    refresh_count: AtomicU64,
    // f64 bits; nonnegative floats order like their bit patterns
    max_noise_bits: AtomicU64,
    overflow_count: AtomicU64,
}

impl GateStats {
    pub fn snapshot(&self) -> GateCounts {
        GateCounts {
            nand_count: self.nand_count.load(Ordering::Relaxed),
            refresh_count: self.refresh_count.load(Ordering::Relaxed),
            max_noise_seen: f64::from_bits(self.max_noise_bits.load(Ordering::Relaxed)),
            overflow_count: self.overflow_count.load(Ordering::Relaxed),
        }
    }

    fn saw_noise(&self, noise: f64) {
        self.max_noise_bits
            .fetch_max(noise.max(0.0).to_bits(), Ordering::Relaxed);
    }
}

struct GswServer {
    params: FheParams,
    oracle: Option<Arc<SecretKey>>,
    refresh_seed: u64,
}

/// Evaluates NAND gates on one backend and keeps the gate statistics.
pub struct Evaluator {
    gsw: Option<GswServer>,
    stats: GateStats,
}

impl fmt::Debug for Evaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Evaluator")
            .field("backend", &self.kind())
            .field("stats", &self.stats.snapshot())
            .finish()
    }
}

impl Evaluator {
    pub fn clear() -> Self {
        Evaluator {
            gsw: None,
            stats: GateStats::default(),
        }
    }

    /// A GSW evaluator. With an `oracle` key, operands are refreshed whenever a
    /// NAND result would exceed half the noise budget.
    pub fn gsw(params: FheParams, oracle: Option<Arc<SecretKey>>, refresh_seed: u64) -> Result<Self> {
        params.validate()?;
        Ok(Evaluator {
            gsw: Some(GswServer {
                params,
                oracle,
                refresh_seed,
            }),
            stats: GateStats::default(),
        })
    }

    pub fn kind(&self) -> BackendKind {
        if self.gsw.is_some() {
            BackendKind::Gsw
        } else {
            BackendKind::Clear
        }
    }

    pub fn params(&self) -> Option<&FheParams> {
        self.gsw.as_ref().map(|g| &g.params)
    }

    pub fn stats(&self) -> GateCounts {
        self.stats.snapshot()
    }

    pub(crate) fn record_overflow(&self) {
        self.stats.overflow_count.fetch_add(1, Ordering::Relaxed);
    }

    /// A noiseless public constant.
    pub fn trivial_const(&self, bit: bool) -> EncBit {
        match &self.gsw {
            None => EncBit::Clear(bit),
            Some(g) => EncBit::Gsw(Arc::new(scheme::trivial_ciphertext(&g.params, bit))),
        }
    }

    pub fn nand(&self, a: &EncBit, b: &EncBit) -> Result<EncBit> {
        self.stats.nand_count.fetch_add(1, Ordering::Relaxed);
        match (&self.gsw, a, b) {
            (None, EncBit::Clear(x), EncBit::Clear(y)) => Ok(EncBit::Clear(!(x & y))),
            (Some(g), EncBit::Gsw(x), EncBit::Gsw(y)) => self.nand_gsw(g, x, y),
            _ => Err(Error::Usage(format!(
                "backend mismatch: evaluator {} got {} and {} bits",
                self.kind(),
                a.backend(),
                b.backend()
            ))),
        }
    }

    fn nand_gsw(&self, g: &GswServer, a: &Arc<Ciphertext>, b: &Arc<Ciphertext>) -> Result<EncBit> {
        let p = &g.params;
        if a.dim() != p.ct_dim || b.dim() != p.ct_dim {
            return Err(Error::Usage("ciphertext does not match evaluator parameters".into()));
        }
        let limit = p.noise_budget / 2.0;
        let fresh = p.fresh_noise_bound();
        let mut a = a.clone();
        let mut b = b.clone();
        if let Some(sk) = &g.oracle {
            let folds = a.public_value().is_some() || b.public_value().is_some();
            if !folds && p.nand_noise(a.noise_estimate, b.noise_estimate) > limit {
                if a.noise_estimate > fresh {
                    a = Arc::new(self.refresh_with(g, sk, &a)?);
                }
                if p.nand_noise(a.noise_estimate, b.noise_estimate) > limit && b.noise_estimate > fresh {
                    b = Arc::new(self.refresh_with(g, sk, &b)?);
                }
            }
        }
        let out = scheme::nand_ciphertexts(p, &a, &b);
        self.stats.saw_noise(out.noise_estimate);
        if out.noise_estimate >= p.noise_budget {
            return Err(Error::NoiseExhausted {
                estimate: out.noise_estimate,
                budget: p.noise_budget,
            });
        }
        Ok(EncBit::Gsw(Arc::new(out)))
    }

    fn refresh_with(&self, g: &GswServer, sk: &SecretKey, ct: &Ciphertext) -> Result<Ciphertext> {
        self.stats.refresh_count.fetch_add(1, Ordering::Relaxed);
        // keyed to content so results do not depend on evaluation order
        let seed = derive_seed(g.refresh_seed, ct.content_hash());
        scheme::refresh(sk, ct, &g.params, seed)
    }

    /// Explicit refresh through the evaluator's oracle key.
    pub fn refresh(&self, bit: &EncBit) -> Result<EncBit> {
        match (&self.gsw, bit) {
            (None, EncBit::Clear(_)) => Ok(bit.clone()),
            (Some(g), EncBit::Gsw(ct)) => {
                let sk = g
                    .oracle
                    .as_ref()
                    .ok_or_else(|| Error::Usage("refresh requires an oracle key".into()))?;
                Ok(EncBit::Gsw(Arc::new(self.refresh_with(g, sk, ct)?)))
            }
            _ => Err(Error::Usage("backend mismatch in refresh".into())),
        }
    }
}

/// The data owner's side: encrypts inputs and decrypts results.
#[derive(Clone, Debug)]
pub enum Client {
    Clear,
    Gsw {
        params: FheParams,
        key: Arc<SecretKey>,
        seed: u64,
    },
}

impl Client {
    pub fn gsw(params: FheParams, key: SecretKey, seed: u64) -> Self {
        Client::Gsw {
            params,
            key: Arc::new(key),
            seed,
        }
    }

    pub fn kind(&self) -> BackendKind {
        match self {
            Client::Clear => BackendKind::Clear,
            Client::Gsw { .. } => BackendKind::Gsw,
        }
    }

    /// Encrypts one bit; `nonce` must be unique per encrypted bit.
    pub fn encrypt_bit(&self, bit: bool, nonce: u64) -> Result<EncBit> {
        match self {
            Client::Clear => Ok(EncBit::Clear(bit)),
            Client::Gsw { params, key, seed } => {
                let ct = scheme::encrypt_bit(key, params, bit, derive_seed(*seed, nonce))?;
                Ok(EncBit::Gsw(Arc::new(ct)))
            }
        }
    }

    pub fn decrypt_bit(&self, bit: &EncBit) -> Result<bool> {
        match (self, bit) {
            (Client::Clear, EncBit::Clear(b)) => Ok(*b),
            (Client::Gsw { params, key, .. }, EncBit::Gsw(ct)) => scheme::decrypt_bit(key, params, ct),
            _ => Err(Error::Usage(format!(
                "backend mismatch: {} client got a {} bit",
                self.kind(),
                bit.backend()
            ))),
        }
    }

    /// An evaluator on the matching backend; GSW evaluators get this key as refresh oracle.
    pub fn evaluator(&self, refresh_seed: u64) -> Result<Evaluator> {
        match self {
            Client::Clear => Ok(Evaluator::clear()),
            Client::Gsw { params, key, .. } => Evaluator::gsw(params.clone(), Some(key.clone()), refresh_seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fhe::params::Preset;
    use crate::fhe::scheme::keygen;

    fn gsw_client() -> Client {
        let p = Preset::Toy.params();
        let sk = keygen(&p, 5).unwrap();
        Client::gsw(p, sk, 6)
    }

    #[test]
    fn truth_table_on_both_backends() {
        for client in [Client::Clear, gsw_client()] {
            let ev = client.evaluator(0).unwrap();
            for (i, (x, y)) in [(false, false), (false, true), (true, false), (true, true)]
                .into_iter()
                .enumerate()
            {
                let a = client.encrypt_bit(x, 2 * i as u64).unwrap();
                let b = client.encrypt_bit(y, 2 * i as u64 + 1).unwrap();
                let c = ev.nand(&a, &b).unwrap();
                assert_eq!(client.decrypt_bit(&c).unwrap(), !(x && y));
            }
            assert_eq!(ev.stats().nand_count, 4);
        }
    }

    #[test]
    fn backend_mismatch_is_a_usage_error() {
        let ev = Evaluator::clear();
        let g = gsw_client();
        let gbit = g.encrypt_bit(true, 0).unwrap();
        assert!(matches!(ev.nand(&EncBit::Clear(true), &gbit), Err(Error::Usage(_))));
        assert!(matches!(Client::Clear.decrypt_bit(&gbit), Err(Error::Usage(_))));
    }

    #[test]
    fn auto_refresh_keeps_long_chains_decryptable() {
        let client = gsw_client();
        let ev = client.evaluator(9).unwrap();
        let mut x = client.encrypt_bit(true, 1).unwrap();
        let mut expect = true;
        for _ in 0..12 {
            x = ev.nand(&x, &x).unwrap();
            expect = !expect;
            assert_eq!(client.decrypt_bit(&x).unwrap(), expect);
        }
        let s = ev.stats();
        assert!(s.refresh_count > 0);
        assert!(s.max_noise_seen <= Preset::Toy.params().noise_budget / 2.0);
    }

    #[test]
    fn without_oracle_noise_exhaustion_is_reported() {
        let p = Preset::Toy.params();
        let client = gsw_client();
        let ev = Evaluator::gsw(p, None, 0).unwrap();
        let x = client.encrypt_bit(true, 1).unwrap();
        let y = ev.nand(&x, &x).unwrap();
        assert!(matches!(ev.nand(&y, &y), Err(Error::NoiseExhausted { .. })));
    }
}
