use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Number of standard deviations at which fresh noise samples are clipped.
/// Clipping makes `fresh_noise_bound` a hard bound rather than a tail estimate.
pub const NOISE_TAIL_CUT: f64 = 6.0;

/// Shipped parameter sets. Neither offers real-world security.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    /// `lattice_dim = 8`, `log_q = 12`: circuit tests and the tiny encrypted CNN.
    Toy,
    /// `lattice_dim = 32`, `log_q = 16`: timing studies.
    Demo,
}

impl Preset {
    pub const ALL: [Preset; 2] = [Preset::Toy, Preset::Demo];

    pub fn id(self) -> u8 {
        match self {
            Preset::Toy => 1,
            Preset::Demo => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.id() == id)
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Toy => "toy",
            Preset::Demo => "demo",
        }
    }

    pub fn params(self) -> FheParams {
        let p = match self {
            Preset::Toy => FheParams::new(8, 12, 0.3),
            Preset::Demo => FheParams::new(32, 16, 1.0),
        };
        p.expect("shipped presets are valid")
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toy" => Ok(Preset::Toy),
            "demo" => Ok(Preset::Demo),
            other => Err(Error::Params(format!(
                "unknown preset `{other}` (expected toy or demo)"
            ))),
        }
    }
}

/// Lattice parameters of the bit-encryption scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct FheParams {
    /// LWE secret dimension `n`.
    pub lattice_dim: usize,
    /// Ciphertext modulus `q`, a power of two.
    pub modulus: u64,
    /// `log2(q)`, also the gadget length.
    pub log_q: u32,
    /// Side of the square ciphertext matrix, `(lattice_dim + 1) * log_q`.
    pub ct_dim: usize,
    /// Width of the rounded-Gaussian encryption noise.
    pub noise_stddev: f64,
    /// Largest tolerated noise magnitude; decryption is exact below it.
    pub noise_budget: f64,
}

impl FheParams {
    /// Builds a parameter set with derived `modulus`, `ct_dim` and a budget of `q/4`.
    pub fn new(lattice_dim: usize, log_q: u32, noise_stddev: f64) -> Result<Self> {
        if !(2..=32).contains(&log_q) {
            return Err(Error::Params(format!("log_q must be in 2..=32, got {log_q}")));
        }
        let modulus = 1u64 << log_q;
        let p = FheParams {
            lattice_dim,
            modulus,
            log_q,
            ct_dim: (lattice_dim + 1) * log_q as usize,
            noise_stddev,
            noise_budget: (modulus / 4) as f64,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lattice_dim == 0 {
            return Err(Error::Params("lattice_dim must be positive".into()));
        }
        if !self.modulus.is_power_of_two() || self.modulus < 4 {
            return Err(Error::Params(format!(
                "modulus must be a power of two >= 4, got {}",
                self.modulus
            )));
        }
        if self.modulus.trailing_zeros() != self.log_q || self.log_q > 32 {
            return Err(Error::Params(format!(
                "log_q {} does not match modulus {}",
                self.log_q, self.modulus
            )));
        }
        if self.ct_dim != (self.lattice_dim + 1) * self.log_q as usize {
            return Err(Error::Params(format!(
                "ct_dim {} != (lattice_dim + 1) * log_q = {}",
                self.ct_dim,
                (self.lattice_dim + 1) * self.log_q as usize
            )));
        }
        if self.noise_stddev.is_nan()
            || self.noise_stddev <= 0.0
            || self.noise_budget.is_nan()
            || self.noise_budget <= 0.0
        {
            return Err(Error::Params("noise width and budget must be positive".into()));
        }
        if self.noise_stddev * 2.0 >= self.noise_budget {
            return Err(Error::Params("noise_stddev * 2 must be below noise_budget".into()));
        }
        if self.noise_budget > (self.modulus / 4) as f64 {
            return Err(Error::Params("noise_budget above q/4 cannot decrypt".into()));
        }
        Ok(())
    }

    pub fn mask(&self) -> u32 {
        (self.modulus - 1) as u32
    }

    /// Hard bound on the noise of a fresh encryption.
    pub fn fresh_noise_bound(&self) -> f64 {
        (self.noise_stddev * NOISE_TAIL_CUT).ceil().max(1.0)
    }

    /// Tracked noise of `nand(a, b)` given the operands' estimates.
    pub fn nand_noise(&self, est_a: f64, est_b: f64) -> f64 {
        est_a * self.ct_dim as f64 + est_b
    }

    /// Deepest balanced NAND tree of fresh encryptions whose tracked noise
    /// stays strictly below the budget without any refresh.
    pub fn rated_depth(&self) -> usize {
        let mut est = self.fresh_noise_bound();
        let mut depth = 0;
        loop {
            let next = self.nand_noise(est, est);
            if next >= self.noise_budget {
                return depth;
            }
            est = next;
            depth += 1;
        }
    }

    /// The preset these parameters came from, if any.
    pub fn preset(&self) -> Option<Preset> {
        Preset::ALL.into_iter().find(|p| &p.params() == self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_satisfy_invariants() {
        for p in Preset::ALL {
            let params = p.params();
            params.validate().unwrap();
            assert_eq!(params.ct_dim, (params.lattice_dim + 1) * params.log_q as usize);
            assert_eq!(params.modulus, 1 << params.log_q);
            assert_eq!(params.preset(), Some(p));
            assert_eq!(Preset::from_id(p.id()), Some(p));
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert_eq!(Preset::Toy.params().ct_dim, 108);
        assert_eq!(Preset::Demo.params().ct_dim, 528);
    }

    #[test]
    fn rejects_bad_modulus_and_dimension() {
        let mut p = Preset::Toy.params();
        p.modulus = 1000;
        assert!(matches!(p.validate(), Err(Error::Params(_))));
        let mut p = Preset::Toy.params();
        p.ct_dim += 1;
        assert!(matches!(p.validate(), Err(Error::Params(_))));
        assert!("bogus".parse::<Preset>().is_err());
    }

    #[test]
    fn toy_rated_depth_is_one() {
        // fresh bound 2, ct_dim 108: depth 1 gives 218, depth 2 would give 23762 > 1024
        let p = Preset::Toy.params();
        assert_eq!(p.fresh_noise_bound(), 2.0);
        assert_eq!(p.rated_depth(), 1);
    }
}
