//! NAND-only GSW-style bit encryption and the bit-backend abstraction.

mod backend;
mod params;
mod rng;
mod scheme;
pub mod wire;

pub use backend::{BackendKind, Client, EncBit, Evaluator, GateCounts, GateStats};
pub use params::{FheParams, Preset, NOISE_TAIL_CUT};
pub use rng::{derive_seed, rng_from_seed, FheRng};
pub use scheme::{
    decrypt_bit, decrypt_unchecked, encrypt_bit, keygen, measured_noise, nand_ciphertexts, refresh, trivial_ciphertext,
    Ciphertext, SecretKey,
};
