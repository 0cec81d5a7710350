use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "fhecnn",
    version,
    about = "Encrypted CNN inference over NAND-only GSW encryption"
)]
pub struct Cli {
    /// Bit backend: `clear` evaluates the same circuits on plaintext bits.
    #[arg(long, global = true, value_enum, default_value_t = Backend::Clear)]
    pub backend: Backend,
    /// Parameter preset for gsw keys.
    #[arg(long, global = true, default_value = "toy")]
    pub preset: String,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    #[arg(long, global = true)]
    pub key: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Encrypt the model weights under the key instead of using them as public constants.
    #[arg(long, global = true)]
    pub encrypt_weights: bool,
    /// Print `key=value` lines instead of the readable report.
    #[arg(long, global = true)]
    pub kv: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    Clear,
    Gsw,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a secret key for the chosen preset.
    Keygen,
    /// Encode and encrypt an image (PGM, or CSV with --model for the shape).
    EncryptImage { image: PathBuf },
    /// Run the model on an encrypted image and write encrypted scores.
    Classify { image: PathBuf },
    /// Decrypt a scores file and print the scores and the predicted class.
    DecryptScores { scores: PathBuf },
    /// Print the worst-case numerical error bound of a model.
    Bound,
    /// Compare the fixed-point path against the floating-point reference.
    Verify {
        /// Image files, or directories whose `.pgm` files are used in name order.
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// Convert a JSON model description to the text model format.
    Convert { json: PathBuf },
}
