use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    Params(String),

    #[error("noise budget exhausted: estimate {estimate} >= budget {budget}")]
    NoiseExhausted { estimate: f64, budget: f64 },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("width mismatch: {left} vs {right}")]
    WidthMismatch { left: usize, right: usize },

    #[error("value {value} out of range for format Q{int_bits}.{frac_bits}")]
    Range { value: f64, int_bits: u32, frac_bits: u32 },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
