//! Encrypted CNN inference over a NAND-only GSW-style scheme.
//!
//! Layers, bottom-up: [`fhe`] encrypts bits and evaluates NAND; [`gates`] builds
//! adders, a Wallace-tree multiplier, comparison and multiplexing from NAND;
//! [`fixedpoint`] runs two's-complement fixed-point arithmetic on those circuits;
//! [`cnn`] evaluates convolution/ReLU/max-pool/fully-connected networks; and
//! [`error_analysis`] bounds the numerical error of the fixed-point path.
//!
//! The shipped parameter presets are sized for desk-scale experiments and
//! provide no real-world security.

pub mod cnn;
pub mod error;
pub mod error_analysis;
pub mod fhe;
pub mod fixedpoint;
pub mod gates;

pub use error::{Error, Result};
