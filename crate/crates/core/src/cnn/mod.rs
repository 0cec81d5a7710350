//! Convolutional networks over encrypted fixed-point values.

pub mod bundle;
pub mod image;
pub mod infer;
pub mod model;
pub mod reference;

pub use bundle::Tensor;
pub use image::{normalize_pixel, PlainImage};
pub use infer::{
    argmax, classify, conv_layer, decrypt_scores, dot_product, dot_product_prepared, encrypt_image, fc_layer, EncImage,
    EncScores, PreparedLayer, PreparedNetwork, Weight,
};
pub use model::{flatten_index, Activation, LayerKind, LayerSpec, NetworkSpec, Shape};
