//! Relevance-map stability under MRI-style noise and class-conditional stamps.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below pin the single-precision types the experiment pipeline uses.

pub mod checkpoint;
pub mod corpus;
pub mod corruption;
pub mod datagen;
pub mod error;
pub mod explain;
pub mod fsutil;
pub mod model;
pub mod nn;
pub mod pgm;
pub mod ridge;
pub mod rssa;
pub mod scalar;
pub mod tensor;

pub use error::{CheckpointError, Error, PgmError, Result};
pub use scalar::Scalar;
pub use tensor::Tensor;

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Params32 = nn::Params<f32>;
pub type Params64 = nn::Params<f64>;
pub type Dataset32 = datagen::Dataset<f32>;
