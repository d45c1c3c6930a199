//! Topologically densified latent distributions: differentiable 0-dimensional
//! Vietoris-Rips persistence, a connectivity regularizer over class-pure
//! sub-batches, and the mass-concentration bound calculus that motivates it,
//! together with desk-scale training and empirical estimators.

pub mod analysis;
pub mod bounds;
pub mod error;
pub mod io;
pub mod persistence;
pub mod regularizer;
pub mod sampler;
mod seeds;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
pub use persistence::{barcode, is_beta_connected, Barcode, MstEdge, PointCloud};
