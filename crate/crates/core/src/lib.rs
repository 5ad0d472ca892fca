pub mod circuit;
pub mod density;
pub mod encoding;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod noise;
pub mod oracle;
pub mod pauli;
pub mod runner;
pub mod scalar;
pub mod transpile;

pub use error::{Error, Result};

pub type PauliSum64 = pauli::PauliSum<f64>;
pub type PauliSum32 = pauli::PauliSum<f32>;
pub type EncodedModel64 = model::EncodedModel<f64>;
pub type EncodedModel32 = model::EncodedModel<f32>;
pub type DensityMatrix64 = density::DensityMatrix<f64>;
pub type DensityMatrix32 = density::DensityMatrix<f32>;
pub type Channel64 = noise::Channel<f64>;
pub type Channel32 = noise::Channel<f32>;
pub type NoiseModel64 = noise::NoiseModel<f64>;
pub type NoiseModel32 = noise::NoiseModel<f32>;
pub type Oracle64 = oracle::Oracle<f64>;
pub type Oracle32 = oracle::Oracle<f32>;
