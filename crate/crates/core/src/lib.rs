//! Online training of separable models `ŷ = W h(x; θ)`.
//!
//! The linear head `W` is updated by recursive least squares (equivalently a
//! stochastic Newton step); the feature extractor `θ` is updated by a
//! first-order method evaluated at the freshly updated head. Baseline
//! optimizers, data loaders, independent oracles, and an experiment harness
//! are included.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{Matrix, SpdMatrix, Vector};
pub use model::{Dims, FeatureExtractor, ReluLayer, Sample, SeparableModel};
