//! Part-ensemble detection kit.
//!
//! Compares two strategies for detecting a composite object in images: an
//! ensemble of small per-part CNNs whose patch decisions are aggregated
//! through heatmaps, calibrated thresholds and voting rules, and a single
//! end-to-end CNN baseline. Ships with a from-scratch training engine, a
//! synthetic compositional dataset generator, and an experiment harness
//! that reproduces the four reference simulations at desk scale.

pub mod checkpoint;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod model;
pub mod nn;
pub mod patch;
pub mod profile;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
