//! Stochastic hardware malware detector: a fixed-point MLP over
//! instruction-category frequency features, a voltage-overscaling fault
//! model for its multiply-accumulate units, a black-box evasion attack
//! against it, and PAC-style bounds on what an adversary can learn about
//! the randomized detector.

pub mod attack;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod model;
pub mod pac;
pub mod scalar;
pub mod seeds;
pub mod vos;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// The MLP with f64 weights, the default throughout.
pub type Mlp64 = model::MlpModel<f64>;
/// The MLP with f32 weights.
pub type Mlp32 = model::MlpModel<f32>;
