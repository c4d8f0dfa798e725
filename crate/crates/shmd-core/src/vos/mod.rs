//! Hardware-style fixed-point inference with voltage-overscaling faults:
//! the number format, a quantized integer forward pass, a stochastic
//! fault injector for multiply-accumulate results, and a randomized
//! ensemble wrapper.

mod engine;
mod ensemble;
mod fixed;

pub use engine::{
    faulty_mac, ErrorMode, FaultModel, InferenceOutput, MacStats, QuantizedMlp, StochasticEngine,
};
pub use ensemble::RandomizedEnsemble;
pub use fixed::FixedPointFormat;
