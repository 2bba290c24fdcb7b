//! Minimal deterministic CNN inference engine.
//!
//! Tensors are NCHW, row-major, `f64`. The fixed-point path quantizes
//! parameters once and activations at quantization sites only; arithmetic
//! inside a layer stays in `f64`.

mod config;
mod engine;
pub mod fixture;
mod model;
mod tensor;

pub use config::{LayerQuant, QuantConfig};
pub use engine::{
    argmax, capture_activations, capture_calibration, forward_fixed, forward_float,
    top1_agreement, Activations, Evaluator, FixedNetwork, Metrics,
};
pub use model::{LayerKind, LayerSpec, NetworkModel, QuantSite};
pub use tensor::Tensor;
