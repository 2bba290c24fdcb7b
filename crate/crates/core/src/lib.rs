//! Post-training fixed-point quantization for convolutional networks.
//!
//! Weights and biases get the fractional length that minimizes their
//! squared quantization error. Feature maps are modelled with a generalized
//! gamma density fitted to zero-excluded activation moments, and the step of
//! the asymptotically optimal uniform quantizer for that density picks the
//! fractional length. Backward-forward tuning then adjusts fractional lengths
//! layer by layer against a network-level metric, evaluated with the bundled
//! fixed-point inference engine.
//!
//! - [`fixedpoint`]: formats, the rounding/saturating quantizer, SQNR.
//! - [`ggd`]: density fitting, closed-form quantizer design, brute-force oracle.
//! - [`quantizers`]: per-layer fractional-length search for weights and feature maps.
//! - [`netsim`]: tensors, layers, float and fixed-point forward passes.
//! - [`bft`]: backward-forward tuning.
//! - [`formats`]: manifests, tensor blobs, stats/config/report files.
//! - [`pipeline`]: the end-to-end quantization schemes.

pub mod bft;
pub mod error;
pub mod fixedpoint;
pub mod formats;
pub mod ggd;
pub mod netsim;
pub mod pipeline;
pub mod quantizers;

pub use bft::{run_bft, BftConfig, BftTarget, BftTrace};
pub use error::{Error, Result};
pub use fixedpoint::{quantize_tensor, sqnr_db, FixedPointFormat, QuantizationError};
pub use ggd::{GgdParams, QuantizerDesign};
pub use netsim::{NetworkModel, QuantConfig, Tensor};
pub use pipeline::{CalibrationStats, QuantReport, QuantizeOptions, Scheme, SchemeTag};
pub use quantizers::{FlSearchConfig, LayerQuantResult, SampleStats, SearchMode};
