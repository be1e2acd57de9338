//! Compander-based quantization of probability vectors, evaluated under KL divergence.
//!
//! Entries of a probability vector are mapped through a monotone compander
//! `f: [0,1] → [0,1]`, quantized uniformly to `N` levels, decoded and
//! renormalized. The crate provides the companders, exact and Monte Carlo loss
//! evaluation, worst-case bounds, the distillation reduction, dataset readers and
//! an experiment harness.

// NaN must fail range checks, so negated comparisons are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compander;
pub mod constants;
pub mod datasets;
pub mod density;
pub mod distill;
pub mod error;
pub mod float_format;
pub mod harness;
pub mod loss;
pub mod numeric;
pub mod quantizer;
pub mod records;
pub mod sampling;
pub mod simplex;
pub mod worstcase;

pub use compander::{build_compander, Compander, CompanderSpec};
pub use constants::MaximinConstants;
pub use density::Density;
pub use error::{Error, Result};
pub use float_format::FloatFormat;
pub use loss::{kl_divergence, LossReport, VectorCodec};
pub use quantizer::{DecodeMode, Quantizer};
pub use sampling::Prior;
pub use simplex::ProbVector;
